use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use adhesion_core::scenario::{self, Depth, SweepGrid};
use adhesion_core::{FluxParams, RegimeClass, Result, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "adhesion",
    version,
    about = "Forward-backward-forward diffusion: surrogate solves, laminates and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify (alpha, beta), or a uniform N x M grid over [0, 1]^2.
    Classify {
        #[arg(long, required_unless_present = "sweep")]
        alpha: Option<f64>,
        #[arg(long, required_unless_present = "sweep")]
        beta: Option<f64>,
        /// Grid size as `NxM`; prints CSV.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Regularized solve of the datum's case, without laminates.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Full pipeline with seeds `1..=K`.
    Construct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Re-check exported fields against `report.json` in the same directory.
    Verify {
        #[arg(long)]
        fields: PathBuf,
    },
    /// Full pipeline with the configured seeds.
    Scenario {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Classify a parameter grid and optionally run a scenario at each point.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_sweep(s: &str) -> Option<(usize, usize)> {
    let (a, b) = s.split_once(['x', 'X'])?;
    let (n, m) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
    (n >= 2 && m >= 2).then_some((n, m))
}

fn classify(alpha: Option<f64>, beta: Option<f64>, sweep: Option<String>) -> Result<bool> {
    if let Some(s) = sweep {
        let (n, m) = parse_sweep(&s).ok_or_else(|| {
            adhesion_core::Error::Config(format!("bad sweep size {s:?}, expected NxM with N, M >= 2"))
        })?;
        println!("alpha,beta,class");
        for i in 0..n {
            for j in 0..m {
                let (a, b) = (i as f64 / (n - 1) as f64, j as f64 / (m - 1) as f64);
                println!("{a},{b},{}", FluxParams::new(a, b)?.classify());
            }
        }
        return Ok(true);
    }
    let p = FluxParams::new(alpha.unwrap(), beta.unwrap())?;
    let class = p.classify();
    let critical = if class == RegimeClass::FDBDF { Some(p.critical_points()?) } else { None };
    let out = json!({ "alpha": p.alpha, "beta": p.beta, "class": class, "critical": critical });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(true)
}

fn pipeline(cfg: ScenarioConfig, depth: Depth, out: &Path) -> Result<bool> {
    let o = scenario::run_scenario(&cfg, depth)?;
    scenario::write_outputs(&o, &cfg, out)?;
    let r = &o.report;
    println!("case {} ({}), {} stages", r.case, r.class, r.stages.len());
    for item in &r.items {
        println!(
            "{} {}: {:e} (threshold {:e})",
            if item.pass { "ok  " } else { "FAIL" },
            item.name,
            item.value,
            item.threshold
        );
    }
    println!("{} -> {}", if r.pass { "pass" } else { "fail" }, out.display());
    Ok(r.pass)
}

fn verify(dir: &Path) -> Result<bool> {
    let root = if dir.join("report.json").exists() { dir } else { dir.parent().unwrap_or(dir) };
    let checks = scenario::verify_directory(root)?;
    for c in &checks {
        println!(
            "{} {}: {} levels x {} cells, conservation {:e}, worst residual {:e}",
            if c.pass { "ok  " } else { "FAIL" },
            c.file,
            c.levels,
            c.cells,
            c.conservation_error,
            c.worst_residual
        );
    }
    Ok(!checks.is_empty() && checks.iter().all(|c| c.pass))
}

fn sweep(grid: &Path, out: Option<PathBuf>) -> Result<bool> {
    let rows = SweepGrid::load(grid)?.run()?;
    let mut text = String::from("alpha,beta,class,case,pass,error\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.alpha,
            r.beta,
            r.class,
            r.case.map(|c| c.as_str().to_string()).unwrap_or_default(),
            r.pass.map(|p| p.to_string()).unwrap_or_default(),
            r.error.as_deref().unwrap_or("").replace(',', ";"),
        ));
    }
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(rows.iter().all(|r| r.error.is_none() && r.pass != Some(false)))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Classify { alpha, beta, sweep } => classify(alpha, beta, sweep),
        Command::Simulate { config, out } => pipeline(ScenarioConfig::load(&config)?, Depth::Classical, &out),
        Command::Construct { config, seeds, out } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            cfg.laminate.seeds = (1..=seeds).collect();
            pipeline(cfg, Depth::Full, &out)
        }
        Command::Verify { fields } => verify(&fields),
        Command::Scenario { config, out } => pipeline(ScenarioConfig::load(&config)?, Depth::Full, &out),
        Command::Sweep { grid, out } => sweep(&grid, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

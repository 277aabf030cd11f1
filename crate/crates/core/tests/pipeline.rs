mod common;

use std::fs;

use adhesion_core::scenario::{run_scenario, verify_directory, write_outputs, CaseLabel, Depth, SweepGrid};
use adhesion_core::{Error, ScenarioConfig};

use common::*;

fn config(text: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml(text).unwrap()
}

const II2: &str = r#"
[model]
alpha = 0.9
beta = 1.0
initial = { kind = "bump", base = 0.05, amplitude = 0.55, power = 4 }
[grid]
cells = 64
[laminate]
seeds = [1, 2]
"#;

const III: &str = r#"
[model]
alpha = 0.9
beta = 1.0
initial = { kind = "bump", base = 0.99, amplitude = -0.1, power = 4 }
[grid]
cells = 64
[laminate]
seeds = [1, 2]
"#;

#[test]
fn case_i_has_no_mixing_region() {
    let o = run_scenario(&case_i_config(64), Depth::Full).unwrap();
    assert_eq!(o.report.case, CaseLabel::I);
    assert!(o.report.pass);
    assert!(o.q_regions.is_empty() && o.laminates.is_empty());
}

#[test]
fn ii2_glues_second_stage_to_first() {
    let o = run_scenario(&config(II2), Depth::Full).unwrap();
    let r = &o.report;
    assert_eq!(r.case, CaseLabel::II2);
    assert!(r.pass, "{:#?}", r.items.iter().filter(|i| !i.pass).collect::<Vec<_>>());
    let (a, b) = (&o.fields[0].1, &o.fields[1].1);
    assert_eq!(a.t_end(), b.times[0]);
    assert_eq!(a.last(), b.slice(0));
    let c = r.critical;
    assert!(b.last().iter().all(|&u| u < c.s0_minus));
    // stage 2 keeps the original flux on its range
    assert!(r.stages[1].classical_residual_true_flux <= 1e-3);
}

#[test]
fn iii_mirrors_ii1() {
    let o = run_scenario(&config(III), Depth::Full).unwrap();
    assert_eq!(o.report.case, CaseLabel::III);
    assert!(o.report.pass);
    let q = &o.q_regions[0].1;
    assert!(q.touches_t0 && q.bounded_before_end());
}

#[test]
fn epochs_conserve_mass_across_boundaries() {
    let o = run_scenario(&case_iv_config(), Depth::Classical).unwrap();
    let plan = o.report.epochs.as_ref().unwrap();
    assert_eq!(o.fields.len(), 4);
    for (k, w) in o.fields.windows(2).enumerate() {
        let (a, b) = (&w[0].1, &w[1].1);
        assert_eq!(a.t_end(), plan.boundaries[k]);
        assert!((a.mass(a.levels() - 1) - b.mass(0)).abs() <= 1e-9);
    }
    for w in plan.windows.windows(2) {
        assert!(w[0].0 < w[1].0 && w[1].1 < w[0].1);
    }
}

#[test]
fn forced_label_overrides_dispatch() {
    let mut cfg = case_ii1_config();
    cfg.model.case = Some("(ii-1)".into());
    cfg.grid.cells = 64;
    let o = run_scenario(&cfg, Depth::Classical).unwrap();
    assert_eq!(o.report.case, CaseLabel::II1);
    cfg.model.case = Some("(v)".into());
    assert!(matches!(run_scenario(&cfg, Depth::Classical), Err(Error::Config(_))));
}

#[test]
fn bad_inputs_are_rejected() {
    let mut cfg = case_ii1_config();
    cfg.laminate.r1 = Some(0.0970);
    assert!(matches!(run_scenario(&cfg, Depth::Classical), Err(Error::InvalidParams(_))));

    let mut cfg = case_iv_config();
    cfg.epochs.count = 1;
    assert!(run_scenario(&cfg, Depth::Classical).is_err());
    cfg.epochs.count = 3;
    cfg.epochs.r0 = Some(0.2);
    assert!(run_scenario(&cfg, Depth::Classical).is_err());

    let mut cfg = case_i_config(64);
    cfg.model.initial = adhesion_core::InitialDatum::Constant { value: 1.2 };
    assert!(matches!(run_scenario(&cfg, Depth::Classical), Err(Error::Config(_))));

    let mut cfg = case_i_config(64);
    cfg.model.alpha = 0.5;
    assert!(run_scenario(&cfg, Depth::Classical).is_err());
}

#[test]
fn outputs_are_reproducible_and_verifiable() {
    let mut cfg = case_ii1_config();
    cfg.grid.cells = 64;
    cfg.laminate.seeds = vec![1, 2];
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let o = run_scenario(&cfg, Depth::Full).unwrap();
        write_outputs(&o, &cfg, d.path()).unwrap();
    }
    let mut names: Vec<_> =
        fs::read_dir(dirs[0].path().join("fields")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4);
    for n in &names {
        let a = fs::read(dirs[0].path().join("fields").join(n)).unwrap();
        let b = fs::read(dirs[1].path().join("fields").join(n)).unwrap();
        assert!(a == b, "{n:?} differs");
    }
    assert_eq!(
        fs::read(dirs[0].path().join("report.json")).unwrap(),
        fs::read(dirs[1].path().join("report.json")).unwrap()
    );
    let header = fs::read_to_string(dirs[0].path().join("fields/u_star_stage1.csv")).unwrap();
    assert!(header.starts_with("t,x,u\n"));
    let checks = verify_directory(dirs[0].path()).unwrap();
    assert_eq!(checks.len(), 3);
    assert!(checks.iter().all(|c| c.pass));
    let saved = ScenarioConfig::load(&dirs[0].path().join("config.toml")).unwrap();
    assert_eq!(saved, cfg);
}

#[test]
fn sweep_classifies_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("base.toml"), case_i_config(32).to_toml().unwrap()).unwrap();
    fs::write(dir.path().join("grid.toml"), "alpha = [0.5, 0.9]\nbeta = [1.0]\nconfig = \"base.toml\"\n").unwrap();
    let rows = SweepGrid::load(&dir.path().join("grid.toml")).unwrap().run().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].case, None);
    assert_eq!(rows[1].case, Some(CaseLabel::I));
    assert_eq!(rows[1].pass, Some(true));
}

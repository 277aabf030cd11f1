//! Case dispatch and the end-to-end pipelines: surrogate flux, regularized
//! solve, subsolution, mixing region, laminates and verification.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::branch::{BranchTable, Side};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::flux::{CriticalData, FluxParams, RegimeClass};
use crate::grid::{Grid, SpaceTimeField};
use crate::laminate::{self, Defects, LaminateSolution, OscillationReport};
use crate::modified_flux::{ModifiedFlux, OneSide};
use crate::solver::{self, SolverOptions};
use crate::subsolution::{self, Component, QRegion, SubsolutionFields, SubsolutionReport, Walls};
use crate::weak_form::{self, CheckItem, Segment, VerificationReport, DEFAULT_MODES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    #[serde(rename = "i")]
    I,
    #[serde(rename = "ii-1")]
    II1,
    #[serde(rename = "ii-2")]
    II2,
    #[serde(rename = "iii")]
    III,
    #[serde(rename = "iv")]
    IV,
}

impl CaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseLabel::I => "i",
            CaseLabel::II1 => "ii-1",
            CaseLabel::II2 => "ii-2",
            CaseLabel::III => "iii",
            CaseLabel::IV => "iv",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        Ok(match t {
            "i" => CaseLabel::I,
            "ii-1" => CaseLabel::II1,
            "ii-2" => CaseLabel::II2,
            "iii" => CaseLabel::III,
            "iv" => CaseLabel::IV,
            _ => return Err(Error::Config(format!("unknown case label {s:?}"))),
        })
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatumStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl DatumStats {
    pub fn of(u0: &[f64]) -> Self {
        let min = u0.iter().copied().fold(f64::INFINITY, f64::min);
        let max = u0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { min, max, mean: u0.iter().sum::<f64>() / u0.len() as f64 }
    }
}

/// Exactly one label for every datum once the parameters are forward-backward-forward.
pub fn classify_case(c: &CriticalData, d: &DatumStats) -> CaseLabel {
    if d.max < c.s0_minus || d.min > c.s0_plus {
        CaseLabel::I
    } else if d.mean < c.s0_minus {
        // s2- = s0- for the first type, so the split only happens for the second
        if d.mean < c.s2_minus {
            CaseLabel::II1
        } else {
            CaseLabel::II2
        }
    } else if d.mean > c.s0_plus {
        CaseLabel::III
    } else {
        CaseLabel::IV
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochPlan {
    pub r0: f64,
    pub c1: f64,
    pub c2: f64,
    /// End of the first epoch.
    pub t1: f64,
    /// `T_j = T_1 + (j - 1) * length`, `j = 1..=count`.
    pub boundaries: Vec<f64>,
    /// `(r1_k, r2_k) = (r0 - c1/k, r0 + c2/k)`.
    pub windows: Vec<(f64, f64)>,
    pub length: f64,
}

/// Harmonic windows shrinking to `r0`; `t1` is set once the entry time is known.
pub fn plan_epochs(
    table: &BranchTable,
    r0: f64,
    count: usize,
    c1: Option<f64>,
    c2: Option<f64>,
    length: f64,
) -> Result<EpochPlan> {
    let (lo, hi) = table.domain();
    if !(lo < r0 && r0 < hi) {
        return Err(Error::InvalidParams(format!("r0 = {r0} must lie in ({lo}, {hi})")));
    }
    if count < 2 {
        return Err(Error::InvalidParams(format!("need at least two epochs, got {count}")));
    }
    if !(length > 0.0) {
        return Err(Error::InvalidParams(format!("epoch length {length} must be positive")));
    }
    let c1 = c1.unwrap_or_else(|| 0.001f64.min(0.9 * (r0 - lo)));
    let c2 = c2.unwrap_or_else(|| 0.0008f64.min(0.9 * (hi - r0)));
    if !(c1 > 0.0 && r0 - c1 > lo && c2 > 0.0 && r0 + c2 < hi) {
        return Err(Error::InvalidParams(format!("window constants c1={c1}, c2={c2} leave ({lo}, {hi})")));
    }
    let windows = (1..=count).map(|k| (r0 - c1 / k as f64, r0 + c2 / k as f64)).collect();
    Ok(EpochPlan { r0, c1, c2, t1: 0.0, boundaries: Vec::new(), windows, length })
}

impl EpochPlan {
    pub fn set_t1(&mut self, t1: f64) {
        self.t1 = t1;
        self.boundaries = (0..self.windows.len()).map(|j| t1 + j as f64 * self.length).collect();
    }
}

/// Default flux window for the two-sided pipelines, placed inside the
/// admissible interval `(base, top)` at fractions 0.25 and 0.9 of its width.
pub fn default_window(case: CaseLabel, p: &FluxParams, c: &CriticalData, mean: f64) -> Result<(f64, f64)> {
    let (base, top) = admissible_window(case, p, c, mean)?;
    let gap = top - base;
    Ok((base + 0.25 * gap, top - 0.1 * gap))
}

/// Open/closed bounds the window must respect in each case.
fn admissible_window(case: CaseLabel, p: &FluxParams, c: &CriticalData, mean: f64) -> Result<(f64, f64)> {
    Ok(match case {
        CaseLabel::II1 => (p.rho(mean).max(p.rho(c.s1_minus)), c.r_star),
        CaseLabel::III => (c.r_low, p.rho(mean).min(c.r_star)),
        CaseLabel::II2 | CaseLabel::IV => (c.r_low, c.r_star),
        CaseLabel::I => return Err(Error::InvalidParams("case (i) uses no flux window".into())),
    })
}

fn check_window(case: CaseLabel, p: &FluxParams, c: &CriticalData, mean: f64, r1: f64, r2: f64) -> Result<()> {
    let (base, top) = admissible_window(case, p, c, mean)?;
    let ok = match case {
        CaseLabel::II1 => base < r1 && r1 < r2 && r2 <= top,
        CaseLabel::III => base <= r1 && r1 < r2 && r2 < top,
        _ => base <= r1 && r1 < r2 && r2 <= top,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("window ({r1}, {r2}) not admissible for case {case}: bounds ({base}, {top})")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub levels: usize,
    pub mass_drift: f64,
    pub max_principle_violation: f64,
    pub final_decay: f64,
    pub decay_rate: Option<f64>,
    pub rate_bound: f64,
    pub s_lower: f64,
}

impl DiagnosticsSummary {
    fn of(f: &SpaceTimeField, m: &ModifiedFlux) -> Self {
        let d = solver::SolverDiagnostics::from_field(f, m);
        Self {
            levels: f.levels(),
            mass_drift: d.mass_drift(),
            max_principle_violation: d.max_principle_violation(),
            final_decay: *d.decay_trace.last().unwrap(),
            decay_rate: d.decay_rate,
            rate_bound: d.rate_bound(),
            s_lower: d.s_lower,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSummary {
    pub count: usize,
    pub measure: f64,
    pub components: Vec<Component>,
    pub touches_t0: bool,
    pub full_levels: usize,
    pub levels: usize,
    /// Last time covered by `Q`.
    pub t_last: Option<f64>,
}

impl QSummary {
    fn of(q: &QRegion) -> Self {
        Self {
            count: q.count,
            measure: q.measure,
            t_last: q.components.iter().map(|c| c.t_range.1).reduce(f64::max),
            components: q.components.clone(),
            touches_t0: q.touches_t0,
            full_levels: q.full_levels.len(),
            levels: q.mask.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaminateSummary {
    pub seed: u64,
    pub phase: f64,
    pub delta: f64,
    pub eps: f64,
    pub defects: Defects,
    pub oscillation: OscillationReport,
    /// Worst catalog difference between the laminate (true flux) and the
    /// classical run (surrogate flux).
    pub weak_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistinct {
    pub seeds: (u64, u64),
    /// Measure where the two differ, as a fraction of `|Q|`.
    pub fraction: f64,
    pub sup_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub surrogate: ModifiedFlux,
    pub t_start: f64,
    pub t_end: f64,
    /// Time at which the stage's threshold was met, when it has one.
    pub t_hit: Option<f64>,
    pub diagnostics: DiagnosticsSummary,
    pub window: Option<(f64, f64)>,
    pub d0: Option<f64>,
    pub q: Option<QSummary>,
    pub subsolution: Option<SubsolutionReport>,
    /// Worst catalog residual of the classical run with the surrogate flux.
    pub classical_residual: f64,
    /// Same run tested against the original flux.
    pub classical_residual_true_flux: f64,
    pub laminates: Vec<LaminateSummary>,
    pub distinct: Vec<PairDistinct>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub case: CaseLabel,
    pub params: FluxParams,
    pub class: RegimeClass,
    pub critical: CriticalData,
    pub length: f64,
    pub cells: usize,
    pub datum: DatumStats,
    pub epochs: Option<EpochPlan>,
    pub stages: Vec<StageReport>,
    pub verification: VerificationReport,
    pub items: Vec<CheckItem>,
    pub pass: bool,
}

/// Full pipeline products.
pub struct ScenarioOutcome {
    pub report: ScenarioReport,
    /// Classical field of every stage.
    pub fields: Vec<(String, SpaceTimeField)>,
    pub q_regions: Vec<(String, QRegion)>,
    pub laminates: Vec<(String, LaminateSolution)>,
}

/// How far to take a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    /// Regularized solve only.
    Classical,
    /// Everything, including laminates and verification.
    Full,
}

struct Context {
    cfg: ScenarioConfig,
    params: FluxParams,
    table: BranchTable,
    grid: Grid,
    u0: Vec<f64>,
    stats: DatumStats,
    opts: SolverOptions,
    depth: Depth,
}

struct StageOutput {
    report: StageReport,
    field: SpaceTimeField,
    q: Option<QRegion>,
    laminates: Vec<LaminateSolution>,
    walls: Option<Walls>,
}

fn pairwise(sols: &[LaminateSolution], q: &QRegion) -> Vec<PairDistinct> {
    let mut out = Vec::new();
    for a in 0..sols.len() {
        for b in a + 1..sols.len() {
            let (measure, sup_gap) = laminate::difference(&sols[a], &sols[b]);
            out.push(PairDistinct {
                seeds: (sols[a].seed, sols[b].seed),
                fraction: if q.measure > 0.0 { measure / q.measure } else { 0.0 },
                sup_gap,
            });
        }
    }
    out
}

impl Context {
    fn new(cfg: &ScenarioConfig, depth: Depth) -> Result<Self> {
        let params = FluxParams::new(cfg.model.alpha, cfg.model.beta)?;
        let table = BranchTable::new(params)?;
        let grid = cfg.grid()?;
        let u0 = cfg.model.initial.sample(&grid)?;
        if let Some(bad) = u0.iter().find(|u| !(0.0..=1.0).contains(*u)) {
            return Err(Error::Config(format!("initial density {bad} outside [0, 1]")));
        }
        let stats = DatumStats::of(&u0);
        Ok(Self { cfg: cfg.clone(), params, table, grid, u0, stats, opts: cfg.solver.options(), depth })
    }

    fn rho_true(&self) -> impl Fn(f64) -> f64 + '_ {
        move |s| self.params.rho(s)
    }

    fn threshold_run(
        &self,
        m: &ModifiedFlux,
        u0: &[f64],
        t0: f64,
        violation: impl FnMut(&[f64]) -> f64,
    ) -> Result<(SpaceTimeField, f64)> {
        let t_max = self.cfg.solver.t_max.map(|t| t0 + t);
        solver::run_until_condition(m, self.grid, u0, t0, self.opts, violation, t_max)
    }

    /// Classical run on `[t0, t_end]`, then the inclusion machinery on it.
    #[allow(clippy::too_many_arguments)]
    fn stage(
        &self,
        name: &str,
        m: ModifiedFlux,
        u0: &[f64],
        t0: f64,
        t_end: f64,
        t_hit: Option<f64>,
        window: Option<(f64, f64)>,
    ) -> Result<StageOutput> {
        let (field, _) = solver::solve(&m, self.grid, u0, t0, t_end, self.opts)?;
        let diagnostics = DiagnosticsSummary::of(&field, &m);
        let rho_star = |s: f64| m.rho(s);
        let rho = self.rho_true();
        let base_cat = weak_form::residual_catalog(&field, &rho_star, DEFAULT_MODES);
        let classical_residual_true_flux = weak_form::residual_catalog(&field, &rho, DEFAULT_MODES).worst;
        let mut report = StageReport {
            name: name.to_string(),
            surrogate: m.clone(),
            t_start: t0,
            t_end,
            t_hit,
            diagnostics,
            window,
            d0: None,
            q: None,
            subsolution: None,
            classical_residual: base_cat.worst,
            classical_residual_true_flux,
            laminates: Vec::new(),
            distinct: Vec::new(),
        };
        let Some((r1, r2)) = window else {
            return Ok(StageOutput { report, field, q: None, laminates: Vec::new(), walls: None });
        };
        let walls = Walls::new(self.table, r1, r2)?;
        report.d0 = Some(walls.d0);
        let sub: SubsolutionFields = subsolution::build_subsolution(&field, &m)?;
        let q = subsolution::compute_q(&sub, &walls);
        report.q = Some(QSummary::of(&q));
        report.subsolution = Some(subsolution::check_strict_subsolution(&sub, &walls, &q));
        let mut lams = Vec::new();
        if self.depth == Depth::Full && !q.is_empty() {
            let lc = &self.cfg.laminate;
            let delta = self.grid.h() / lc.strips_per_cell as f64;
            let eps = lc.eps.unwrap_or(5.0 * delta * walls.d0);
            lams = if lc.seeds.len() >= 2 {
                laminate::distinct_solutions(&sub, &walls, &q, delta, eps, &lc.seeds)?
            } else {
                lc.seeds.iter().map(|&s| laminate::construct(&sub, &walls, &q, delta, eps, s)).collect::<Result<_>>()?
            };
            for lam in &lams {
                let cat = weak_form::residual_catalog(lam, &rho, DEFAULT_MODES);
                report.laminates.push(LaminateSummary {
                    seed: lam.seed,
                    phase: lam.phase,
                    delta: lam.delta,
                    eps,
                    defects: lam.defects.clone(),
                    oscillation: laminate::oscillation(lam, &q, &walls),
                    weak_excess: cat.worst_difference(&base_cat),
                });
            }
            report.distinct = pairwise(&lams, &q);
        }
        Ok(StageOutput { report, field, q: Some(q), laminates: lams, walls: Some(walls) })
    }

    fn default_t_end(&self, t_hit: f64) -> f64 {
        self.cfg.solver.t_end.unwrap_or(if t_hit > 0.0 { 1.25 * t_hit } else { 1.0 })
    }
}

fn stage_items(items: &mut Vec<CheckItem>, s: &StageReport, full: bool) {
    let n = &s.name;
    items.push(CheckItem::at_most(format!("{n}: mass drift"), s.diagnostics.mass_drift, 1e-10));
    items.push(CheckItem::at_most(format!("{n}: maximum principle"), s.diagnostics.max_principle_violation, 1e-12));
    if let Some(sub) = &s.subsolution {
        items.push(CheckItem::flag(format!("{n}: strict subsolution on Q"), sub.pass));
    }
    if !full {
        return;
    }
    for l in &s.laminates {
        let tag = format!("{n}: seed {}", l.seed);
        items.push(CheckItem::at_most(format!("{tag} sup deviation"), l.defects.sup_dev, l.eps));
        items.push(CheckItem::at_most(format!("{tag} band violation"), l.defects.band_violation_measure, 0.0));
        items.push(CheckItem::at_most(format!("{tag} exterior identity"), l.defects.exterior_dev, 0.0));
        items.push(CheckItem::at_most(format!("{tag} running mass vs v*"), l.defects.boundary_mismatch, 1e-12));
        items.push(CheckItem {
            name: format!("{tag} oscillation floor"),
            pass: l.oscillation.pass,
            value: l.oscillation.min_osc.unwrap_or(0.0),
            threshold: l.oscillation.d0 - 1e-9,
        });
    }
    for p in &s.distinct {
        items.push(CheckItem::at_least(format!("{n}: seeds {}-{} differ", p.seeds.0, p.seeds.1), p.fraction, 0.1));
    }
}

/// Runs the pipeline of the datum's case.
pub fn run_scenario(cfg: &ScenarioConfig, depth: Depth) -> Result<ScenarioOutcome> {
    let ctx = Context::new(cfg, depth)?;
    let crit = ctx.table.crit;
    let case = match &cfg.model.case {
        Some(label) if label != "auto" => CaseLabel::parse(label)?,
        _ => classify_case(&crit, &ctx.stats),
    };
    let mut stages: Vec<StageOutput> = Vec::new();
    let mut epochs = None;
    let mut items = Vec::new();
    let mean = ctx.stats.mean;
    let p = ctx.params;
    let full = depth == Depth::Full;

    match case {
        CaseLabel::I => {
            let m = if ctx.stats.max < crit.s0_minus {
                ModifiedFlux::build_one_sided(p, 0.5 * (ctx.stats.max + crit.s0_minus), OneSide::Left)
            } else {
                ModifiedFlux::build_one_sided(p, 0.5 * (ctx.stats.min + crit.s0_plus), OneSide::Right)
            }
            .map_err(|e| e.at_stage("surrogate"))?;
            let target = 1e-4;
            let (_, t_hit) = ctx
                .threshold_run(&m, &ctx.u0, 0.0, |u| u.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max) - target)
                .map_err(|e| e.at_stage("stabilization"))?;
            let t_end = cfg.solver.t_end.unwrap_or(1.5 * t_hit.max(1e-3));
            let out =
                ctx.stage("classical", m, &ctx.u0, 0.0, t_end, Some(t_hit), None).map_err(|e| e.at_stage("solve"))?;
            items.push(CheckItem::at_most("stabilization below 1e-4", out.report.diagnostics.final_decay, target));
            if let Some(rate) = out.report.diagnostics.decay_rate {
                items.push(CheckItem::at_least("decay rate vs theta0 C", rate, out.report.diagnostics.rate_bound));
            }
            stages.push(out);
        }
        CaseLabel::II1 | CaseLabel::III => {
            let (r1, r2) = match (cfg.laminate.r1, cfg.laminate.r2) {
                (Some(a), Some(b)) => (a, b),
                _ => default_window(case, &p, &crit, mean)?,
            };
            check_window(case, &p, &crit, mean, r1, r2)?;
            let m = ModifiedFlux::build_two_sided(p, r1, r2).map_err(|e| e.at_stage("surrogate"))?;
            let (lo, hi) = (ctx.table.invert(r1, Side::Minus)?, ctx.table.invert(r2, Side::Plus)?);
            let (_, t1) = if case == CaseLabel::II1 {
                ctx.threshold_run(&m, &ctx.u0, 0.0, |u| max_of(u) - lo + 1e-15)
            } else {
                ctx.threshold_run(&m, &ctx.u0, 0.0, |u| hi - min_of(u) + 1e-15)
            }
            .map_err(|e| e.at_stage("threshold"))?;
            let t_end = ctx.default_t_end(t1).max(t1);
            let out = ctx
                .stage("two-sided", m, &ctx.u0, 0.0, t_end, Some(t1), Some((r1, r2)))
                .map_err(|e| e.at_stage("inclusion"))?;
            let qs = out.report.q.as_ref().unwrap();
            items.push(CheckItem::flag("Q nonempty", qs.count > 0));
            items.push(CheckItem::flag("Q meets t = 0", qs.touches_t0));
            let inside = qs.t_last.map(|t| t <= t1 + 1e-12 * t1.max(1.0)).unwrap_or(true);
            items.push(CheckItem::flag("Q inside (0, T1)", inside && t_end > t1));
            stages.push(out);
        }
        CaseLabel::II2 => {
            let (r1, r2) = match (cfg.laminate.r1, cfg.laminate.r2) {
                (Some(a), Some(b)) => (a, b),
                _ => default_window(case, &p, &crit, mean)?,
            };
            check_window(case, &p, &crit, mean, r1, r2)?;
            let m1 = ModifiedFlux::build_two_sided(p, r1, r2).map_err(|e| e.at_stage("surrogate 1"))?;
            let level = 0.5 * (mean + crit.s0_minus);
            let (_, t1) =
                ctx.threshold_run(&m1, &ctx.u0, 0.0, |u| max_of(u) - level).map_err(|e| e.at_stage("threshold"))?;
            let s1 = ctx
                .stage("stage 1", m1, &ctx.u0, 0.0, t1, Some(t1), Some((r1, r2)))
                .map_err(|e| e.at_stage("stage 1"))?;
            let u1 = s1.field.last().to_vec();
            let m_top = max_of(&u1);
            let m2 = ModifiedFlux::build_one_sided(p, m_top, OneSide::Left).map_err(|e| e.at_stage("surrogate 2"))?;
            let t_end = cfg.solver.t_end.unwrap_or(2.0 * t1).max(t1 + 1e-6);
            let s2 = ctx.stage("stage 2", m2, &u1, t1, t_end, None, None).map_err(|e| e.at_stage("stage 2"))?;
            items.push(CheckItem::flag("stage 1 Q nonempty", s1.report.q.as_ref().unwrap().count > 0));
            items.push(CheckItem::at_most("stage 2 range below s0-", max_of(s2.field.last()), crit.s0_minus));
            stages.push(s1);
            stages.push(s2);
        }
        CaseLabel::IV => {
            let r0 = cfg.epochs.r0.unwrap_or(0.5 * (crit.r_low + crit.r_star));
            let mut plan =
                plan_epochs(&ctx.table, r0, cfg.epochs.count, cfg.epochs.c1, cfg.epochs.c2, cfg.epochs.length)?;
            let (lo, hi) = (ctx.table.invert(r0, Side::Minus)?, ctx.table.invert(r0, Side::Plus)?);
            let (w1, w2) = plan.windows[0];
            let m1 = ModifiedFlux::build_two_sided(p, w1, w2).map_err(|e| e.at_stage("epoch 1 surrogate"))?;
            let (_, t_hit) = ctx
                .threshold_run(&m1, &ctx.u0, 0.0, |u| {
                    u.iter().map(|&x| (lo - x).max(x - hi)).fold(f64::NEG_INFINITY, f64::max) + 1e-15
                })
                .map_err(|e| e.at_stage("entry"))?;
            // the first epoch must have positive length
            plan.set_t1(t_hit.max(plan.length));
            let mut start = ctx.u0.clone();
            let mut t_prev = 0.0;
            for (k, &(a, b)) in plan.windows.iter().enumerate() {
                let name = format!("epoch {}", k + 1);
                let m = if k == 0 { m1.clone() } else { ModifiedFlux::build_two_sided(p, a, b)? };
                let t_k = plan.boundaries[k];
                let out = ctx
                    .stage(&name, m, &start, t_prev, t_k, (k == 0).then_some(t_hit), Some((a, b)))
                    .map_err(|e| e.at_stage("epoch"))?;
                if k > 0 {
                    let qs = out.report.q.as_ref().unwrap();
                    items.push(CheckItem::flag(format!("{name}: Q is the full strip"), qs.full_levels == qs.levels));
                }
                start = out.field.last().to_vec();
                t_prev = t_k;
                stages.push(out);
            }
            epochs = Some(plan);
        }
    }

    for s in &stages {
        stage_items(&mut items, &s.report, full);
    }

    let rho = |s: f64| p.rho(s);
    let segments: Vec<Segment<'_>> = stages
        .iter()
        .map(|s| match (s.laminates.first(), &s.q, &s.walls) {
            (Some(lam), Some(q), Some(w)) => Segment { field: lam, laminate: Some((lam, q, w)) },
            _ => Segment { field: &s.field, laminate: None },
        })
        .collect();
    let two_point = epochs.as_ref().filter(|_| full).map(|e| (e.r0, &ctx.table));
    let verification = weak_form::verify_conclusions(&segments, &rho, mean, two_point, DEFAULT_MODES);
    if full {
        items.extend(verification.items.iter().cloned());
    }
    let pass = items.iter().all(|i| i.pass);

    let report = ScenarioReport {
        case,
        params: p,
        class: p.classify(),
        critical: crit,
        length: ctx.grid.length,
        cells: ctx.grid.cells,
        datum: ctx.stats,
        epochs,
        stages: stages.iter().map(|s| s.report.clone()).collect(),
        verification,
        items,
        pass,
    };
    let mut fields = Vec::new();
    let mut q_regions = Vec::new();
    let mut laminates = Vec::new();
    for (k, s) in stages.into_iter().enumerate() {
        let tag = format!("stage{}", k + 1);
        fields.push((tag.clone(), s.field));
        if let Some(q) = s.q {
            q_regions.push((tag.clone(), q));
        }
        for lam in s.laminates {
            laminates.push((format!("{tag}_seed{}", lam.seed), lam));
        }
    }
    Ok(ScenarioOutcome { report, fields, q_regions, laminates })
}

fn max_of(u: &[f64]) -> f64 {
    u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(u: &[f64]) -> f64 {
    u.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Level stride keeping at most `cap` levels.
fn stride(levels: usize, cap: usize) -> usize {
    levels.div_ceil(cap).max(1)
}

/// Writes `fields/*.csv` and `report.json` under `dir`.
pub fn write_outputs(out: &ScenarioOutcome, cfg: &ScenarioConfig, dir: &Path) -> Result<()> {
    let fields_dir = dir.join("fields");
    fs::create_dir_all(&fields_dir)?;
    for (tag, f) in &out.fields {
        let file = fs::File::create(fields_dir.join(format!("u_star_{tag}.csv")))?;
        f.write_csv(std::io::BufWriter::new(file), 1)?;
    }
    for ((tag, q), (_, f)) in
        out.q_regions.iter().zip(out.fields.iter().filter(|(t, _)| out.q_regions.iter().any(|(qt, _)| qt == t)))
    {
        let file = fs::File::create(fields_dir.join(format!("q_{tag}.csv")))?;
        q.write_csv(f, std::io::BufWriter::new(file))?;
    }
    let sub = cfg.laminate.csv_subcells_per_strip.max(1);
    for (tag, lam) in &out.laminates {
        let a = lam.averaged(lam.strips_per_cell * sub, stride(lam.base.levels(), 200));
        let file = fs::File::create(fields_dir.join(format!("laminate_{tag}.csv")))?;
        a.write_csv(std::io::BufWriter::new(file), 1)?;
    }
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&out.report)?)?;
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldCheck {
    pub file: String,
    pub levels: usize,
    pub cells: usize,
    pub worst_residual: f64,
    pub conservation_error: f64,
    pub pass: bool,
}

/// Re-checks exported density fields against the parameters in `report.json`.
pub fn verify_directory(dir: &Path) -> Result<Vec<FieldCheck>> {
    let report: ScenarioReport = serde_json::from_str(&fs::read_to_string(dir.join("report.json"))?)?;
    let p = report.params;
    let rho = |s: f64| p.rho(s);
    let mut names: Vec<_> = fs::read_dir(dir.join("fields"))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter(|p| !p.file_name().unwrap().to_string_lossy().starts_with("q_"))
        .collect();
    names.sort();
    let mut out = Vec::new();
    for path in names {
        let f = SpaceTimeField::read_csv(std::io::BufReader::new(fs::File::open(&path)?), report.length)?;
        let cat = weak_form::residual_catalog(&f, &rho, DEFAULT_MODES);
        let target = report.length * report.datum.mean;
        let cons = (0..f.levels()).map(|n| (f.mass(n) - target).abs()).fold(0.0, f64::max);
        out.push(FieldCheck {
            file: path.file_name().unwrap().to_string_lossy().into_owned(),
            levels: f.levels(),
            cells: f.grid.cells,
            worst_residual: cat.worst,
            conservation_error: cons,
            pass: cons <= 1e-9 * report.length,
        });
    }
    Ok(out)
}

/// Parameter grid for `sweep`: the product of `alpha` and `beta`, each point
/// classified; with `config`, every forward-backward-forward point also runs
/// that scenario with its parameters replaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub config: Option<std::path::PathBuf>,
    #[serde(default = "classical_depth")]
    pub full: bool,
}

fn classical_depth() -> bool {
    false
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub class: RegimeClass,
    pub case: Option<CaseLabel>,
    pub pass: Option<bool>,
    pub error: Option<String>,
}

impl SweepGrid {
    pub fn load(path: &Path) -> Result<Self> {
        let mut g: Self = toml::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Config(e.to_string()))?;
        if let (Some(c), Some(dir)) = (&g.config, path.parent()) {
            if c.is_relative() {
                g.config = Some(dir.join(c));
            }
        }
        Ok(g)
    }

    pub fn run(&self) -> Result<Vec<SweepRow>> {
        let base = self.config.as_deref().map(ScenarioConfig::load).transpose()?;
        let depth = if self.full { Depth::Full } else { Depth::Classical };
        let mut rows = Vec::new();
        for &alpha in &self.alpha {
            for &beta in &self.beta {
                let p = FluxParams::new(alpha, beta)?;
                let class = p.classify();
                let mut row = SweepRow { alpha, beta, class, case: None, pass: None, error: None };
                if let (Some(cfg), RegimeClass::FDBDF) = (&base, class) {
                    let mut cfg = cfg.clone();
                    cfg.model.alpha = alpha;
                    cfg.model.beta = beta;
                    match run_scenario(&cfg, depth) {
                        Ok(o) => {
                            row.case = Some(o.report.case);
                            row.pass = Some(o.report.pass);
                        }
                        Err(e) => row.error = Some(e.to_string()),
                    }
                }
                rows.push(row);
            }
        }
        Ok(rows)
    }
}

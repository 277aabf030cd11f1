//! One line per acceptance criterion, `PASS` or `FAIL`, followed by the numbers
//! behind it.

mod common;

use std::f64::consts::PI;

use adhesion_core::modified_flux::DOMAIN;
use adhesion_core::scenario::{run_scenario, CaseLabel, Depth};
use adhesion_core::weak_form::residual_catalog;
use adhesion_core::{
    run_until_condition, BranchTable, FluxParams, ModelType, ModifiedFlux, RegimeClass, Side, SolverDiagnostics,
};
use rand::{rngs::StdRng, RngExt, SeedableRng};

use common::*;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn classification() -> Outcome {
    let mut rng = StdRng::seed_from_u64(20_240_611);
    let mut mismatches = Vec::new();
    for _ in 0..10_000 {
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        let got = FluxParams::new(a, b).unwrap().classify();
        let want = sign_word(a, b, 10_000);
        if got.as_str() != want {
            mismatches.push((a, b, got, want));
        }
    }
    let anchors = [
        (0.0, 0.5, RegimeClass::F),
        (0.75, 1.0, RegimeClass::FDF),
        (0.5, 2.0 / 3.0, RegimeClass::FD),
        (0.6, 0.6, RegimeClass::FDB),
        (0.7, 4.0 / 3.0 - 1.0 / 2.1, RegimeClass::FDBD),
        (0.9, 1.0, RegimeClass::FDBDF),
    ];
    let mut bad_anchor = Vec::new();
    for (a, b, want) in anchors {
        let got = FluxParams::new(a, b).unwrap().classify();
        if got != want || sign_word(a, b, 100_000) != want.as_str() {
            bad_anchor.push((a, b, got));
        }
    }
    outcome(
        mismatches.is_empty() && bad_anchor.is_empty(),
        format!("10000 random points, {} mismatches; anchors off: {:?}", mismatches.len(), bad_anchor),
    )
}

fn critical_data() -> Outcome {
    let p = params();
    let c = p.critical_points().unwrap();
    let (a, b) = (0.9f64, 1.0f64);
    let q = (4.0 * a * a - 3.0 * a * b).sqrt();
    let (lo, hi) = ((2.0 * a - q) / (3.0 * a * b), (2.0 * a + q) / (3.0 * a * b));
    let rho = |s: f64| a * b * s * s * s - 2.0 * a * s * s + s;
    let sig = (p.sigma(c.s0_minus).abs()).max(p.sigma(c.s0_plus).abs());
    let rho_lo = rho(lo);
    let pass = sig <= 1e-12
        && (c.s0_minus - lo).abs() < 1e-12
        && (c.s0_plus - hi).abs() < 1e-12
        && c.r_star == p.rho(1.0)
        && (c.r_star - 0.1).abs() <= 1e-15
        && c.model_type == ModelType::TypeII
        && (rho_lo - 0.16962).abs() < 5e-6
        && rho_lo > rho(1.0);
    outcome(
        pass,
        format!(
            "s0- = {:.5}, s0+ = {:.5}, |sigma| <= {sig:.1e}, r* = {}, rho(s0-) = {rho_lo:.5}, {:?}",
            c.s0_minus, c.s0_plus, c.r_star, c.model_type
        ),
    )
}

fn branch_round_trip() -> Outcome {
    let t = BranchTable::new(params()).unwrap();
    let (lo, hi) = t.domain();
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    for side in [Side::Minus, Side::Plus] {
        let mut prev = f64::NEG_INFINITY;
        for k in 0..256 {
            let r = lo + (hi - lo) * k as f64 / 255.0;
            let s = t.invert(r, side).unwrap();
            worst = worst.max((t.params.rho(s) - r).abs());
            // rho increases on both outer branches
            monotone &= s > prev;
            let c = &t.crit;
            monotone &= if side == Side::Minus { s <= c.s0_minus } else { s >= c.s0_plus };
            prev = s;
        }
    }
    outcome(worst <= 1e-10 && monotone, format!("worst |rho(s(r)) - r| = {worst:.1e}, monotone = {monotone}"))
}

fn modified_flux() -> Outcome {
    let p = params();
    let mut lines = Vec::new();
    let mut pass = true;
    for (r1, r2) in [(0.098, 0.0995), (0.0975, 0.0999)] {
        let m = ModifiedFlux::build_two_sided(p, r1, r2).unwrap();
        let (a, b) = m.window;
        let mut identity: f64 = 0.0;
        for k in 0..=20_000 {
            let s = DOMAIN.0 + (DOMAIN.1 - DOMAIN.0) * k as f64 / 20_000.0;
            if s <= a || s >= b {
                identity = identity.max((m.rho(s) - p.rho(s)).abs());
            }
        }
        let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..100_000 {
            let s = DOMAIN.0 + (DOMAIN.1 - DOMAIN.0) * (k as f64 + 0.5) / 100_000.0;
            let d = m.sigma(s);
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        let ((l0, l1), (u0, u1)) = m.ordering_intervals().unwrap();
        let below = (1..=4096).all(|j| m.excess(l0 + (l1 - l0) * j as f64 / 4096.0) < 0.0);
        let above = (0..4096).all(|j| m.excess(u0 + (u1 - u0) * j as f64 / 4096.0) > 0.0);
        let ok = identity <= 1e-14 && m.theta0 > 0.0 && dmin >= m.theta0 && dmax <= m.theta1 && below && above;
        pass &= ok;
        lines.push(format!(
            "({r1}, {r2}): identity {identity:.1e}, sigma* in [{dmin:.4}, {dmax:.4}] within [{:.4}, {:.4}], ordering {}",
            m.theta0,
            m.theta1,
            below && above
        ));
    }
    outcome(pass, lines.join("; "))
}

fn solver_invariants() -> Outcome {
    let cfg = case_i_config(100);
    let o = run_scenario(&cfg, Depth::Classical).unwrap();
    let d = &o.report.stages[0].diagnostics;
    let grid = cfg.grid().unwrap();
    let u0 = cfg.model.initial.sample(&grid).unwrap();
    let m = &o.report.stages[0].surrogate;
    let mean = u0.iter().sum::<f64>() / u0.len() as f64;
    let hit = run_until_condition(
        m,
        grid,
        &u0,
        0.0,
        cfg.solver.options(),
        |u| u.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max) - 1e-4,
        None,
    );
    let t_hit = hit.as_ref().map(|r| r.1).ok();

    let fields: Vec<_> = [16, 32, 64, 128].iter().map(|&n| case_i_run(n)).collect();
    let err = |a: &[f64], b: &[f64]| {
        a.iter().enumerate().map(|(i, x)| (x - 0.5 * (b[2 * i] + b[2 * i + 1])).abs()).fold(0.0, f64::max)
    };
    let ratios: Vec<f64> = (0..2)
        .map(|k| err(fields[k].last(), fields[k + 1].last()) / err(fields[k + 1].last(), fields[k + 2].last()))
        .collect();
    let mut drift: f64 = d.mass_drift;
    let mut maxp: f64 = d.max_principle_violation;
    for f in &fields {
        let dg = SolverDiagnostics::from_field(f, &case_i_flux());
        drift = drift.max(dg.mass_drift());
        maxp = maxp.max(dg.max_principle_violation());
    }
    let pass = drift <= 1e-10 && maxp <= 1e-12 && t_hit.is_some() && ratios.iter().all(|r| (3.5..=4.5).contains(r));
    outcome(
        pass,
        format!("mass drift {drift:.1e}, max principle {maxp:.1e}, below 1e-4 at t = {t_hit:?}, refinement ratios {ratios:.3?}"),
    )
}

fn laminate_contract() -> Outcome {
    let s = two_wall_setup();
    let mut sup = Vec::new();
    let mut wx = Vec::new();
    let mut pass = !s.q.is_empty();
    for strips in [2, 4, 8, 16] {
        let lam = s.laminate(strips, 1);
        let eps = 5.0 * lam.delta * s.walls.d0;
        let osc = adhesion_core::laminate::oscillation(&lam, &s.q, &s.walls);
        pass &= lam.defects.exterior_dev == 0.0 && lam.defects.sup_dev <= eps && osc.pass;
        sup.push(lam.defects.sup_dev);
        wx.push(lam.defects.wx_mismatch);
    }
    let factors = |v: &[f64]| v.windows(2).map(|w| w[0] / w[1]).collect::<Vec<_>>();
    let (fs, fw) = (factors(&sup), factors(&wx));
    pass &= fs.iter().chain(&fw).all(|&f| f >= 1.5);
    outcome(
        pass,
        format!(
            "sup_dev factors {fs:.3?}, wx_mismatch factors {fw:.3?}, exterior exact, eps and oscillation floor met"
        ),
    )
}

fn weak_residuals() -> Outcome {
    let p = params();
    let rho = |s: f64| p.rho(s);
    // classical case (i): rho* = rho on the range of the run
    let worst: Vec<f64> = [16, 32, 64, 128].iter().map(|&n| residual_catalog(&case_i_run(n), &rho, 8).worst).collect();
    let orders: Vec<f64> = worst.windows(2).map(|w| (w[0] / w[1]).log2()).collect();

    let s = two_wall_setup();
    let m = &s.sub.flux;
    let base = residual_catalog(&s.sub.u_star, &|x| m.rho(x), 8);
    let excess: Vec<f64> =
        [2, 4, 8, 16].iter().map(|&k| residual_catalog(&s.laminate(k, 1), &rho, 8).worst_difference(&base)).collect();
    let lam_factors: Vec<f64> = excess.windows(2).map(|w| w[0] / w[1]).collect();

    let clean = case_i_run(64);
    let baseline = residual_catalog(&clean, &rho, 8).worst;
    let mut bad = clean.clone();
    let g = bad.grid;
    for row in bad.values.iter_mut().skip(1) {
        for (i, u) in row.iter_mut().enumerate() {
            *u += 0.01 * (2.0 * PI * g.center(i)).cos();
        }
    }
    let corrupted = residual_catalog(&bad, &rho, 8).worst;
    let pass = orders.iter().all(|&o| o >= 1.8)
        && lam_factors.iter().all(|f| (1.5..=2.5).contains(f))
        && corrupted >= 10.0 * baseline;
    outcome(
        pass,
        format!(
            "classical orders {orders:.3?}; laminate factors {lam_factors:.3?}; corrupted/baseline {:.1}",
            corrupted / baseline
        ),
    )
}

fn scenario_conclusions() -> Outcome {
    let o = run_scenario(&case_ii1_config(), Depth::Full).unwrap();
    let r = &o.report;
    let st = &r.stages[0];
    let q = &o.q_regions[0].1;
    let mass_target = r.length * r.datum.mean;
    let mass_err = o
        .laminates
        .iter()
        .flat_map(|(_, l)| (0..l.base.levels()).map(move |n| (l.mass(n) - mass_target).abs()))
        .fold(0.0, f64::max);
    let bands = st.laminates.iter().all(|l| l.defects.band_violation_measure == 0.0);
    let distinct = st.distinct.iter().map(|d| d.fraction).fold(1.0, f64::min);
    let t1 = st.t_hit.unwrap();
    let inside = q.components.iter().all(|c| c.t_range.1 <= t1 * (1.0 + 1e-12));
    let ii1 = r.case == CaseLabel::II1
        && !q.is_empty()
        && q.bounded_before_end()
        && inside
        && q.touches_t0
        && bands
        && mass_err <= 1e-9
        && st.distinct.len() == 3
        && distinct >= 0.1;

    let o4 = run_scenario(&case_iv_config(), Depth::Full).unwrap();
    let r4 = &o4.report;
    let strips = r4.stages.iter().skip(1).all(|s| {
        let q = s.q.as_ref().unwrap();
        q.full_levels == q.levels && !s.laminates.is_empty() && s.laminates.iter().all(|l| l.oscillation.pass)
    });
    let trace = &r4.verification.two_point_distance_trace;
    let decreasing = trace.len() == 4 && trace.windows(2).all(|w| w[1] < w[0]);
    let iv = r4.case == CaseLabel::IV && strips && decreasing;
    outcome(
        ii1 && iv,
        format!(
            "(ii-1): |Q| = {:.4}, meets t=0 {}, inside (0, T1) {inside}, mass error {mass_err:.1e}, min pairwise difference {distinct:.3}; (iv): full strips {strips}, trace {trace:.5?}",
            q.measure, q.touches_t0
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 8] = [
        ("classification oracle equivalence", classification),
        ("critical data", critical_data),
        ("branch round-trip", branch_round_trip),
        ("modified flux", modified_flux),
        ("solver invariants", solver_invariants),
        ("laminate contract", laminate_contract),
        ("weak-form residuals", weak_residuals),
        ("scenario conclusions", scenario_conclusions),
    ];
    let mut results = Vec::new();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        println!("criterion {} {}: {} ({})", k + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push(o.pass);
    }
    // exact weak solutions, the infinite epoch limit and delta -> 0 cannot be
    // computed; they stand on the refinement trends of criteria 6 to 8
    let trends = results[5] && results[6] && results[7];
    println!(
        "criterion 9 limits beyond a finite computation: {} (not reproducible directly; covered by the refinement trends of criteria 6-8)",
        if trends { "PASS" } else { "FAIL" }
    );
    results.push(trends);
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, &p)| !p).map(|(k, _)| k + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#![allow(dead_code)]

use std::f64::consts::PI;

use adhesion_core::laminate::{self, LaminateSolution};
use adhesion_core::{
    build_subsolution, compute_q, solve, BranchTable, DtPolicy, FluxParams, Grid, ModifiedFlux, OneSide, QRegion,
    ScenarioConfig, SolverOptions, SpaceTimeField, SubsolutionFields, Walls,
};

/// Sign word of `sigma = 3ab s^2 - 4a s + 1` on `[0, 1]` from dense sampling
/// plus the closed-form roots: `F` positive, `B` negative, `D` zero.
pub fn sign_word(alpha: f64, beta: f64, samples: usize) -> String {
    let sigma = |s: f64| 3.0 * alpha * beta * s * s - 4.0 * alpha * s + 1.0;
    let mut pts: Vec<f64> = (0..=samples).map(|k| k as f64 / samples as f64).collect();
    if alpha * beta > 0.0 {
        let disc = 16.0 * alpha * alpha - 12.0 * alpha * beta;
        let roots: Vec<f64> = if disc.abs() <= 1e-12 * 16.0 * alpha * alpha {
            vec![2.0 / (3.0 * beta)]
        } else if disc > 0.0 {
            let q = disc.sqrt();
            vec![(4.0 * alpha - q) / (6.0 * alpha * beta), (4.0 * alpha + q) / (6.0 * alpha * beta)]
        } else {
            vec![]
        };
        pts.extend(roots.into_iter().filter(|r| (0.0..=1.0).contains(r)));
    } else if alpha > 0.0 {
        pts.push(1.0 / (4.0 * alpha));
    }
    pts.retain(|s| (0.0..=1.0).contains(s));
    pts.sort_by(f64::total_cmp);
    let scale = 1.0 + 4.0 * alpha;
    let mut word = String::new();
    for s in pts {
        let v = sigma(s);
        let c = if v.abs() <= 1e-12 * scale {
            'D'
        } else if v > 0.0 {
            'F'
        } else {
            'B'
        };
        let last = word.chars().last();
        if last == Some(c) {
            continue;
        }
        // a sign change without a sampled zero still crosses one
        if matches!((last, c), (Some('F'), 'B') | (Some('B'), 'F')) {
            word.push('D');
        }
        word.push(c);
    }
    word
}

pub fn params() -> FluxParams {
    FluxParams::new(0.9, 1.0).unwrap()
}

pub fn case_i_config(cells: usize) -> ScenarioConfig {
    ScenarioConfig::from_toml(&format!(
        r#"
        [model]
        alpha = 0.9
        beta = 1.0
        initial = {{ kind = "cosine", mean = 0.2, amplitude = 0.1 }}
        [grid]
        cells = {cells}
        "#
    ))
    .unwrap()
}

/// Mean 0.11, peak 0.45.
pub fn case_ii1_config() -> ScenarioConfig {
    ScenarioConfig::from_toml(
        r#"
        [model]
        alpha = 0.9
        beta = 1.0
        initial = { kind = "bump", base = 0.0269, amplitude = 0.4231, power = 8 }
        [laminate]
        r1 = 0.098
        r2 = 0.0995
        seeds = [1, 2, 3]
        "#,
    )
    .unwrap()
}

pub fn case_iv_config() -> ScenarioConfig {
    ScenarioConfig::from_toml(
        r#"
        [model]
        alpha = 0.9
        beta = 1.0
        initial = { kind = "cosine", mean = 0.6, amplitude = 0.2 }
        [grid]
        cells = 100
        [laminate]
        seeds = [1, 2]
        [epochs]
        r0 = 0.0985
        count = 4
        "#,
    )
    .unwrap()
}

/// Case (i) surrogate used for refinement studies.
pub fn case_i_flux() -> ModifiedFlux {
    let p = params();
    let c = p.critical_points().unwrap();
    ModifiedFlux::build_one_sided(p, 0.5 * (0.25 + c.s0_minus), OneSide::Left).unwrap()
}

/// `0.2 + 0.05 cos(pi x)` to `t = 0.1` with `dt = h^2 / 4`.
pub fn case_i_run(cells: usize) -> SpaceTimeField {
    let g = Grid::new(1.0, cells).unwrap();
    let u0 = g.sample(|x| 0.2 + 0.05 * (PI * x).cos());
    let dt = 0.25 * g.h() * g.h();
    let opts = SolverOptions { policy: DtPolicy::Fixed { dt }, ..Default::default() };
    solve(&case_i_flux(), g, &u0, 0.0, 0.1, opts).unwrap().0
}

/// Classical (ii-1) reference run with its subsolution, walls and `Q`.
pub struct TwoWallSetup {
    pub sub: SubsolutionFields,
    pub walls: Walls,
    pub q: QRegion,
}

pub fn two_wall_setup() -> TwoWallSetup {
    let cfg = case_ii1_config();
    let p = params();
    let m = ModifiedFlux::build_two_sided(p, 0.098, 0.0995).unwrap();
    let g = cfg.grid().unwrap();
    let u0 = cfg.model.initial.sample(&g).unwrap();
    let (f, _) = solve(&m, g, &u0, 0.0, 0.2, cfg.solver.options()).unwrap();
    let sub = build_subsolution(&f, &m).unwrap();
    let walls = Walls::new(BranchTable::new(p).unwrap(), 0.098, 0.0995).unwrap();
    let q = compute_q(&sub, &walls);
    TwoWallSetup { sub, walls, q }
}

impl TwoWallSetup {
    pub fn laminate(&self, strips_per_cell: usize, seed: u64) -> LaminateSolution {
        let delta = self.sub.u_star.grid.h() / strips_per_cell as f64;
        laminate::construct(&self.sub, &self.walls, &self.q, delta, 5.0 * delta * self.walls.d0, seed).unwrap()
    }
}

//! Conservative finite-volume solver for `u_t = (rho*(u))_xx` with zero flux
//! at both ends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, SpaceTimeField};
use crate::modified_flux::ModifiedFlux;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DtPolicy {
    Fixed {
        dt: f64,
    },
    /// `dt_n = min(dt0 * growth^n, dt_max)`.
    Geometric {
        dt0: f64,
        growth: f64,
        dt_max: f64,
    },
}

impl DtPolicy {
    fn dt(&self, step: usize) -> f64 {
        match *self {
            DtPolicy::Fixed { dt } => dt,
            DtPolicy::Geometric { dt0, growth, dt_max } => (dt0 * growth.powi(step.min(100_000) as i32)).min(dt_max),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DtPolicy::Fixed { dt } => dt > 0.0,
            DtPolicy::Geometric { dt0, growth, dt_max } => dt0 > 0.0 && growth >= 1.0 && dt_max >= dt0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("bad time step policy {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stepping {
    Implicit,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub policy: DtPolicy,
    pub stepping: Stepping,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            policy: DtPolicy::Geometric { dt0: 1e-4, growth: 1.05, dt_max: 0.05 },
            stepping: Stepping::Implicit,
            newton_tol: 1e-14,
            max_newton: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub mean0: f64,
    pub mass_trace: Vec<f64>,
    pub min_trace: Vec<f64>,
    pub max_trace: Vec<f64>,
    pub decay_trace: Vec<f64>,
    /// Smallest `sigma*` over the observed range of densities.
    pub s_lower: f64,
    /// Discrete Neumann Poincare constant `(4/h^2) sin^2(pi h / 2L)`.
    pub poincare: f64,
    /// Exponential rate fitted to the decay trace over the final half of the run.
    pub decay_rate: Option<f64>,
    pub theta0: f64,
}

impl SolverDiagnostics {
    pub fn from_field(f: &SpaceTimeField, m: &ModifiedFlux) -> Self {
        let h = f.grid.h();
        let mean0 = f.mass(0) / f.grid.length;
        let mut mass_trace = Vec::with_capacity(f.levels());
        let mut min_trace = Vec::with_capacity(f.levels());
        let mut max_trace = Vec::with_capacity(f.levels());
        let mut decay_trace = Vec::with_capacity(f.levels());
        for n in 0..f.levels() {
            let u = f.slice(n);
            mass_trace.push(f.mass(n));
            let (lo, hi) = min_max(u);
            min_trace.push(lo);
            max_trace.push(hi);
            decay_trace.push(u.iter().map(|&x| (x - mean0).abs()).fold(0.0, f64::max));
        }
        let lo = min_trace.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = max_trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s_lower = (0..=256).map(|k| m.sigma(lo + (hi - lo) * k as f64 / 256.0)).fold(f64::INFINITY, f64::min);
        let s = (std::f64::consts::PI * h / (2.0 * f.grid.length)).sin();
        Self {
            mean0,
            decay_rate: fit_rate(&f.times, &decay_trace),
            mass_trace,
            min_trace,
            max_trace,
            decay_trace,
            s_lower,
            poincare: 4.0 * s * s / (h * h),
            theta0: m.theta0,
        }
    }

    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass_trace[0];
        self.mass_trace.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max)
    }

    /// Largest excursion of a later slice outside the range of an earlier one.
    pub fn max_principle_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut run_min = f64::INFINITY;
        let mut run_max = f64::NEG_INFINITY;
        // The range only shrinks, so checking against the running bounds of
        // all earlier slices is the same as checking every pair.
        for (lo, hi) in self.min_trace.iter().zip(&self.max_trace) {
            if run_min.is_finite() {
                worst = worst.max(run_min - lo).max(hi - run_max);
            }
            run_min = run_min.min(*lo);
            run_max = run_max.max(*hi);
        }
        worst
    }

    /// Rate any solution must at least decay with, `theta0 * C`.
    pub fn rate_bound(&self) -> f64 {
        self.theta0 * self.poincare
    }
}

fn min_max(u: &[f64]) -> (f64, f64) {
    u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// Least-squares slope of `-log(d)` against `t` on the last half of the run,
/// ignoring values already at round-off level.
fn fit_rate(times: &[f64], d: &[f64]) -> Option<f64> {
    let t_end = *times.last()?;
    let t_half = times[0] + 0.5 * (t_end - times[0]);
    let pts: Vec<(f64, f64)> =
        times.iter().zip(d).filter(|(t, v)| **t >= t_half && **v > 1e-11).map(|(t, v)| (*t, v.ln())).collect();
    if pts.len() < 4 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

/// Discrete compatibility `u0'(0) = u0'(L) = 0`: the boundary difference may
/// not exceed what the local curvature explains.
pub fn check_compatibility(u0: &[f64], h: f64) -> Result<()> {
    let n = u0.len();
    if n < 3 {
        return Err(Error::Compatibility("fewer than three cells".into()));
    }
    let ends = [
        ("left", u0[1] - u0[0], u0[2] - 2.0 * u0[1] + u0[0]),
        ("right", u0[n - 1] - u0[n - 2], u0[n - 1] - 2.0 * u0[n - 2] + u0[n - 3]),
    ];
    for (side, diff, curv) in ends {
        let tol = 1e-8 * h + 2.0 * curv.abs();
        if diff.abs() > tol {
            return Err(Error::Compatibility(format!("{side} boundary difference {diff:e} exceeds {tol:e}")));
        }
    }
    Ok(())
}

/// Discrete operator `(A r)_i = (r_{i+1} - 2 r_i + r_{i-1}) / h^2` with zero
/// boundary flux, written as a difference of face fluxes.
fn apply_laplacian(r: &[f64], h2: f64, out: &mut [f64]) {
    let n = r.len();
    let mut left = 0.0;
    for i in 0..n {
        let right = if i + 1 < n { r[i + 1] - r[i] } else { 0.0 };
        out[i] = (right - left) / h2;
        left = right;
    }
}

/// Thomas algorithm; `a` sub-, `b` main, `c` super-diagonal. Overwrites `d`.
fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], scratch: &mut [f64]) {
    let n = b.len();
    scratch[0] = c[0] / b[0];
    d[0] /= b[0];
    for i in 1..n {
        let m = b[i] - a[i] * scratch[i - 1];
        scratch[i] = if i + 1 < n { c[i] / m } else { 0.0 };
        d[i] = (d[i] - a[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= scratch[i] * d[i + 1];
    }
}

struct Stepper<'a> {
    m: &'a ModifiedFlux,
    h2: f64,
    opts: SolverOptions,
    rho: Vec<f64>,
    lap: Vec<f64>,
    res: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(m: &'a ModifiedFlux, grid: &Grid, opts: SolverOptions) -> Self {
        let n = grid.cells;
        Self {
            m,
            h2: grid.h() * grid.h(),
            opts,
            rho: vec![0.0; n],
            lap: vec![0.0; n],
            res: vec![0.0; n],
            a: vec![0.0; n],
            b: vec![0.0; n],
            c: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    fn residual(&mut self, u: &[f64], prev: &[f64], dt: f64) -> f64 {
        for (r, &x) in self.rho.iter_mut().zip(u) {
            *r = self.m.rho(x);
        }
        apply_laplacian(&self.rho, self.h2, &mut self.lap);
        let mut worst: f64 = 0.0;
        for i in 0..u.len() {
            self.res[i] = u[i] - prev[i] - dt * self.lap[i];
            worst = worst.max(self.res[i].abs());
        }
        worst
    }

    fn step(&mut self, prev: &[f64], dt: f64, step: usize) -> Result<Vec<f64>> {
        match self.opts.stepping {
            Stepping::Explicit => {
                let limit = 0.4 * self.h2 / self.m.theta1;
                if dt > limit {
                    return Err(Error::Cfl { dt, required: limit });
                }
                for (r, &x) in self.rho.iter_mut().zip(prev) {
                    *r = self.m.rho(x);
                }
                apply_laplacian(&self.rho, self.h2, &mut self.lap);
                let u: Vec<f64> = prev.iter().zip(&self.lap).map(|(p, l)| p + dt * l).collect();
                if u.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite { step });
                }
                Ok(u)
            }
            Stepping::Implicit => self.newton(prev, dt, step),
        }
    }

    fn newton(&mut self, prev: &[f64], dt: f64, step: usize) -> Result<Vec<f64>> {
        let n = prev.len();
        let scale = 1.0 + prev.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        // the flux differences carry round-off of size dt/h^2 * |rho*|
        let flux_scale = dt / self.h2 * prev.iter().fold(0.0f64, |a, &x| a.max(self.m.rho(x).abs()));
        let tol = self.opts.newton_tol * (scale + flux_scale);
        let mut u = prev.to_vec();
        let mut norm = self.residual(&u, prev, dt);
        let mut trial = vec![0.0; n];
        for _ in 0..self.opts.max_newton {
            if norm <= tol {
                return Ok(u);
            }
            let k = dt / self.h2;
            for i in 0..n {
                let s = self.m.sigma(u[i]);
                let neighbours = (i > 0) as u8 + (i + 1 < n) as u8;
                self.b[i] = 1.0 + k * neighbours as f64 * s;
                if i > 0 {
                    self.c[i - 1] = -k * s;
                }
                if i + 1 < n {
                    self.a[i + 1] = -k * s;
                }
            }
            let mut delta: Vec<f64> = self.res.iter().map(|r| -r).collect();
            solve_tridiagonal(&self.a, &self.b, &self.c, &mut delta, &mut self.scratch);
            if delta.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { step });
            }
            let update = delta.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let mut lambda = 1.0;
            loop {
                for i in 0..n {
                    trial[i] = u[i] + lambda * delta[i];
                }
                let r = self.residual(&trial, prev, dt);
                if r < norm || lambda < 1e-4 || update * lambda <= 1e-15 * scale {
                    std::mem::swap(&mut u, &mut trial);
                    norm = r;
                    break;
                }
                lambda *= 0.5;
            }
            if update <= 1e-15 * scale {
                // at round-off; the residual cannot improve further
                norm = self.residual(&u, prev, dt);
                if norm <= 1e3 * tol {
                    return Ok(u);
                }
            }
        }
        if norm <= tol {
            return Ok(u);
        }
        Err(Error::Newton { step, residual: norm })
    }
}

fn validate_start(m: &ModifiedFlux, grid: &Grid, u0: &[f64]) -> Result<()> {
    if u0.len() != grid.cells {
        return Err(Error::GridMismatch(format!("{} values for {} cells", u0.len(), grid.cells)));
    }
    if let Some(x) = u0.iter().find(|x| !(-1e-12..=1.0 + 1e-12).contains(*x)) {
        return Err(Error::InvalidParams(format!("initial value {x} outside [0, 1]")));
    }
    if !(m.theta0 > 0.0) {
        return Err(Error::InvalidParams("surrogate flux is not uniformly increasing".into()));
    }
    check_compatibility(u0, grid.h())
}

/// Evolve `u0` from `t0` to `t_end`, storing every step.
pub fn solve(
    m: &ModifiedFlux,
    grid: Grid,
    u0: &[f64],
    t0: f64,
    t_end: f64,
    opts: SolverOptions,
) -> Result<(SpaceTimeField, SolverDiagnostics)> {
    validate_start(m, &grid, u0)?;
    opts.policy.validate()?;
    let mut field = SpaceTimeField::new(grid, t0, u0.to_vec())?;
    let mut stepper = Stepper::new(m, &grid, opts);
    let mut t = t0;
    let mut step = 0;
    while t < t_end - 1e-12 * t_end.abs().max(1.0) {
        let dt = opts.policy.dt(step).min(t_end - t);
        let u = stepper.step(field.last(), dt, step)?;
        step += 1;
        t = if t + dt >= t_end - 1e-12 * t_end.abs().max(1.0) { t_end } else { t + dt };
        field.push(t, u);
    }
    let diag = SolverDiagnostics::from_field(&field, m);
    Ok((field, diag))
}

/// Evolve until `violation(slice) <= 0`. Returns the field up to and including
/// the first satisfying level and its time.
pub fn run_until_condition(
    m: &ModifiedFlux,
    grid: Grid,
    u0: &[f64],
    t0: f64,
    opts: SolverOptions,
    mut violation: impl FnMut(&[f64]) -> f64,
    t_max: Option<f64>,
) -> Result<(SpaceTimeField, f64)> {
    validate_start(m, &grid, u0)?;
    opts.policy.validate()?;
    let t_max = t_max.unwrap_or(t0 + 50.0 * grid.length * grid.length / m.theta0);
    let mut field = SpaceTimeField::new(grid, t0, u0.to_vec())?;
    let mut closest = violation(u0);
    if closest <= 0.0 {
        return Ok((field, t0));
    }
    let mut stepper = Stepper::new(m, &grid, opts);
    let mut t = t0;
    let mut step = 0;
    while t < t_max {
        let dt = opts.policy.dt(step);
        let u = stepper.step(field.last(), dt, step)?;
        step += 1;
        t += dt;
        let v = violation(&u);
        field.push(t, u);
        if v <= 0.0 {
            return Ok((field, t));
        }
        closest = closest.min(v);
    }
    Err(Error::Timeout { t_max, closest })
}

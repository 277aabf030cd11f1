//! Strict subsolution `z* = (v*, w*)` built from a regularized run, the mixing
//! region `Q` and the two-wall membership checks.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::branch::{BranchTable, Side};
use crate::error::{Error, Result};
use crate::grid::SpaceTimeField;
use crate::modified_flux::ModifiedFlux;

/// Two walls `K-` and `K+` parameterized by flux level `r` in `[r1, r2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Walls {
    pub r1: f64,
    pub r2: f64,
    pub table: BranchTable,
    /// `s+(r1) - s-(r2)`.
    pub d0: f64,
}

impl Walls {
    pub fn new(table: BranchTable, r1: f64, r2: f64) -> Result<Self> {
        if !(r1 < r2) {
            return Err(Error::InvalidParams(format!("need r1 < r2, got {r1}, {r2}")));
        }
        let d0 = table.plus(r1)? - table.minus(r2)?;
        Ok(Self { r1, r2, table, d0 })
    }

    /// `omega_1(r) = s-(r)`.
    pub fn omega1(&self, r: f64) -> f64 {
        self.table.invert_unchecked(r, Side::Minus)
    }

    /// `omega_2(r) = s+(r)`.
    pub fn omega2(&self, r: f64) -> f64 {
        self.table.invert_unchecked(r, Side::Plus)
    }

    /// Density interval defining `Q`.
    pub fn q_bounds(&self) -> (f64, f64) {
        (self.omega1(self.r1), self.omega2(self.r2))
    }

    /// The two bands `[s-(r1), s-(r2)]` and `[s+(r1), s+(r2)]`.
    pub fn bands(&self) -> ((f64, f64), (f64, f64)) {
        ((self.omega1(self.r1), self.omega1(self.r2)), (self.omega2(self.r1), self.omega2(self.r2)))
    }

    pub fn in_bands(&self, u: f64) -> bool {
        let ((a, b), (c, d)) = self.bands();
        (a..=b).contains(&u) || (c..=d).contains(&u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsolutionFields {
    pub u_star: SpaceTimeField,
    /// `v*` at the `N+1` faces of each level.
    pub v_star: Vec<Vec<f64>>,
    /// `w*` at cell centers of each level.
    pub w_star: Vec<Vec<f64>>,
    /// `w*_t = rho*(u*)` on each level (level 0 uses the initial slice).
    pub w_t: Vec<Vec<f64>>,
    pub flux: ModifiedFlux,
    pub t1: f64,
}

impl SubsolutionFields {
    /// `v*_x` on cell `i` of level `n`, i.e. the stored density.
    #[inline]
    pub fn v_x(&self, n: usize, i: usize) -> f64 {
        self.u_star.values[n][i]
    }

    /// Largest `|(w*_{i+1} - w*_i)/h - v*(face_{i+1})|` over all levels.
    pub fn wx_residual(&self) -> f64 {
        let h = self.u_star.grid.h();
        let mut worst: f64 = 0.0;
        for (w, v) in self.w_star.iter().zip(&self.v_star) {
            for i in 0..w.len() - 1 {
                let r = ((w[i + 1] - w[i]) / h - v[i + 1]).abs() / (1.0 + v[i + 1].abs());
                worst = worst.max(r);
            }
        }
        worst
    }

    /// Largest `|(w*^n - w*^{n-1})/dt - rho*(v*_x)|`.
    pub fn wt_residual(&self) -> f64 {
        let t = &self.u_star.times;
        let mut worst: f64 = 0.0;
        for n in 1..t.len() {
            let dt = t[n] - t[n - 1];
            for i in 0..self.w_star[n].len() {
                let d = (self.w_star[n][i] - self.w_star[n - 1][i]) / dt;
                worst = worst.max((d - self.flux.rho(self.v_x(n, i))).abs());
            }
        }
        worst
    }
}

/// `v*` is the running integral of `u*` from `x = 0`. `w*` starts from an
/// antiderivative of the initial `v*` and accumulates `rho*(u*)` with the
/// right-endpoint rule, matching the implicit step, so that the discrete
/// identities `D_x w* = v*` and `D_t w* = rho*(u*)` hold to solver tolerance.
pub fn build_subsolution(u_star: &SpaceTimeField, m: &ModifiedFlux) -> Result<SubsolutionFields> {
    let g = u_star.grid;
    let h = g.h();
    let n = g.cells;
    if u_star.values.iter().any(|u| u.len() != n) {
        return Err(Error::GridMismatch("ragged field".into()));
    }
    let v_star: Vec<Vec<f64>> = u_star
        .values
        .iter()
        .map(|u| {
            let mut v = Vec::with_capacity(n + 1);
            let mut acc = 0.0;
            v.push(0.0);
            for &x in u {
                acc += h * x;
                v.push(acc);
            }
            v
        })
        .collect();
    let w_t: Vec<Vec<f64>> = u_star.values.iter().map(|u| u.iter().map(|&x| m.rho(x)).collect()).collect();

    let mut w0 = Vec::with_capacity(n);
    // int_0^{x_0} v0 with v0 = u0_0 * x on the first half cell
    let mut acc = 0.5 * u_star.values[0][0] * (0.5 * h) * (0.5 * h);
    w0.push(acc);
    for i in 1..n {
        acc += h * v_star[0][i];
        w0.push(acc);
    }
    let mut w_star = Vec::with_capacity(u_star.levels());
    w_star.push(w0);
    for k in 1..u_star.levels() {
        let dt = u_star.times[k] - u_star.times[k - 1];
        let prev = &w_star[k - 1];
        let next: Vec<f64> = prev.iter().zip(&w_t[k]).map(|(w, r)| w + dt * r).collect();
        w_star.push(next);
    }
    Ok(SubsolutionFields { u_star: u_star.clone(), v_star, w_star, w_t, flux: m.clone(), t1: u_star.t_end() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub cells: usize,
    /// Cell index range `[lo, hi]`.
    pub x_cells: (usize, usize),
    /// Level range `[lo, hi]`.
    pub levels: (usize, usize),
    pub x_range: (f64, f64),
    pub t_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QRegion {
    /// `mask[n][i]`: cell `i` of level `n` lies in `Q`.
    pub mask: Vec<Vec<bool>>,
    /// Signed distance of `u*` to the nearer threshold, positive inside.
    pub margin: Vec<Vec<f64>>,
    pub components: Vec<Component>,
    pub touches_t0: bool,
    /// Levels whose whole slice lies in `Q`.
    pub full_levels: Vec<usize>,
    pub count: usize,
    /// Space-time measure of `Q` with level `n` covering `(t_{n-1}, t_n]`.
    pub measure: f64,
}

impl QRegion {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// True when `Q` stays away from the final level, i.e. closes in time.
    pub fn bounded_before_end(&self) -> bool {
        self.mask.last().map(|m| !m.iter().any(|&b| b)).unwrap_or(true)
    }

    pub fn write_csv<W: Write>(&self, f: &SpaceTimeField, mut w: W) -> Result<()> {
        writeln!(w, "t,x,in_Q")?;
        for (n, row) in self.mask.iter().enumerate() {
            for (i, &b) in row.iter().enumerate() {
                writeln!(w, "{:e},{:e},{}", f.times[n], f.grid.center(i), b as u8)?;
            }
        }
        Ok(())
    }
}

/// `Q = { s-(r1) < u* < s+(r2) }` with strict comparisons.
pub fn compute_q(f: &SubsolutionFields, walls: &Walls) -> QRegion {
    let (lo, hi) = walls.q_bounds();
    let u = &f.u_star;
    let mask: Vec<Vec<bool>> = u.values.iter().map(|row| row.iter().map(|&x| lo < x && x < hi).collect()).collect();
    let margin: Vec<Vec<f64>> =
        u.values.iter().map(|row| row.iter().map(|&x| (x - lo).min(hi - x)).collect()).collect();
    let levels = mask.len();
    let cells = u.grid.cells;
    let h = u.grid.h();

    let mut seen = vec![vec![false; cells]; levels];
    let mut components = Vec::new();
    for n0 in 0..levels {
        for i0 in 0..cells {
            if !mask[n0][i0] || seen[n0][i0] {
                continue;
            }
            let mut comp =
                Component { cells: 0, x_cells: (i0, i0), levels: (n0, n0), x_range: (0.0, 0.0), t_range: (0.0, 0.0) };
            let mut queue = VecDeque::from([(n0, i0)]);
            seen[n0][i0] = true;
            while let Some((n, i)) = queue.pop_front() {
                comp.cells += 1;
                comp.x_cells = (comp.x_cells.0.min(i), comp.x_cells.1.max(i));
                comp.levels = (comp.levels.0.min(n), comp.levels.1.max(n));
                let mut nb = Vec::with_capacity(4);
                if n > 0 {
                    nb.push((n - 1, i));
                }
                if n + 1 < levels {
                    nb.push((n + 1, i));
                }
                if i > 0 {
                    nb.push((n, i - 1));
                }
                if i + 1 < cells {
                    nb.push((n, i + 1));
                }
                for (a, b) in nb {
                    if mask[a][b] && !seen[a][b] {
                        seen[a][b] = true;
                        queue.push_back((a, b));
                    }
                }
            }
            comp.x_range = (u.grid.face(comp.x_cells.0), u.grid.face(comp.x_cells.1 + 1));
            let t_lo = u.times[comp.levels.0.saturating_sub(1)];
            comp.t_range = (t_lo, u.times[comp.levels.1]);
            components.push(comp);
        }
    }
    let touches_t0 = mask.iter().take(2).any(|row| row.iter().any(|&b| b));
    let full_levels = (0..levels).filter(|&n| mask[n].iter().all(|&b| b)).collect();
    let count = mask.iter().map(|row| row.iter().filter(|&&b| b).count()).sum();
    let measure =
        (1..levels).map(|n| (u.times[n] - u.times[n - 1]) * h * mask[n].iter().filter(|&&b| b).count() as f64).sum();
    QRegion { mask, margin, components, touches_t0, full_levels, count, measure }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsolutionReport {
    pub pass: bool,
    pub checked_cells: usize,
    /// `(level, cell, reason)` of the first failing cell.
    pub first_failure: Option<(usize, usize, String)>,
    /// Smallest distance of `(v*_x, w*_t)` over `Q` to the boundary of `U`,
    /// measured coordinatewise.
    pub min_boundary_distance: Option<f64>,
    pub wx_residual: f64,
}

/// Checks `r1 < w*_t < r2`, `s-(w*_t) < v*_x < s+(w*_t)` and `w*_x = v*` on `Q`.
/// Cells next to the window edges sit on a wall up to round-off.
pub const WALL_TOL: f64 = 1e-12;

pub fn check_strict_subsolution(f: &SubsolutionFields, walls: &Walls, q: &QRegion) -> SubsolutionReport {
    let h = f.u_star.grid.h();
    let mut first_failure = None;
    let mut min_dist = f64::INFINITY;
    let mut checked = 0;
    let mut wx_worst: f64 = 0.0;
    'outer: for (n, row) in q.mask.iter().enumerate() {
        for (i, &inside) in row.iter().enumerate() {
            if !inside {
                continue;
            }
            checked += 1;
            let r = f.w_t[n][i];
            let s = f.v_x(n, i);
            let (lo, hi) = (walls.omega1(r), walls.omega2(r));
            let reason = if !(walls.r1 < r && r < walls.r2) {
                Some(format!("w*_t = {r} not in ({}, {})", walls.r1, walls.r2))
            } else if !(lo - WALL_TOL < s && s < hi + WALL_TOL) {
                Some(format!("v*_x = {s} not in ({lo}, {hi})"))
            } else {
                None
            };
            // w*_x = v* at both faces of the cell
            let w = &f.w_star[n];
            let v = &f.v_star[n];
            for face in [i, i + 1] {
                if face == 0 || face == w.len() {
                    continue;
                }
                let d = ((w[face] - w[face - 1]) / h - v[face]).abs();
                wx_worst = wx_worst.max(d / (1.0 + v[face].abs()));
            }
            if let Some(reason) = reason {
                first_failure = Some((n, i, reason));
                break 'outer;
            }
            let dist = (r - walls.r1).min(walls.r2 - r).min(s - lo).min(hi - s);
            min_dist = min_dist.min(dist);
        }
    }
    if first_failure.is_none() && wx_worst > 1e-6 {
        first_failure = Some((0, 0, format!("w*_x - v* residual {wx_worst:e} above 1e-6")));
    }
    SubsolutionReport {
        pass: first_failure.is_none(),
        checked_cells: checked,
        first_failure,
        min_boundary_distance: min_dist.is_finite().then_some(min_dist),
        wx_residual: wx_worst,
    }
}

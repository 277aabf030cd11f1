//! Single-stage laminate inside `Q`: each strip of width `delta` splits into a
//! block on the upper wall `s+(r)` and the rest on the lower wall `s-(r)`, with
//! volume fraction fixed by the local mean of `u*`.
//!
//! Only the per-cell wall data are stored; pieces are generated on demand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, SpaceTimeField};
use crate::subsolution::{QRegion, SubsolutionFields, Walls};

/// Piecewise-constant density on `[x0, x1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub x0: f64,
    pub x1: f64,
    pub u: f64,
}

/// Density that is piecewise constant inside each cell and constant in time
/// on `(t_{n-1}, t_n]`.
pub trait PiecewiseField {
    fn grid(&self) -> Grid;
    fn times(&self) -> &[f64];
    /// Appends the pieces of cell `i` on level `n`, in increasing `x`.
    fn pieces(&self, n: usize, i: usize, out: &mut Vec<Piece>);
    /// Cell average.
    fn cell_mean(&self, n: usize, i: usize) -> f64;
}

impl PiecewiseField for SpaceTimeField {
    fn grid(&self) -> Grid {
        self.grid
    }

    fn times(&self) -> &[f64] {
        &self.times
    }

    fn pieces(&self, n: usize, i: usize, out: &mut Vec<Piece>) {
        out.push(Piece { x0: self.grid.face(i), x1: self.grid.face(i + 1), u: self.values[n][i] });
    }

    fn cell_mean(&self, n: usize, i: usize) -> f64 {
        self.values[n][i]
    }
}

/// Wall values of one laminated cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellLaminate {
    /// Flux level shared by both phases.
    pub r: f64,
    pub lower: f64,
    pub upper: f64,
    /// Volume fraction of the upper phase.
    pub lambda: f64,
}

impl CellLaminate {
    /// Piece boundaries inside one strip in units of `delta`: `(y0, y1, upper?)`.
    fn pattern(&self, phase: f64) -> Vec<(f64, f64, bool)> {
        let a = phase;
        let b = phase + self.lambda;
        let raw = if b <= 1.0 {
            vec![(0.0, a, false), (a, b, true), (b, 1.0, false)]
        } else {
            vec![(0.0, b - 1.0, true), (b - 1.0, a, false), (a, 1.0, true)]
        };
        raw.into_iter().filter(|p| p.1 > p.0).collect()
    }

    /// Deviation `g(y) = int_0^y (u - mean)` at the pattern breakpoints, in
    /// units where the strip has width 1 and `u` is measured in density.
    fn sawtooth(&self, phase: f64) -> Vec<(f64, f64)> {
        let mean = self.lambda * self.upper + (1.0 - self.lambda) * self.lower;
        let mut pts = vec![(0.0, 0.0)];
        let mut g = 0.0;
        for (y0, y1, up) in self.pattern(phase) {
            let u = if up { self.upper } else { self.lower };
            g += (u - mean) * (y1 - y0);
            pts.push((y1, g));
        }
        pts
    }
}

/// Sup of `|g|`, mean of `g` and sup of `|Phi - y Phi(1)|` for a unit strip,
/// where `Phi` integrates `g`.
fn strip_deviation(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let sup_g = pts.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let mut phi = vec![0.0];
    for w in pts.windows(2) {
        let ((y0, g0), (y1, g1)) = (w[0], w[1]);
        phi.push(phi.last().unwrap() + 0.5 * (g0 + g1) * (y1 - y0));
    }
    let mean = *phi.last().unwrap();
    // c(y) = Phi(y) - mean * y; on each piece c' = g - mean is linear
    let mut sup_c: f64 = 0.0;
    for (k, w) in pts.windows(2).enumerate() {
        let ((y0, g0), (y1, g1)) = (w[0], w[1]);
        let c0 = phi[k] - mean * y0;
        let c1 = phi[k + 1] - mean * y1;
        sup_c = sup_c.max(c0.abs()).max(c1.abs());
        let (d0, d1) = (g0 - mean, g1 - mean);
        if d0 * d1 < 0.0 {
            let s = d0 / (d0 - d1);
            let y = y0 + s * (y1 - y0);
            let gy = g0 + s * (g1 - g0);
            let c = phi[k] + 0.5 * (g0 + gy) * (y - y0) - mean * y;
            sup_c = sup_c.max(c.abs());
        }
    }
    (sup_g, mean, sup_c)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Defects {
    /// `sup |z - z*|` over `Q`.
    pub sup_dev: f64,
    pub sup_v_dev: f64,
    pub sup_w_dev: f64,
    /// `sup |w_x - v|` over `Q`.
    pub wx_mismatch: f64,
    /// Fraction of `Q` cells whose wall values leave the two bands.
    pub band_violation_measure: f64,
    /// `sup |int_0^x u - v*(x)|` over cell faces.
    pub boundary_mismatch: f64,
    /// `sup |u - u*|` outside `Q`.
    pub exterior_dev: f64,
    pub band_cells: usize,
    pub q_cells: usize,
    /// `sup |d/dt (v - v*)|` after averaging over two strips; a stand-in for
    /// the distributional time derivative.
    pub mollified_vt_dev: f64,
    /// `sup_t |int u(., t) - int u*(., t)|`.
    pub mass_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub rectangles: usize,
    pub min_osc: Option<f64>,
    pub d0: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaminateSolution {
    pub base: SpaceTimeField,
    pub delta: f64,
    pub strips_per_cell: usize,
    pub seed: u64,
    /// Offset of the upper block within each strip, in units of `delta`.
    pub phase: f64,
    /// `cells[n][i]` is `Some` on laminated cells.
    pub cells: Vec<Vec<Option<CellLaminate>>>,
    pub defects: Defects,
}

/// Golden-ratio sequence; distinct seeds give well separated offsets.
pub fn seed_phase(seed: u64) -> f64 {
    (0.5 + seed as f64 * 0.381_966_011_250_105_1).fract()
}

impl PiecewiseField for LaminateSolution {
    fn grid(&self) -> Grid {
        self.base.grid
    }

    fn times(&self) -> &[f64] {
        &self.base.times
    }

    fn pieces(&self, n: usize, i: usize, out: &mut Vec<Piece>) {
        let g = self.base.grid;
        match self.cells[n][i] {
            None => self.base.pieces(n, i, out),
            Some(c) => {
                let pat = c.pattern(self.phase);
                let left = g.face(i);
                for s in 0..self.strips_per_cell {
                    let x = left + s as f64 * self.delta;
                    for &(y0, y1, up) in &pat {
                        out.push(Piece {
                            x0: x + y0 * self.delta,
                            x1: x + y1 * self.delta,
                            u: if up { c.upper } else { c.lower },
                        });
                    }
                }
                // close the cell exactly at its right face
                if let Some(p) = out.last_mut() {
                    p.x1 = g.face(i + 1);
                }
            }
        }
    }

    fn cell_mean(&self, n: usize, i: usize) -> f64 {
        match self.cells[n][i] {
            None => self.base.values[n][i],
            Some(c) => c.lambda * c.upper + (1.0 - c.lambda) * c.lower,
        }
    }
}

impl LaminateSolution {
    /// Density at `x` on level `n`.
    pub fn u_at(&self, n: usize, x: f64) -> f64 {
        let g = self.base.grid;
        let i = ((x / g.h()) as usize).min(g.cells - 1);
        match self.cells[n][i] {
            None => self.base.values[n][i],
            Some(c) => {
                let y = ((x - g.face(i)) / self.delta).fract();
                let rel = (y - self.phase).rem_euclid(1.0);
                if rel < c.lambda {
                    c.upper
                } else {
                    c.lower
                }
            }
        }
    }

    /// Exact averages of `u` over `per_cell` equal sub-cells of every cell,
    /// so that the exported field keeps the mass of the laminate.
    pub fn averaged(&self, per_cell: usize, level_stride: usize) -> SpaceTimeField {
        let g = self.base.grid;
        let fine = Grid { length: g.length, cells: g.cells * per_cell };
        let hf = fine.h();
        let stride = level_stride.max(1);
        let last = self.base.levels() - 1;
        let mut out = SpaceTimeField { grid: fine, times: Vec::new(), values: Vec::new() };
        let mut buf = Vec::new();
        for n in (0..=last).filter(|&n| n % stride == 0 || n == last) {
            let mut row = vec![0.0; fine.cells];
            for i in 0..g.cells {
                buf.clear();
                self.pieces(n, i, &mut buf);
                for p in &buf {
                    let first = ((p.x0 / hf).floor() as usize).saturating_sub(1).min(fine.cells - 1);
                    let mut j = first;
                    while j < fine.cells && fine.face(j) < p.x1 {
                        let len = p.x1.min(fine.face(j + 1)) - p.x0.max(fine.face(j));
                        if len > 0.0 {
                            row[j] += p.u * len / hf;
                        }
                        j += 1;
                    }
                }
            }
            out.times.push(self.base.times[n]);
            out.values.push(row);
        }
        out
    }

    pub fn mass(&self, n: usize) -> f64 {
        let mut buf = Vec::new();
        let mut total = 0.0;
        for i in 0..self.base.grid.cells {
            buf.clear();
            self.pieces(n, i, &mut buf);
            total += buf.iter().map(|p| p.u * (p.x1 - p.x0)).sum::<f64>();
        }
        total
    }

    /// Number of strips in the widest laminated slice.
    pub fn max_strips_per_level(&self) -> usize {
        self.cells
            .iter()
            .map(|row| row.iter().filter(|c| c.is_some()).count() * self.strips_per_cell)
            .max()
            .unwrap_or(0)
    }
}

const LAMBDA_SLACK: f64 = 1e-9;

/// Replace `z*` by a laminate on `Q`.
pub fn construct(
    f: &SubsolutionFields,
    walls: &Walls,
    q: &QRegion,
    delta: f64,
    eps: f64,
    seed: u64,
) -> Result<LaminateSolution> {
    let g = f.u_star.grid;
    let h = g.h();
    if !(delta > 0.0 && delta <= h * (1.0 + 1e-12)) {
        return Err(Error::Laminate(format!("strip width {delta} must lie in (0, h = {h}]")));
    }
    let ratio = h / delta;
    let strips = ratio.round() as usize;
    if (ratio - strips as f64).abs() > 1e-9 * ratio {
        return Err(Error::Laminate(format!("h / delta = {ratio} is not an integer")));
    }
    let delta = h / strips as f64;
    if q.mask.len() != f.u_star.levels() {
        return Err(Error::GridMismatch("Q mask and field have different level counts".into()));
    }
    let mut cells = vec![vec![None; g.cells]; f.u_star.levels()];
    // level 0 is the initial datum and stays untouched
    for n in 1..f.u_star.levels() {
        for i in 0..g.cells {
            if !q.mask[n][i] {
                continue;
            }
            let m = f.v_x(n, i);
            let r = f.w_t[n][i].clamp(walls.r1, walls.r2);
            let (lower, upper) = (walls.omega1(r), walls.omega2(r));
            let lambda = (m - lower) / (upper - lower);
            // cells touching the edge of Q can sit on a wall up to round-off
            if !(lambda > -LAMBDA_SLACK && lambda < 1.0 + LAMBDA_SLACK) {
                return Err(Error::Laminate(format!(
                    "volume fraction {lambda} outside (0, 1) at level {n}, cell {i}; not a strict subsolution"
                )));
            }
            cells[n][i] = Some(CellLaminate { r, lower, upper, lambda: lambda.clamp(0.0, 1.0) });
        }
    }
    let mut sol = LaminateSolution {
        base: f.u_star.clone(),
        delta,
        strips_per_cell: strips,
        seed,
        phase: seed_phase(seed),
        cells,
        defects: Defects::default(),
    };
    sol.defects = measure_defects(&sol, f, walls);
    if sol.defects.sup_dev > eps {
        return Err(Error::EpsInfeasible { eps, delta, achievable: sol.defects.sup_dev });
    }
    Ok(sol)
}

pub fn measure_defects(s: &LaminateSolution, f: &SubsolutionFields, walls: &Walls) -> Defects {
    let g = s.base.grid;
    let levels = s.base.levels();
    let mut d = Defects::default();
    let mut mean_g_prev: Vec<f64> = vec![0.0; g.cells];
    let mut buf = Vec::new();
    for n in 0..levels {
        let mut mean_g_row = vec![0.0; g.cells];
        // running integral of u from x = 0, compared with v* at faces
        let mut v = 0.0;
        for i in 0..g.cells {
            buf.clear();
            s.pieces(n, i, &mut buf);
            v += buf.iter().map(|p| p.u * (p.x1 - p.x0)).sum::<f64>();
            d.boundary_mismatch = d.boundary_mismatch.max((v - f.v_star[n][i + 1]).abs());
            match s.cells[n][i] {
                None => {
                    let outside = s.cell_mean(n, i);
                    d.exterior_dev = d.exterior_dev.max((outside - f.u_star.values[n][i]).abs());
                }
                Some(c) => {
                    d.q_cells += 1;
                    let ((a, b), (lo2, hi2)) = walls.bands();
                    let ok = (a..=b).contains(&c.lower) && (lo2..=hi2).contains(&c.upper);
                    if ok {
                        d.band_cells += 1;
                    }
                    let (sup_g, mean_g, sup_c) = strip_deviation(&c.sawtooth(s.phase));
                    // g scales with delta, Phi with delta^2
                    d.sup_v_dev = d.sup_v_dev.max(sup_g * s.delta);
                    d.sup_w_dev = d.sup_w_dev.max(sup_c * s.delta * s.delta);
                    d.wx_mismatch = d.wx_mismatch.max(mean_g.abs() * s.delta);
                    mean_g_row[i] = mean_g * s.delta;
                }
            }
        }
        if n > 0 {
            let dt = s.base.times[n] - s.base.times[n - 1];
            for i in 0..g.cells {
                let both = s.cells[n][i].is_some() && s.cells[n - 1][i].is_some();
                if both {
                    d.mollified_vt_dev = d.mollified_vt_dev.max((mean_g_row[i] - mean_g_prev[i]).abs() / dt);
                }
            }
        }
        d.mass_error = d.mass_error.max((s.mass(n) - f.u_star.mass(n)).abs());
        mean_g_prev = mean_g_row;
    }
    d.sup_dev = d.sup_v_dev.max(d.sup_w_dev);
    d.band_violation_measure = if d.q_cells == 0 { 0.0 } else { (d.q_cells - d.band_cells) as f64 / d.q_cells as f64 };
    d
}

/// `max u - min u` over every dyadic subrectangle of the run's space-time box
/// that lies in `Q` and has spatial side at least `4 delta`.
pub fn oscillation(s: &LaminateSolution, q: &QRegion, walls: &Walls) -> OscillationReport {
    let g = s.base.grid;
    let times = &s.base.times;
    let (t0, t1) = (times[0], *times.last().unwrap());
    let mut count = 0;
    let mut min_osc = f64::INFINITY;
    let mut buf = Vec::new();
    let mut depth = 0;
    loop {
        let parts = 1usize << depth;
        let side = g.length / parts as f64;
        if side < 4.0 * s.delta - 1e-15 || depth > 20 {
            break;
        }
        for jx in 0..parts {
            let (xa, xb) = (jx as f64 * side, (jx + 1) as f64 * side);
            let ia = ((xa / g.h()) + 1e-9).floor() as usize;
            let ib = (((xb / g.h()) - 1e-9).ceil() as usize).min(g.cells);
            for jt in 0..parts {
                let ta = t0 + (t1 - t0) * jt as f64 / parts as f64;
                let tb = t0 + (t1 - t0) * (jt + 1) as f64 / parts as f64;
                // levels n >= 1 with (t_{n-1}, t_n] meeting (ta, tb)
                let na = times.partition_point(|&t| t <= ta).max(1);
                let nb = times.partition_point(|&t| t < tb).min(times.len() - 1);
                if na > nb {
                    continue;
                }
                let inside = (na..=nb).all(|n| (ia..ib).all(|i| q.mask[n][i]));
                if !inside {
                    continue;
                }
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for n in na..=nb {
                    for i in ia..ib {
                        buf.clear();
                        s.pieces(n, i, &mut buf);
                        for p in buf.iter().filter(|p| p.x1.min(xb) - p.x0.max(xa) > 1e-15) {
                            lo = lo.min(p.u);
                            hi = hi.max(p.u);
                        }
                    }
                }
                count += 1;
                min_osc = min_osc.min(hi - lo);
            }
        }
        depth += 1;
    }
    let min_osc = min_osc.is_finite().then_some(min_osc);
    OscillationReport {
        rectangles: count,
        min_osc,
        d0: walls.d0,
        pass: count > 0 && min_osc.map(|m| m >= walls.d0 - 1e-9).unwrap_or(false),
    }
}

/// One laminate per seed; all must pass the same `eps`.
pub fn distinct_solutions(
    f: &SubsolutionFields,
    walls: &Walls,
    q: &QRegion,
    delta: f64,
    eps: f64,
    seeds: &[u64],
) -> Result<Vec<LaminateSolution>> {
    if seeds.len() < 2 {
        return Err(Error::Laminate(format!("need at least two seeds, got {}", seeds.len())));
    }
    let sols: Vec<LaminateSolution> =
        seeds.iter().map(|&s| construct(f, walls, q, delta, eps, s)).collect::<Result<_>>()?;
    if sols[0].max_strips_per_level() < 4 {
        return Err(Error::Laminate("Q holds fewer than four strips; solutions cannot be told apart".into()));
    }
    Ok(sols)
}

/// Space-time measure where two fields differ, and their largest pointwise gap.
pub fn difference(a: &impl PiecewiseField, b: &impl PiecewiseField) -> (f64, f64) {
    let g = a.grid();
    let times = a.times();
    let (mut pa, mut pb) = (Vec::new(), Vec::new());
    let mut measure = 0.0;
    let mut sup: f64 = 0.0;
    for n in 1..times.len() {
        let dt = times[n] - times[n - 1];
        for i in 0..g.cells {
            pa.clear();
            pb.clear();
            a.pieces(n, i, &mut pa);
            b.pieces(n, i, &mut pb);
            let (mut ka, mut kb) = (0, 0);
            let mut x = g.face(i);
            while ka < pa.len() && kb < pb.len() {
                let end = pa[ka].x1.min(pb[kb].x1);
                let gap = (pa[ka].u - pb[kb].u).abs();
                if gap > 1e-12 && end > x {
                    measure += (end - x) * dt;
                    sup = sup.max(gap);
                }
                x = end;
                if pa[ka].x1 <= end {
                    ka += 1;
                }
                if pb[kb].x1 <= end {
                    kb += 1;
                }
            }
        }
    }
    (measure, sup)
}

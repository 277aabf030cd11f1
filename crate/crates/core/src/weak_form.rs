//! Weak-form functional `int int (u phi_t + rho(u) phi_xx) + int u0 phi(., 0)`
//! against a catalog of separable test functions, and case-level checks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::branch::{BranchTable, Side};
use crate::error::{Error, Result};
use crate::laminate::{oscillation, LaminateSolution, OscillationReport, Piece, PiecewiseField};
use crate::subsolution::{QRegion, Walls};

pub const DEFAULT_MODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Linear,
    Quadratic,
    Cubic,
    Sine,
}

impl Profile {
    pub const ALL: [Profile; 4] = [Profile::Linear, Profile::Quadratic, Profile::Cubic, Profile::Sine];

    /// Value at `tau = (T - t) / (T - t0)`.
    pub fn value(&self, tau: f64) -> f64 {
        match self {
            Profile::Linear => tau,
            Profile::Quadratic => tau * tau,
            Profile::Cubic => tau * tau * tau,
            Profile::Sine => (0.5 * PI * tau).sin(),
        }
    }

    /// Antiderivative in `tau`.
    fn primitive(&self, tau: f64) -> f64 {
        match self {
            Profile::Linear => tau * tau / 2.0,
            Profile::Quadratic => tau.powi(3) / 3.0,
            Profile::Cubic => tau.powi(4) / 4.0,
            Profile::Sine => -(0.5 * PI * tau).cos() * 2.0 / PI,
        }
    }
}

/// `phi(x, t) = cos(k pi x / L) * Theta((T - t) / (T - t0))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub mode: usize,
    pub profile: Profile,
    pub t0: f64,
    pub horizon: f64,
}

impl TestFunction {
    pub fn theta(&self, t: f64) -> f64 {
        self.profile.value((self.horizon - t) / (self.horizon - self.t0))
    }

    /// `int_a^b Theta dt`.
    fn theta_integral(&self, a: f64, b: f64) -> f64 {
        let span = self.horizon - self.t0;
        let (ta, tb) = ((self.horizon - a) / span, (self.horizon - b) / span);
        span * (self.profile.primitive(ta) - self.profile.primitive(tb))
    }

    pub fn eval(&self, x: f64, t: f64, length: f64) -> f64 {
        (self.mode as f64 * PI * x / length).cos() * self.theta(t)
    }
}

/// Per-level spatial moments `int u X_k` and `int rho(u) X_k''` for `k = 0..=modes`.
struct Moments {
    u: Vec<Vec<f64>>,
    flux: Vec<Vec<f64>>,
}

fn sines(theta: f64, modes: usize, out: &mut [f64]) {
    out[0] = 0.0;
    if modes == 0 {
        return;
    }
    let (s, c) = theta.sin_cos();
    out[1] = s;
    for k in 2..=modes {
        out[k] = 2.0 * c * out[k - 1] - out[k - 2];
    }
}

fn moments(
    u: &dyn PiecewiseField,
    rho: &dyn Fn(f64) -> f64,
    modes: usize,
    levels: std::ops::RangeInclusive<usize>,
) -> Moments {
    let g = u.grid();
    let l = g.length;
    let mut m = Moments { u: Vec::new(), flux: Vec::new() };
    let mut buf: Vec<Piece> = Vec::new();
    let mut s0 = vec![0.0; modes + 1];
    let mut s1 = vec![0.0; modes + 1];
    for n in levels {
        let mut mu = vec![0.0; modes + 1];
        let mut mf = vec![0.0; modes + 1];
        for i in 0..g.cells {
            buf.clear();
            u.pieces(n, i, &mut buf);
            for p in &buf {
                sines(PI * p.x0 / l, modes, &mut s0);
                sines(PI * p.x1 / l, modes, &mut s1);
                let r = rho(p.u);
                mu[0] += p.u * (p.x1 - p.x0);
                for k in 1..=modes {
                    let w = k as f64 * PI / l;
                    let ds = s1[k] - s0[k];
                    mu[k] += p.u * ds / w;
                    mf[k] -= r * ds * w;
                }
            }
        }
        m.u.push(mu);
        m.flux.push(mf);
    }
    m
}

/// `int int_{(t_a, t_b)} (u phi_t + rho(u) phi_xx) + int u(t_a) phi(t_a) - int u(t_b) phi(t_b)`
/// over levels `na..=nb`. With `na = 0` and `phi(T) = 0` this is the weak residual;
/// splitting at any stored level is additive.
pub fn weak_window(u: &dyn PiecewiseField, rho: &dyn Fn(f64) -> f64, tf: &TestFunction, na: usize, nb: usize) -> f64 {
    let times = u.times();
    let k = tf.mode;
    let m = moments(u, rho, k, na..=nb);
    let mut total = tf.theta(times[na]) * m.u[0][k] - tf.theta(times[nb]) * m.u[nb - na][k];
    for n in na + 1..=nb {
        let j = n - na;
        // u is constant on (t_{n-1}, t_n], so int u phi_t = u (Theta_n - Theta_{n-1})
        total += (tf.theta(times[n]) - tf.theta(times[n - 1])) * m.u[j][k];
        total += tf.theta_integral(times[n - 1], times[n]) * m.flux[j][k];
    }
    total
}

/// Weak residual on the field's whole time span; the test function must vanish at its end.
pub fn weak_residual(u: &dyn PiecewiseField, rho: &dyn Fn(f64) -> f64, tf: &TestFunction) -> Result<f64> {
    let times = u.times();
    let (t0, t_end) = (times[0], *times.last().unwrap());
    let tol = 1e-12 * t_end.abs().max(1.0);
    if (tf.horizon - t_end).abs() > tol || (tf.t0 - t0).abs() > tol {
        return Err(Error::Horizon { field: t_end, test: tf.horizon });
    }
    Ok(weak_window(u, rho, tf, 0, times.len() - 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub modes: usize,
    /// `values[k][p]` for mode `k` and profile `Profile::ALL[p]`.
    pub values: Vec<Vec<f64>>,
    pub worst: f64,
}

impl Catalog {
    /// Largest `|self - other|` over matching entries.
    pub fn worst_difference(&self, other: &Catalog) -> f64 {
        self.values.iter().flatten().zip(other.values.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Residuals for modes `0..=modes` times the four time profiles, in one pass.
pub fn residual_catalog(u: &dyn PiecewiseField, rho: &dyn Fn(f64) -> f64, modes: usize) -> Catalog {
    let times = u.times();
    let last = times.len() - 1;
    let m = moments(u, rho, modes, 0..=last);
    let (t0, horizon) = (times[0], times[last]);
    let mut values = vec![vec![0.0; Profile::ALL.len()]; modes + 1];
    for (p, &profile) in Profile::ALL.iter().enumerate() {
        let tf = TestFunction { mode: 0, profile, t0, horizon };
        let th: Vec<f64> = times.iter().map(|&t| tf.theta(t)).collect();
        for k in 0..=modes {
            let mut total = th[0] * m.u[0][k] - th[last] * m.u[last][k];
            for n in 1..=last {
                total += (th[n] - th[n - 1]) * m.u[n][k];
                total += tf.theta_integral(times[n - 1], times[n]) * m.flux[n][k];
            }
            values[k][p] = total;
        }
    }
    let worst = values.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    Catalog { modes, values, worst }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

impl CheckItem {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), pass: value <= threshold, value, threshold }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), pass: value >= threshold, value, threshold }
    }

    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        Self { name: name.into(), pass, value: pass as u8 as f64, threshold: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub q_cells: usize,
    pub band_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Worst catalog residual of each segment.
    pub residuals: Vec<f64>,
    pub worst_residual: f64,
    pub modes: usize,
    pub conservation_error: f64,
    pub band_report: Vec<BandReport>,
    pub oscillation_report: Vec<OscillationReport>,
    pub two_point_distance_trace: Vec<f64>,
    pub items: Vec<CheckItem>,
    pub pass: bool,
}

/// One time segment of a candidate solution; laminated segments carry their
/// mixing region.
pub struct Segment<'a> {
    pub field: &'a dyn PiecewiseField,
    pub laminate: Option<(&'a LaminateSolution, &'a QRegion, &'a Walls)>,
}

/// Case conclusions: conservation on every slice, band membership and the
/// oscillation floor on laminated segments, and, when `two_point` is given,
/// a strictly decreasing distance to `{s-(r0), s+(r0)}` across segments.
pub fn verify_conclusions(
    segments: &[Segment<'_>],
    rho: &dyn Fn(f64) -> f64,
    mean0: f64,
    two_point: Option<(f64, &BranchTable)>,
    modes: usize,
) -> VerificationReport {
    let mut items = Vec::new();
    let mut residuals = Vec::new();
    let mut conservation: f64 = 0.0;
    let mut bands = Vec::new();
    let mut osc = Vec::new();
    let mut trace = Vec::new();
    let mut buf = Vec::new();
    for seg in segments {
        let f = seg.field;
        let g = f.grid();
        residuals.push(residual_catalog(f, rho, modes).worst);
        for n in 0..f.times().len() {
            let mut mass = 0.0;
            for i in 0..g.cells {
                buf.clear();
                f.pieces(n, i, &mut buf);
                mass += buf.iter().map(|p| p.u * (p.x1 - p.x0)).sum::<f64>();
            }
            conservation = conservation.max((mass - g.length * mean0).abs());
        }
        if let Some((lam, q, walls)) = seg.laminate {
            bands.push(BandReport { q_cells: lam.defects.q_cells, band_cells: lam.defects.band_cells });
            osc.push(oscillation(lam, q, walls));
        }
        if let Some((r0, table)) = two_point {
            let (lo, hi) = (table.invert_unchecked(r0, Side::Minus), table.invert_unchecked(r0, Side::Plus));
            let mut worst: f64 = 0.0;
            for n in 1..f.times().len() {
                for i in 0..g.cells {
                    buf.clear();
                    f.pieces(n, i, &mut buf);
                    for p in &buf {
                        worst = worst.max((p.u - lo).abs().min((p.u - hi).abs()));
                    }
                }
            }
            trace.push(worst);
        }
    }
    let length = segments.first().map(|s| s.field.grid().length).unwrap_or(1.0);
    items.push(CheckItem::at_most("conservation", conservation, 1e-9 * length));
    for (k, b) in bands.iter().enumerate() {
        let frac = if b.q_cells == 0 { 0.0 } else { (b.q_cells - b.band_cells) as f64 / b.q_cells as f64 };
        items.push(CheckItem::at_most(format!("bands[{k}]"), frac, 0.0));
    }
    for (k, o) in osc.iter().enumerate() {
        items.push(CheckItem {
            name: format!("oscillation[{k}]"),
            pass: o.pass,
            value: o.min_osc.unwrap_or(0.0),
            threshold: o.d0 - 1e-9,
        });
    }
    if two_point.is_some() {
        let decreasing = trace.windows(2).all(|w| w[1] < w[0]);
        items.push(CheckItem::flag("two_point_trace_decreasing", decreasing && !trace.is_empty()));
    }
    let worst_residual = residuals.iter().copied().fold(0.0, f64::max);
    let pass = items.iter().all(|i| i.pass);
    VerificationReport {
        residuals,
        worst_residual,
        modes,
        conservation_error: conservation,
        band_report: bands,
        oscillation_report: osc,
        two_point_distance_trace: trace,
        items,
        pass,
    }
}

//! Uniformly increasing C^3 surrogate `rho*` of the cubic flux.
//!
//! On the modification window the surrogate derivative is a blend
//! `sigma* = theta * S + sigma * (1 - S)` where `S` is a quintic smoothstep
//! ramping up over a short zone at each matched edge. Because `S` has
//! vanishing first and second derivatives at its ends, `sigma*` is C^2 and
//! `rho*` is C^3. Between the zones `sigma* = theta`, a constant fixed by the
//! requirement that `rho*` reaches the prescribed value at the far edge.
//!
//! Each zone stores `rho* - rho` as a polynomial in the distance from its
//! matched edge, so ordering tests close to the edge are not swamped by
//! round-off.

use serde::{Deserialize, Serialize};

use crate::branch::BranchTable;
use crate::error::{Error, Result};
use crate::flux::FluxParams;
use crate::poly;

pub const DOMAIN: (f64, f64) = (-1.0, 2.0);
const MAX_HALVINGS: usize = 60;
const BOUND_SAMPLES: usize = 100_000;
const ORDER_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OneSide {
    /// Match `rho` on `[-1, m]`, extend increasingly to the right.
    Left,
    /// Match `rho` on `[m, 2]`, extend increasingly to the left.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FluxKind {
    TwoSided { r1: f64, r2: f64 },
    OneSided { side: OneSide, match_upto: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    /// `rho* = rho + D(dir * (s - origin))` on `[start, end]`.
    Zone { start: f64, end: f64, origin: f64, dir: f64, excess: Vec<f64> },
    /// `rho* = value + slope * (s - start)` on `[start, end]`.
    Linear { start: f64, end: f64, value: f64, slope: f64 },
}

impl Segment {
    fn start(&self) -> f64 {
        match self {
            Segment::Zone { start, .. } | Segment::Linear { start, .. } => *start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifiedFlux {
    pub base: FluxParams,
    pub kind: FluxKind,
    /// Interval outside of which `rho* = rho`.
    pub window: (f64, f64),
    pub knots: Vec<f64>,
    pub segments: Vec<Segment>,
    /// Slope of the linear part.
    pub plateau_slope: f64,
    pub theta0: f64,
    pub theta1: f64,
}

/// Blend zone anchored at `origin`, extending `len` in direction `dir`.
/// Returns `(excess polynomial, integral of sigma* over the zone minus theta*len/2)`.
fn zone_excess(p: &FluxParams, origin: f64, dir: f64, len: f64, theta: f64) -> Vec<f64> {
    // sigma in the local variable t = dir * (s - origin)
    let sig = [p.sigma(origin), dir * p.sigma_prime(origin), 0.5 * p.sigma_second()];
    let ramp = poly::rescale(&poly::SMOOTHSTEP, len);
    // (sigma* - sigma) = (theta - sigma) * S
    let diff = poly::mul(&poly::add(&[theta], &poly::scale(&sig, -1.0)), &ramp);
    // rho* - rho = dir * integral, because ds = dir * dt
    poly::scale(&poly::integrate(&diff), dir)
}

/// `int_0^len sigma(origin + dir t) (1 - S(t/len)) dt`.
fn zone_sigma_weight(p: &FluxParams, origin: f64, dir: f64, len: f64) -> f64 {
    let sig = [p.sigma(origin), dir * p.sigma_prime(origin), 0.5 * p.sigma_second()];
    let ramp = poly::rescale(&poly::SMOOTHSTEP, len);
    let one_minus = poly::add(&[1.0], &poly::scale(&ramp, -1.0));
    poly::eval(&poly::integrate(&poly::mul(&sig, &one_minus)), len)
}

impl ModifiedFlux {
    /// Surrogate equal to `rho` on `[-1, s^-(r1)] U [s^+(r2), 2]`, strictly
    /// increasing, below `rho` on `(s^-(r1), s^-(r2)]` and above `rho` on
    /// `[s^+(r1), s^+(r2))`.
    pub fn build_two_sided(p: FluxParams, r1: f64, r2: f64) -> Result<Self> {
        let table = BranchTable::new(p)?;
        let (lo, hi) = table.domain();
        if !(lo <= r1 && r1 < r2 && r2 <= hi) {
            return Err(Error::InvalidParams(format!("need rho(s0+)={lo} <= r1={r1} < r2={r2} <= r*={hi}")));
        }
        let c = table.crit;
        let a = table.minus(r1)?;
        let b = table.plus(r2)?;
        let sm_r2 = table.minus(r2)?;
        let sp_r1 = table.plus(r1)?;
        let width = b - a;
        let rise = p.rho(b) - p.rho(a);

        let mut len_a = 0.5 * (c.s0_minus - a).min(0.25 * width);
        let mut len_b = 0.5 * (b - c.s0_plus).min(0.25 * width);
        let mut last_err = String::from("no attempt");
        for _ in 0..MAX_HALVINGS {
            let j = zone_sigma_weight(&p, a, 1.0, len_a) + zone_sigma_weight(&p, b, -1.0, len_b);
            let theta = (rise - j) / (width - 0.5 * (len_a + len_b));
            let cap = [p.sigma(sm_r2), p.sigma(sp_r1)].into_iter().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
            if j > 0.5 * rise || !(theta > 0.0) || theta >= 0.5 * cap {
                last_err = format!("plateau slope {theta:e} not in (0, {:e})", 0.5 * cap);
                len_a *= 0.5;
                len_b *= 0.5;
                continue;
            }
            let m = Self::assemble_two_sided(p, r1, r2, a, b, len_a, len_b, theta);
            match m.check_ordering(&table) {
                Ok(()) => return Ok(m),
                Err(e) => {
                    last_err = e;
                    len_a *= 0.5;
                    len_b *= 0.5;
                }
            }
        }
        Err(Error::Infeasible(last_err))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble_two_sided(p: FluxParams, r1: f64, r2: f64, a: f64, b: f64, len_a: f64, len_b: f64, theta: f64) -> Self {
        let ex_a = zone_excess(&p, a, 1.0, len_a, theta);
        let ex_b = zone_excess(&p, b, -1.0, len_b, theta);
        let mid_start = a + len_a;
        let mid_end = b - len_b;
        let value = p.rho(mid_start) + poly::eval(&ex_a, len_a);
        let segments = vec![
            Segment::Zone { start: a, end: mid_start, origin: a, dir: 1.0, excess: ex_a },
            Segment::Linear { start: mid_start, end: mid_end, value, slope: theta },
            Segment::Zone { start: mid_end, end: b, origin: b, dir: -1.0, excess: ex_b },
        ];
        let mut m = Self {
            base: p,
            kind: FluxKind::TwoSided { r1, r2 },
            window: (a, b),
            knots: vec![a, mid_start, mid_end, b],
            segments,
            plateau_slope: theta,
            theta0: 0.0,
            theta1: 0.0,
        };
        m.fill_bounds();
        m
    }

    /// Surrogate equal to `rho` on one side of `match_upto` and uniformly
    /// increasing on the other.
    pub fn build_one_sided(p: FluxParams, match_upto: f64, side: OneSide) -> Result<Self> {
        let c = p.critical_points()?;
        let (origin, dir, len) = match side {
            OneSide::Left => {
                if !(match_upto < c.s0_minus && match_upto > DOMAIN.0) {
                    return Err(Error::InvalidParams(format!(
                        "left match point {match_upto} must lie below s0- = {}",
                        c.s0_minus
                    )));
                }
                (match_upto, 1.0, 0.5 * (c.s0_minus - match_upto))
            }
            OneSide::Right => {
                if !(match_upto > c.s0_plus && match_upto < DOMAIN.1) {
                    return Err(Error::InvalidParams(format!(
                        "right match point {match_upto} must lie above s0+ = {}",
                        c.s0_plus
                    )));
                }
                (match_upto, -1.0, 0.5 * (match_upto - c.s0_plus))
            }
        };
        let theta = 0.5 * p.sigma(origin);
        if !(theta > 0.0) {
            return Err(Error::Infeasible(format!("sigma({origin}) is not positive")));
        }
        let ex = zone_excess(&p, origin, dir, len, theta);
        let zone_end = origin + dir * len;
        let edge_value = p.rho(zone_end) + poly::eval(&ex, len);
        let (window, knots, segments) = match side {
            OneSide::Left => (
                (origin, DOMAIN.1),
                vec![origin, zone_end, DOMAIN.1],
                vec![
                    Segment::Zone { start: origin, end: zone_end, origin, dir, excess: ex },
                    Segment::Linear { start: zone_end, end: DOMAIN.1, value: edge_value, slope: theta },
                ],
            ),
            OneSide::Right => (
                (DOMAIN.0, origin),
                vec![DOMAIN.0, zone_end, origin],
                vec![
                    Segment::Linear {
                        start: DOMAIN.0,
                        end: zone_end,
                        value: edge_value - theta * (zone_end - DOMAIN.0),
                        slope: theta,
                    },
                    Segment::Zone { start: zone_end, end: origin, origin, dir, excess: ex },
                ],
            ),
        };
        let mut m = Self {
            base: p,
            kind: FluxKind::OneSided { side, match_upto },
            window,
            knots,
            segments,
            plateau_slope: theta,
            theta0: 0.0,
            theta1: 0.0,
        };
        m.fill_bounds();
        Ok(m)
    }

    fn fill_bounds(&mut self) {
        let (lo, hi) = DOMAIN;
        let mut mn = f64::INFINITY;
        let mut mx = f64::NEG_INFINITY;
        for i in 0..=BOUND_SAMPLES {
            let s = lo + (hi - lo) * i as f64 / BOUND_SAMPLES as f64;
            let d = self.derivative_unchecked(s, 1);
            mn = mn.min(d);
            mx = mx.max(d);
        }
        // knots carry the extreme values of the blend in each zone
        for &k in &self.knots {
            let d = self.derivative_unchecked(k, 1);
            mn = mn.min(d);
            mx = mx.max(d);
        }
        self.theta0 = 0.99 * mn;
        self.theta1 = 1.01 * mx;
    }

    fn segment_at(&self, s: f64) -> Option<&Segment> {
        let (a, b) = (self.knots[0], *self.knots.last().unwrap());
        if s < a || s > b {
            return None;
        }
        let idx = self.segments.partition_point(|seg| seg.start() <= s);
        Some(&self.segments[idx.saturating_sub(1)])
    }

    fn derivative_unchecked(&self, s: f64, order: usize) -> f64 {
        let p = &self.base;
        match self.segment_at(s) {
            None => p.rho_derivative(s, order),
            Some(Segment::Zone { origin, dir, excess, .. }) => {
                let t = dir * (s - origin);
                p.rho_derivative(s, order) + dir.powi(order as i32) * poly::eval_derivative(excess, t, order)
            }
            Some(Segment::Linear { start, value, slope, .. }) => match order {
                0 => value + slope * (s - start),
                1 => *slope,
                _ => 0.0,
            },
        }
    }

    /// Value (`order = 0`) or derivative of order 1..=3 of `rho*`.
    pub fn eval(&self, s: f64, order: usize) -> Result<f64> {
        if !(DOMAIN.0..=DOMAIN.1).contains(&s) || order > 3 {
            return Err(Error::Domain { value: s });
        }
        Ok(self.derivative_unchecked(s, order))
    }

    /// `rho*(s)`; densities are clamped into the domain.
    #[inline]
    pub fn rho(&self, s: f64) -> f64 {
        self.derivative_unchecked(s.clamp(DOMAIN.0, DOMAIN.1), 0)
    }

    #[inline]
    pub fn sigma(&self, s: f64) -> f64 {
        self.derivative_unchecked(s.clamp(DOMAIN.0, DOMAIN.1), 1)
    }

    /// `rho*(s) - rho(s)`, computed without cancellation inside zones.
    pub fn excess(&self, s: f64) -> f64 {
        match self.segment_at(s) {
            None => 0.0,
            Some(Segment::Zone { origin, dir, excess, .. }) => poly::eval(excess, dir * (s - origin)),
            Some(Segment::Linear { start, value, slope, .. }) => value + slope * (s - start) - self.base.rho(s),
        }
    }

    fn check_ordering(&self, table: &BranchTable) -> std::result::Result<(), String> {
        let FluxKind::TwoSided { r1, r2 } = self.kind else {
            return Ok(());
        };
        let (a, b) = self.window;
        let sm_r2 = table.invert_unchecked(r2, crate::branch::Side::Minus);
        let sp_r1 = table.invert_unchecked(r1, crate::branch::Side::Plus);
        for j in 1..=ORDER_SAMPLES {
            let s = a + (sm_r2 - a) * j as f64 / ORDER_SAMPLES as f64;
            if !(self.excess(s) < 0.0) {
                return Err(format!("rho* >= rho at s={s}"));
            }
        }
        for j in 0..ORDER_SAMPLES {
            let s = sp_r1 + (b - sp_r1) * j as f64 / ORDER_SAMPLES as f64;
            if !(self.excess(s) > 0.0) {
                return Err(format!("rho* <= rho at s={s}"));
            }
        }
        Ok(())
    }

    /// Sub-intervals where the surrogate must lie strictly below / above `rho`.
    pub fn ordering_intervals(&self) -> Option<((f64, f64), (f64, f64))> {
        let FluxKind::TwoSided { r1, r2 } = self.kind else {
            return None;
        };
        let table = BranchTable::new(self.base).ok()?;
        Some((
            (self.window.0, table.invert_unchecked(r2, crate::branch::Side::Minus)),
            (table.invert_unchecked(r1, crate::branch::Side::Plus), self.window.1),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> FluxParams {
        FluxParams::new(0.9, 1.0).unwrap()
    }

    fn two_sided() -> ModifiedFlux {
        ModifiedFlux::build_two_sided(params(), 0.098, 0.0995).unwrap()
    }

    #[test]
    fn window_edges_match() {
        let m = two_sided();
        let p = params();
        let (a, b) = m.window;
        assert_eq!(m.rho(a), p.rho(a));
        assert_eq!(m.rho(b), p.rho(b));
        let t = BranchTable::new(p).unwrap();
        assert!((a - t.minus(0.098).unwrap()).abs() < 1e-15);
        assert!((b - t.plus(0.0995).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn monotone_with_bounds() {
        let m = two_sided();
        assert!(m.theta0 > 0.0);
        let mut min = f64::INFINITY;
        for i in 0..=10_000 {
            let s = -1.0 + 3.0 * i as f64 / 10_000.0;
            let d = m.eval(s, 1).unwrap();
            assert!(d >= m.theta0 && d <= m.theta1, "s={s} d={d}");
            min = min.min(d);
        }
        assert!(min >= m.theta0);
        let v = m.rho(0.6);
        let t = BranchTable::new(params()).unwrap();
        assert!(m.rho(t.minus(0.0995).unwrap()) < v && v < m.rho(t.plus(0.098).unwrap()));
    }

    /// Evaluate the formula of segment `idx` (or `rho` for an out-of-window
    /// index) at `s`, ignoring the segment's own extent.
    fn segment_formula(m: &ModifiedFlux, idx: Option<usize>, s: f64, order: usize) -> f64 {
        let p = &m.base;
        match idx.map(|i| &m.segments[i]) {
            None => p.rho_derivative(s, order),
            Some(Segment::Zone { origin, dir, excess, .. }) => {
                p.rho_derivative(s, order)
                    + dir.powi(order as i32) * poly::eval_derivative(excess, dir * (s - origin), order)
            }
            Some(Segment::Linear { start, value, slope, .. }) => match order {
                0 => value + slope * (s - start),
                1 => *slope,
                _ => 0.0,
            },
        }
    }

    /// Magnitude of the terms summed by `segment_formula`, for round-off bounds.
    fn term_scale(m: &ModifiedFlux, idx: Option<usize>, s: f64, order: usize) -> f64 {
        let base = 1.0 + m.base.rho_derivative(s, order).abs();
        match idx.map(|i| &m.segments[i]) {
            Some(Segment::Zone { origin, dir, excess, .. }) => {
                let abs: Vec<f64> = excess.iter().map(|c| c.abs()).collect();
                base + poly::eval_derivative(&abs, (dir * (s - origin)).abs(), order)
            }
            _ => base,
        }
    }

    #[test]
    fn c3_at_knots() {
        let m = two_sided();
        let n = m.segments.len();
        for (k, &x) in m.knots.iter().enumerate() {
            let left = if k == 0 { None } else { Some(k - 1) };
            let right = if k == n { None } else { Some(k) };
            for order in 0..=3 {
                let l = segment_formula(&m, left, x, order);
                let r = segment_formula(&m, right, x, order);
                let scale = term_scale(&m, left, x, order).max(term_scale(&m, right, x, order));
                assert!((l - r).abs() <= 1e-9 * scale, "knot {x} order {order}: {l} vs {r}");
            }
        }
    }

    #[test]
    fn matched_region_derivative() {
        let m = two_sided();
        let p = params();
        for &s in &[-0.5, 0.0, 0.05, 1.0, 1.7] {
            assert_eq!(m.eval(s, 1).unwrap(), p.sigma(s));
            assert_eq!(m.eval(s, 0).unwrap(), p.rho(s));
        }
        assert!(m.eval(2.5, 0).is_err());
        assert!(m.eval(-1.5, 1).is_err());
    }

    #[test]
    fn one_sided_left() {
        let p = params();
        let c = p.critical_points().unwrap();
        let m1 = 0.5 * (0.39 + c.s0_minus);
        assert!((m1 - 0.39225).abs() < 1e-5);
        let m = ModifiedFlux::build_one_sided(p, m1, OneSide::Left).unwrap();
        for i in 0..=100 {
            let s = -1.0 + (m1 + 1.0) * i as f64 / 100.0;
            assert_eq!(m.rho(s), p.rho(s));
        }
        assert_eq!(m.eval(m1, 1).unwrap(), p.sigma(m1));
        assert!(m.theta0 > 0.0);
    }

    #[test]
    fn one_sided_right() {
        let p = params();
        let m = ModifiedFlux::build_one_sided(p, 0.95, OneSide::Right).unwrap();
        assert!((m.rho(1.0) - 0.1).abs() < 1e-15);
        assert!(m.theta0 > 0.0);
        assert!(ModifiedFlux::build_one_sided(p, 0.5, OneSide::Right).is_err());
        assert!(ModifiedFlux::build_one_sided(p, 0.5, OneSide::Left).is_err());
    }

    #[test]
    fn rejects_bad_window() {
        assert!(ModifiedFlux::build_two_sided(params(), 0.0995, 0.098).is_err());
        assert!(ModifiedFlux::build_two_sided(params(), 0.09, 0.0995).is_err());
    }

    #[test]
    fn narrow_window_still_builds() {
        let m = ModifiedFlux::build_two_sided(params(), 0.0985 - 0.00025, 0.0985 + 0.0002).unwrap();
        assert!(m.theta0 > 0.0);
        // r1 at the lower branch end and r2 at r* are admissible
        let c = params().critical_points().unwrap();
        let m = ModifiedFlux::build_two_sided(params(), c.r_low, c.r_star).unwrap();
        assert!(m.theta0 > 0.0);
    }
}

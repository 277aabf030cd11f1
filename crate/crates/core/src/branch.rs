//! Inverses of `rho` on its two outer increasing branches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{CriticalData, FluxParams};

const NEWTON_MIN_SLOPE: f64 = 1e-3;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Minus,
    Plus,
}

/// Root of `rho(s) = r` on `[lo, hi]`, where `rho` is nondecreasing.
///
/// Newton steps are taken while they stay in the bracket and the slope is not
/// too small; otherwise the bracket is bisected.
pub(crate) fn solve_increasing(p: &FluxParams, r: f64, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let fa = p.rho(a) - r;
    let fb = p.rho(b) - r;
    if fa >= 0.0 {
        return a;
    }
    if fb <= 0.0 {
        return b;
    }
    let mut s = 0.5 * (a + b);
    for _ in 0..MAX_ITER {
        let f = p.rho(s) - r;
        if f == 0.0 {
            return s;
        }
        if f < 0.0 {
            a = s;
        } else {
            b = s;
        }
        if b - a <= 4.0 * f64::EPSILON * b.abs().max(1e-300) {
            break;
        }
        let slope = p.sigma(s);
        let newton = s - f / slope;
        s = if slope.abs() >= NEWTON_MIN_SLOPE && newton > a && newton < b { newton } else { 0.5 * (a + b) };
    }
    // Pick the better bracket end if iteration stalled on a plateau.
    let fs = (p.rho(s) - r).abs();
    let (fa, fb) = ((p.rho(a) - r).abs(), (p.rho(b) - r).abs());
    if fa < fs && fa <= fb {
        a
    } else if fb < fs {
        b
    } else {
        s
    }
}

/// Branch inverses `s^-(r)` on `(0, s0^-]` and `s^+(r)` on `[s0^+, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchTable {
    pub params: FluxParams,
    pub crit: CriticalData,
    pub tol: f64,
}

impl BranchTable {
    pub fn new(params: FluxParams) -> Result<Self> {
        Ok(Self { params, crit: params.critical_points()?, tol: 1e-12 })
    }

    /// Valid flux interval `[rho(s0^+), r*]`.
    pub fn domain(&self) -> (f64, f64) {
        (self.crit.r_low, self.crit.r_star)
    }

    pub fn invert(&self, r: f64, side: Side) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&r) {
            return Err(Error::BranchRange { value: r, lo, hi });
        }
        Ok(self.invert_unchecked(r, side))
    }

    /// Inversion without the range check; arguments outside the domain are
    /// clamped to the branch ends.
    pub fn invert_unchecked(&self, r: f64, side: Side) -> f64 {
        let c = &self.crit;
        let (a, b) = match side {
            Side::Minus => (0.0, c.s0_minus),
            Side::Plus => (c.s0_plus, 1.0),
        };
        let s = solve_increasing(&self.params, r, a, b);
        self.snap(s, side)
    }

    fn snap(&self, s: f64, side: Side) -> f64 {
        let c = &self.crit;
        let ends: &[f64] = match side {
            Side::Minus => &[c.s0_minus],
            Side::Plus => &[c.s0_plus, 1.0],
        };
        for &e in ends {
            if (s - e).abs() <= self.tol {
                return e;
            }
        }
        s
    }

    pub fn minus(&self, r: f64) -> Result<f64> {
        self.invert(r, Side::Minus)
    }

    pub fn plus(&self, r: f64) -> Result<f64> {
        self.invert(r, Side::Plus)
    }

    /// `(s1^-, s1^+, s2^-, s2^+)` recomputed by inversion.
    pub fn endpoints(&self) -> (f64, f64, f64, f64) {
        let (lo, hi) = self.domain();
        (
            self.invert_unchecked(lo, Side::Minus),
            self.invert_unchecked(lo, Side::Plus),
            self.invert_unchecked(hi, Side::Minus),
            self.invert_unchecked(hi, Side::Plus),
        )
    }
}

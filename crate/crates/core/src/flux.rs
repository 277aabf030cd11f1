//! Cubic flux `rho(s) = a*b*s^3 - 2*a*s^2 + s`, its derivative, and the
//! classification of the adhesion/volume-filling parameter square.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::branch;
use crate::error::{Error, Result};

/// Relative tolerance used to snap boundary configurations (double roots,
/// roots sitting on `s = 1`) onto the degenerate classes.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Adhesion (`alpha`) and volume-filling (`beta`) parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxParams {
    pub alpha: f64,
    pub beta: f64,
}

impl FluxParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParams(format!("alpha={alpha}, beta={beta} must both lie in [0, 1]")));
        }
        Ok(Self { alpha, beta })
    }

    #[inline]
    pub fn rho(&self, s: f64) -> f64 {
        let ab = self.alpha * self.beta;
        ((ab * s - 2.0 * self.alpha) * s + 1.0) * s
    }

    #[inline]
    pub fn sigma(&self, s: f64) -> f64 {
        (3.0 * self.alpha * self.beta * s - 4.0 * self.alpha) * s + 1.0
    }

    #[inline]
    pub fn sigma_prime(&self, s: f64) -> f64 {
        6.0 * self.alpha * self.beta * s - 4.0 * self.alpha
    }

    #[inline]
    pub fn sigma_second(&self) -> f64 {
        6.0 * self.alpha * self.beta
    }

    /// Derivative of `rho` of order 0..=3 (higher orders vanish).
    pub fn rho_derivative(&self, s: f64, order: usize) -> f64 {
        match order {
            0 => self.rho(s),
            1 => self.sigma(s),
            2 => self.sigma_prime(s),
            3 => self.sigma_second(),
            _ => 0.0,
        }
    }

    /// Real roots of `sigma`, in increasing order. A double root appears once.
    pub fn sigma_roots(&self) -> SigmaRoots {
        let a = 3.0 * self.alpha * self.beta;
        let b = -4.0 * self.alpha;
        if self.alpha == 0.0 {
            return SigmaRoots::None;
        }
        if a == 0.0 {
            return SigmaRoots::Single(-1.0 / b);
        }
        let disc = b * b - 4.0 * a;
        let scale = b * b;
        if disc.abs() <= BOUNDARY_TOL * scale {
            return SigmaRoots::Double(-b / (2.0 * a));
        }
        if disc < 0.0 {
            return SigmaRoots::None;
        }
        // b < 0 here, so q = -(b - sqrt(disc))/2 avoids cancellation.
        let q = 0.5 * (-b + disc.sqrt());
        SigmaRoots::Pair(1.0 / q, q / a)
    }

    pub fn classify(&self) -> RegimeClass {
        classify_regime(self)
    }

    pub fn critical_points(&self) -> Result<CriticalData> {
        critical_points(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaRoots {
    None,
    Single(f64),
    Double(f64),
    Pair(f64, f64),
}

/// Sign pattern of `sigma` on `[0, 1]`, read left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeClass {
    F,
    FD,
    FDF,
    FDB,
    FDBD,
    FDBDF,
}

impl RegimeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeClass::F => "F",
            RegimeClass::FD => "FD",
            RegimeClass::FDF => "FDF",
            RegimeClass::FDB => "FDB",
            RegimeClass::FDBD => "FDBD",
            RegimeClass::FDBDF => "FDBDF",
        }
    }

    pub fn from_word(word: &str) -> Option<Self> {
        Some(match word {
            "F" => RegimeClass::F,
            "FD" => RegimeClass::FD,
            "FDF" => RegimeClass::FDF,
            "FDB" => RegimeClass::FDB,
            "FDBD" => RegimeClass::FDBD,
            "FDBDF" => RegimeClass::FDBDF,
            _ => return None,
        })
    }
}

impl fmt::Display for RegimeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RootPos {
    Inside,
    AtOne,
    Beyond,
}

fn locate(root: f64) -> RootPos {
    if (root - 1.0).abs() <= BOUNDARY_TOL {
        RootPos::AtOne
    } else if root < 1.0 {
        RootPos::Inside
    } else {
        RootPos::Beyond
    }
}

/// Six-way classification of `(alpha, beta)`. Boundary configurations go to
/// the degenerate classes.
pub fn classify_regime(p: &FluxParams) -> RegimeClass {
    use RegimeClass::*;
    // sigma(0) = 1 and both roots are positive whenever they exist.
    match p.sigma_roots() {
        SigmaRoots::None => F,
        SigmaRoots::Single(r) => match locate(r) {
            RootPos::Inside => FDB,
            RootPos::AtOne => FD,
            RootPos::Beyond => F,
        },
        SigmaRoots::Double(r) => match locate(r) {
            RootPos::Inside => FDF,
            RootPos::AtOne => FD,
            RootPos::Beyond => F,
        },
        SigmaRoots::Pair(lo, hi) => match (locate(lo), locate(hi)) {
            (RootPos::Beyond, _) => F,
            (RootPos::AtOne, _) => FD,
            (RootPos::Inside, RootPos::Beyond) => FDB,
            (RootPos::Inside, RootPos::AtOne) => FDBD,
            (RootPos::Inside, RootPos::Inside) => FDBDF,
        },
    }
}

/// Whether `(alpha, beta)` satisfies the explicit inequality
/// `2/3 < beta <= 1`, `3 beta / 4 < alpha < 1 / (4 - 3 beta)`.
pub fn in_fdbdf_inequality(p: &FluxParams) -> bool {
    p.beta > 2.0 / 3.0 && p.beta <= 1.0 && p.alpha > 0.75 * p.beta && p.alpha < 1.0 / (4.0 - 3.0 * p.beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelType {
    TypeI,
    TypeII,
}

/// Thresholds of an FDBDF flux.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalData {
    pub s0_minus: f64,
    pub s0_plus: f64,
    pub s1_minus: f64,
    pub s1_plus: f64,
    pub s2_minus: f64,
    pub s2_plus: f64,
    /// `rho(s0_plus)`, the lower end of the branch domain.
    pub r_low: f64,
    pub r_star: f64,
    pub model_type: ModelType,
}

pub fn critical_points(p: &FluxParams) -> Result<CriticalData> {
    let class = classify_regime(p);
    let (s0_minus, s0_plus) = match (class, p.sigma_roots()) {
        (RegimeClass::FDBDF, SigmaRoots::Pair(lo, hi)) => (lo, hi),
        _ => return Err(Error::NotFdbdf { alpha: p.alpha, beta: p.beta, class: class.to_string() }),
    };
    let rho_peak = p.rho(s0_minus);
    let rho_one = p.rho(1.0);
    let r_low = p.rho(s0_plus);
    let (r_star, model_type) =
        if rho_peak <= rho_one { (rho_peak, ModelType::TypeI) } else { (rho_one, ModelType::TypeII) };

    let s1_minus = branch::solve_increasing(p, r_low, 0.0, s0_minus);
    let s1_plus = s0_plus;
    let (s2_minus, s2_plus) = match model_type {
        ModelType::TypeI => {
            let plus = if rho_peak == rho_one { 1.0 } else { branch::solve_increasing(p, r_star, s0_plus, 1.0) };
            (s0_minus, plus)
        }
        ModelType::TypeII => (branch::solve_increasing(p, r_star, 0.0, s0_minus), 1.0),
    };

    Ok(CriticalData { s0_minus, s0_plus, s1_minus, s1_plus, s2_minus, s2_plus, r_low, r_star, model_type })
}

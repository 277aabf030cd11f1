//! Dense polynomial helpers, coefficients in ascending order.

pub fn eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

/// `k`-th derivative evaluated at `t`.
pub fn eval_derivative(c: &[f64], t: f64, k: usize) -> f64 {
    if k == 0 {
        return eval(c, t);
    }
    let mut acc = 0.0;
    for (i, &a) in c.iter().enumerate().skip(k).rev() {
        let falling: f64 = ((i - k + 1)..=i).map(|j| j as f64).product();
        acc = acc * t + a * falling;
    }
    acc
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n).map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0)).collect()
}

pub fn scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|&x| x * k).collect()
}

/// Antiderivative vanishing at 0.
pub fn integrate(a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + 1);
    out.push(0.0);
    out.extend(a.iter().enumerate().map(|(i, &x)| x / (i + 1) as f64));
    out
}

/// `p(t / len)` as a polynomial in `t`.
pub fn rescale(p: &[f64], len: f64) -> Vec<f64> {
    let mut f = 1.0;
    p.iter()
        .map(|&a| {
            let v = a * f;
            f /= len;
            v
        })
        .collect()
}

/// Quintic smoothstep `10t^3 - 15t^4 + 6t^5`: 0 at 0, 1 at 1, first and
/// second derivatives vanish at both ends.
pub const SMOOTHSTEP: [f64; 6] = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_matches_manual() {
        let c = [1.0, 2.0, 3.0, 4.0];
        // 2 + 6t + 12t^2 at t=2 -> 62 ; 6 + 24t -> 54 ; 24
        assert_eq!(eval_derivative(&c, 2.0, 1), 62.0);
        assert_eq!(eval_derivative(&c, 2.0, 2), 54.0);
        assert_eq!(eval_derivative(&c, 2.0, 3), 24.0);
        assert_eq!(eval_derivative(&c, 2.0, 4), 0.0);
    }

    #[test]
    fn smoothstep_ends() {
        assert_eq!(eval(&SMOOTHSTEP, 0.0), 0.0);
        assert!((eval(&SMOOTHSTEP, 1.0) - 1.0).abs() < 1e-15);
        for k in 1..=2 {
            assert_eq!(eval_derivative(&SMOOTHSTEP, 0.0, k), 0.0);
            assert!(eval_derivative(&SMOOTHSTEP, 1.0, k).abs() < 1e-12);
        }
        let s = rescale(&SMOOTHSTEP, 0.5);
        assert!((eval(&s, 0.25) - eval(&SMOOTHSTEP, 0.5)).abs() < 1e-15);
    }

    #[test]
    fn integrate_mul() {
        let p = mul(&[1.0, 1.0], &[1.0, -1.0]); // 1 - t^2
        let q = integrate(&p);
        assert!((eval(&q, 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(add(&[1.0], &scale(&[0.0, 2.0], 0.5)), vec![1.0, 1.0]);
    }
}

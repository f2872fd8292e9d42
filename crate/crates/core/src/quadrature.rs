//! Globally adaptive Gauss–Legendre quadrature.
//!
//! Each panel carries a 15-point rule on the whole panel and on its two
//! halves; the difference is the panel's error estimate. The panel with the
//! largest estimate is split until the summed estimate meets the tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const ORDER: usize = 15;
const MAX_PANELS: usize = 4000;

/// Default absolute tolerance for expectations against mark laws.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

fn rule() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static RULE: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        for i in 0..n {
            // Newton iteration on P_n from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn gauss<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        sum += w * f(mid + half * x);
    }
    sum * half
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    error: f64,
}

impl Panel {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64) -> Self {
        let m = 0.5 * (a + b);
        let left = gauss(f, a, m);
        let right = gauss(f, m, b);
        let error = (left + right - whole).abs();
        Panel {
            a,
            b,
            left,
            right,
            error,
        }
    }

    fn value(&self) -> f64 {
        self.left + self.right
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over the finite interval `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "integration bounds must be finite, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            panels: 0,
        });
    }
    if a > b {
        let r = integrate(f, b, a, tol)?;
        return Ok(QuadResult {
            value: -r.value,
            ..r
        });
    }

    let initial = 4;
    let width = (b - a) / initial as f64;
    let mut heap = BinaryHeap::with_capacity(64);
    for k in 0..initial {
        let lo = a + width * k as f64;
        let hi = if k + 1 == initial { b } else { lo + width };
        let whole = gauss(&f, lo, hi);
        heap.push(Panel::new(&f, lo, hi, whole));
    }

    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value(), e + p.error));
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Divergent(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        let target = tol.max(4.0 * f64::EPSILON * value.abs());
        if error <= target {
            return Ok(QuadResult {
                value,
                error,
                panels: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        if heap.len() + 2 > MAX_PANELS || m <= worst.a || m >= worst.b {
            heap.push(worst);
            return Err(Error::Quadrature {
                estimate: value,
                achieved: error,
                tolerance: tol,
            });
        }
        heap.push(Panel::new(&f, worst.a, m, worst.left));
        heap.push(Panel::new(&f, m, worst.b, worst.right));
    }
}

/// Integrates over `[a, +inf)` through `y = a + scale * t / (1 - t)`.
///
/// `scale` should match the decay length of the integrand.
pub fn integrate_upper<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    tol: f64,
) -> Result<QuadResult> {
    let mapped = |t: f64| {
        let s = 1.0 - t;
        let y = a + scale * t / s;
        let jac = scale / (s * s);
        let v = f(y);
        if v == 0.0 {
            0.0
        } else {
            v * jac
        }
    };
    integrate(mapped, 0.0, 1.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        // A 15-point rule is exact up to degree 29.
        let r = gauss(&|x: f64| x.powi(28), -1.0, 1.0);
        assert!((r - 2.0 / 29.0).abs() < 1e-15);
        let (_, w) = rule();
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn finite_interval() {
        let r = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        let r = integrate(|x: f64| x.sqrt(), 0.0, 1.0, 1e-10).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let r = integrate(|x: f64| x, 1.0, 0.0, 1e-12).unwrap();
        assert!((r.value + 0.5).abs() < 1e-14);
    }

    #[test]
    fn semi_infinite_exponential() {
        let r = integrate_upper(|y: f64| 10.0 * (-9.0 * y).exp(), 0.0, 0.1, 1e-12).unwrap();
        assert!((r.value - 10.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn divergent_integral_is_reported() {
        let err = integrate_upper(|y: f64| (0.5 * y).exp(), 0.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. } | Error::Divergent(_)));
    }
}

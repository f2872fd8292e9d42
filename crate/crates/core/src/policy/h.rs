//! The decreasing map `h(pi) = mu + lambda E[f(Y) / (1 + pi f(Y))^(1 - gamma)]`
//! and its inverse.

use crate::error::{Error, Result};
use crate::frictions::ConstraintSet;
use crate::market::{FeasibleRange, JumpTransform, RegimeMarketParams};
use crate::mpp::JumpDistribution;
use crate::quadrature::DEFAULT_TOLERANCE;

/// Absolute tolerance on `pi` for the bisection in [`h_inverse`].
pub const INVERSE_TOLERANCE: f64 = 1e-12;

const GROWTH_LIMIT: f64 = 18_446_744_073_709_551_616.0; // 2^64
const MAX_STEPS: usize = 200;

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "risk aversion exponent must lie in [0, 1), got {gamma}"
        )))
    }
}

fn check_feasible(params: &RegimeMarketParams, pi: f64) -> Result<()> {
    let range = params.feasible_range();
    if !pi.is_finite() || !range.contains(pi) {
        return Err(Error::Infeasible(format!(
            "1 + pi f(y) > 0 fails on the support for pi = {pi}; feasible weights are {range}"
        )));
    }
    Ok(())
}

/// Which integrand is being integrated: `h` has `(1 + pi f)^(gamma - 1)`
/// against `f`, `h'` has `(1 + pi f)^(gamma - 2)` against `f^2`.
#[derive(Clone, Copy)]
enum Integrand {
    Value,
    Derivative,
}

/// Exponential tails need the integrand's exponential growth rate below the
/// tail decay rate of the density.
fn check_tail(params: &RegimeMarketParams, gamma: f64, pi: f64, which: Integrand) -> Result<()> {
    if params.transform != JumpTransform::Exponential {
        return Ok(());
    }
    let (growth, rate) = match params.jumps {
        JumpDistribution::ExponentialPositive { rate } => {
            let growth = match (which, pi == 0.0) {
                (Integrand::Value, true) => 1.0,
                (Integrand::Derivative, true) => 2.0,
                (_, false) => gamma,
            };
            (growth, rate)
        }
        JumpDistribution::ExponentialNegative { rate } if pi == 1.0 => {
            let growth = match which {
                Integrand::Value => 1.0 - gamma,
                Integrand::Derivative => 2.0 - gamma,
            };
            (growth, rate)
        }
        _ => return Ok(()),
    };
    if rate > growth {
        Ok(())
    } else {
        Err(Error::Divergent(format!(
            "the integral against {} diverges at pi = {pi}: tail growth rate {growth} >= decay rate {rate}",
            params.jumps
        )))
    }
}

/// `h(pi)`; MGF closed forms at `pi = 0` and `pi = 1` for the exponential transform.
pub fn h_value(params: &RegimeMarketParams, gamma: f64, pi: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_feasible(params, pi)?;
    if params.intensity == 0.0 {
        return Ok(params.drift);
    }
    if params.transform == JumpTransform::Exponential && (pi == 0.0 || pi == 1.0) {
        check_tail(params, gamma, pi, Integrand::Value)?;
        let m = |s: f64| params.jumps.mgf(s);
        let integral = if pi == 0.0 {
            m(1.0)? - 1.0
        } else {
            m(gamma)? - m(gamma - 1.0)?
        };
        return Ok(params.drift + params.intensity * integral);
    }
    h_value_quadrature(params, gamma, pi)
}

/// `h(pi)` by adaptive quadrature only, never through the MGF.
pub fn h_value_quadrature(params: &RegimeMarketParams, gamma: f64, pi: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_feasible(params, pi)?;
    if params.intensity == 0.0 {
        return Ok(params.drift);
    }
    check_tail(params, gamma, pi, Integrand::Value)?;
    let t = params.transform;
    let integral = params
        .jumps
        .expect_signed_log(
            |y| {
                let (sign, log_f) = t.signed_log_f(y);
                let log_factor = t.log_factor(pi, y).unwrap_or(f64::NAN);
                (sign, log_f + (gamma - 1.0) * log_factor)
            },
            DEFAULT_TOLERANCE,
        )?
        .value;
    Ok(params.drift + params.intensity * integral)
}

/// `h'(pi) = lambda (gamma - 1) E[f^2 / (1 + pi f)^(2 - gamma)]`.
pub fn h_derivative(params: &RegimeMarketParams, gamma: f64, pi: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_feasible(params, pi)?;
    if params.intensity == 0.0 {
        return Ok(0.0);
    }
    check_tail(params, gamma, pi, Integrand::Derivative)?;
    let t = params.transform;
    let integral = params
        .jumps
        .expect_signed_log(
            |y| {
                let (sign, log_f) = t.signed_log_f(y);
                let log_factor = t.log_factor(pi, y).unwrap_or(f64::NAN);
                (sign * sign, 2.0 * log_f + (gamma - 2.0) * log_factor)
            },
            DEFAULT_TOLERANCE,
        )?
        .value;
    Ok(params.intensity * (gamma - 1.0) * integral)
}

/// A bisection bracket `lo <= hi` with `h(lo) >= target >= h(hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HBracket {
    pub lo: f64,
    pub hi: f64,
    pub h_lo: f64,
    pub h_hi: f64,
}

impl HBracket {
    /// The end whose `h` is closest to the target.
    pub fn best(&self, target: f64) -> f64 {
        if (self.h_lo - target).abs() <= (self.h_hi - target).abs() {
            self.lo
        } else {
            self.hi
        }
    }
}

/// Search interval `K` intersected with the feasible weights, as
/// `(lo, lo_closed, hi, hi_closed)`.
pub(crate) fn search_domain(params: &RegimeMarketParams, k: &ConstraintSet) -> FeasibleRange {
    let feas = params.feasible_range();
    let (klo, khi) = (k.lo().to_f64(), k.hi().to_f64());
    let (lo, lo_closed) = if klo > feas.lo || (klo == feas.lo && feas.lo_closed) {
        (klo, klo.is_finite())
    } else {
        (feas.lo, feas.lo_closed)
    };
    let (hi, hi_closed) = if khi < feas.hi || (khi == feas.hi && feas.hi_closed) {
        (khi, khi.is_finite())
    } else {
        (feas.hi, feas.hi_closed)
    };
    FeasibleRange {
        lo,
        lo_closed,
        hi,
        hi_closed,
    }
}

/// Next trial point moving away from 0 in direction `dir` from `x`, never
/// leaving the domain end `end` (excluded when open).
pub(crate) fn next_trial(x: f64, dir: f64, end: f64, end_closed: bool) -> Option<f64> {
    let doubled = if x == 0.0 { dir } else { 2.0 * x };
    let beyond = if dir > 0.0 { doubled >= end } else { doubled <= end };
    if !beyond {
        return Some(doubled);
    }
    if end_closed && x != end {
        return Some(end);
    }
    let mid = 0.5 * (x + end);
    (mid != x && mid != end).then_some(mid)
}

/// Brackets the solution of `h(pi) = target` for `pi` in `K` with `1 + pi f > 0`,
/// then bisects to [`INVERSE_TOLERANCE`].
pub fn h_inverse_bracket(
    params: &RegimeMarketParams,
    gamma: f64,
    target: f64,
    k: &ConstraintSet,
) -> Result<HBracket> {
    check_gamma(gamma)?;
    if !target.is_finite() {
        return Err(Error::InvalidParameter(format!("target must be finite, got {target}")));
    }
    let h = |pi: f64| h_value(params, gamma, pi);
    let dom = search_domain(params, k);
    let h0 = h(0.0)?;
    if h0 == target {
        return Ok(HBracket {
            lo: 0.0,
            hi: 0.0,
            h_lo: h0,
            h_hi: h0,
        });
    }
    // h is decreasing: a smaller target lies to the right of 0.
    let dir = if target < h0 { 1.0 } else { -1.0 };
    let (end, end_closed) = if dir > 0.0 {
        (dom.hi, dom.hi_closed)
    } else {
        (dom.lo, dom.lo_closed)
    };
    let (mut inner, mut h_inner) = (0.0, h0);
    let mut trial = 0.0;
    let mut steps = 0;
    let (outer, h_outer) = loop {
        let next = next_trial(trial, dir, end, end_closed);
        let Some(next) = next.filter(|v| v.abs() <= GROWTH_LIMIT && steps < MAX_STEPS) else {
            let (a, b) = if dir > 0.0 { (h_inner, h0) } else { (h0, h_inner) };
            return Err(Error::Range {
                target,
                low: a.min(b),
                high: a.max(b),
            });
        };
        steps += 1;
        trial = next;
        let value = h(trial)?;
        let crossed = if dir > 0.0 { value <= target } else { value >= target };
        if crossed {
            break (trial, value);
        }
        inner = trial;
        h_inner = value;
    };
    let (mut lo, mut h_lo, mut hi, mut h_hi) = if dir > 0.0 {
        (inner, h_inner, outer, h_outer)
    } else {
        (outer, h_outer, inner, h_inner)
    };
    while hi - lo > INVERSE_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let value = h(mid)?;
        if value == target {
            return Ok(HBracket {
                lo: mid,
                hi: mid,
                h_lo: value,
                h_hi: value,
            });
        }
        if value > target {
            lo = mid;
            h_lo = value;
        } else {
            hi = mid;
            h_hi = value;
        }
    }
    Ok(HBracket { lo, hi, h_lo, h_hi })
}

/// `h^{-1}(target)` within `K`.
pub fn h_inverse(
    params: &RegimeMarketParams,
    gamma: f64,
    target: f64,
    k: &ConstraintSet,
) -> Result<f64> {
    h_inverse_bracket(params, gamma, target, k).map(|b| b.best(target))
}

//! Optimal portfolios and consumption for logarithmic and power utility,
//! and the conjugacy check `g(pi) - pi zeta = sup_K [g - . zeta]`.
//!
//! Log utility is the `gamma = 0` member of the power family as far as the
//! portfolio is concerned, so one solver serves both.

mod h;

pub use h::{
    h_derivative, h_inverse, h_inverse_bracket, h_value, h_value_quadrature, HBracket,
    INVERSE_TOLERANCE,
};

use std::fmt;

use crate::error::{Error, Result};
use crate::extended::ExtReal;
use crate::frictions::{conjugate_gk, effective_domain, superdifferential, ConstraintSet, MarginModel};
use crate::market::{ConsumptionRule, MarketModel, PortfolioRule, RegimeMarketParams};
use crate::mpp::Regime;

/// Distance within which a dual value just outside the effective domain is
/// treated as rounding and projected back.
pub const DOMAIN_SNAP: f64 = 1e-10;

/// Largest conjugacy residual accepted from an optimizer.
pub const CONJUGACY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    Log,
    /// `U(x) = x^gamma / gamma`, `0 < gamma < 1`.
    Power { gamma: f64 },
}

impl Utility {
    pub fn power(gamma: f64) -> Result<Self> {
        let u = Utility::Power { gamma };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Utility::Log => Ok(()),
            Utility::Power { gamma } if gamma > 0.0 && gamma < 1.0 => Ok(()),
            Utility::Power { gamma } => Err(Error::InvalidParameter(format!(
                "power utility exponent must lie in (0, 1), got {gamma}"
            ))),
        }
    }

    /// Exponent in the `h` family; 0 for log utility.
    pub fn gamma(&self) -> f64 {
        match *self {
            Utility::Log => 0.0,
            Utility::Power { gamma } => gamma,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Utility::Log => x.ln(),
            Utility::Power { gamma } => x.powf(gamma) / gamma,
        }
    }
}

impl fmt::Display for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Utility::Log => write!(f, "log"),
            Utility::Power { gamma } => write!(f, "power(gamma = {gamma})"),
        }
    }
}

/// Optimal weight of one regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioSolution {
    pub pi: f64,
    /// Branch of the piecewise formula (1 to 4) for the two named friction
    /// models; `None` for the generic solver.
    pub case: Option<u8>,
    /// `zeta = r - h(pi)`.
    pub zeta: f64,
    pub h: f64,
    /// `|g(pi) - pi zeta - conjugate(zeta)|`.
    pub residual: f64,
}

/// Dual candidate `phi(y) = (1 + pi_i f(y))^(gamma - 1)` in regime `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiSpec {
    pub pi: [f64; 2],
    pub gamma: f64,
}

impl PhiSpec {
    /// `phi = 1`.
    pub fn unit() -> Self {
        PhiSpec {
            pi: [0.0, 0.0],
            gamma: 0.0,
        }
    }

    pub fn log_phi(&self, params: &RegimeMarketParams, regime: Regime, y: f64) -> Option<f64> {
        params
            .transform
            .log_factor(self.pi[regime], y)
            .map(|l| (self.gamma - 1.0) * l)
    }

    /// `zeta^phi = r - mu - lambda E[f phi] = r - h(pi)`.
    pub fn zeta(&self, params: &RegimeMarketParams, regime: Regime) -> Result<f64> {
        Ok(params.rate - h_value(params, self.gamma, self.pi[regime])?)
    }

    /// `E[phi(Y) - 1]` in `regime`.
    pub fn compensator(&self, params: &RegimeMarketParams, regime: Regime) -> Result<f64> {
        self.moment(params, regime, 1.0)
    }

    /// `E[phi(Y)^p - 1]`.
    pub fn moment(&self, params: &RegimeMarketParams, regime: Regime, p: f64) -> Result<f64> {
        let pi = self.pi[regime];
        if pi == 0.0 || params.intensity == 0.0 {
            return Ok(0.0);
        }
        let t = params.transform;
        let e = p * (self.gamma - 1.0);
        params.jumps.expect(|y| (e * (pi * t.f(y)).ln_1p()).exp_m1())
    }
}

/// Output of the optimizers: per-regime weights, dual values and the consumption rule.
#[derive(Debug, Clone)]
pub struct Policy {
    pub utility: Utility,
    pub solutions: [PortfolioSolution; 2],
    pub consumption: ConsumptionRule,
}

impl Policy {
    pub fn weights(&self) -> [f64; 2] {
        [self.solutions[0].pi, self.solutions[1].pi]
    }

    pub fn portfolio(&self) -> PortfolioRule {
        PortfolioRule::PerRegime(self.weights())
    }

    pub fn zeta(&self) -> [f64; 2] {
        [self.solutions[0].zeta, self.solutions[1].zeta]
    }

    pub fn phi(&self) -> PhiSpec {
        PhiSpec {
            pi: self.weights(),
            gamma: self.utility.gamma(),
        }
    }
}

/// `|g(pi) - pi zeta - conjugate(zeta)|`; `zeta` must lie in the effective domain.
pub fn verify_conjugacy(
    margin: &MarginModel,
    lending_rate: f64,
    k: &ConstraintSet,
    pi: f64,
    zeta: f64,
) -> Result<f64> {
    match conjugate_gk(margin, lending_rate, k, zeta) {
        ExtReal::Finite(conj) => Ok((margin.g(lending_rate, pi) - pi * zeta - conj).abs()),
        _ => Err(Error::OutsideDomain {
            zeta,
            domain: effective_domain(margin, lending_rate, k).to_string(),
            at: None,
        }),
    }
}

fn finish(params: &RegimeMarketParams, k: &ConstraintSet, gamma: f64, pi: f64, case: Option<u8>) -> Result<PortfolioSolution> {
    let h = h_value(params, gamma, pi)?;
    let mut zeta = params.rate - h;
    let domain = effective_domain(&params.margin, params.rate, k);
    if !domain.contains(zeta) && domain.distance(zeta) <= DOMAIN_SNAP {
        zeta = domain.project(zeta);
    }
    let residual = verify_conjugacy(&params.margin, params.rate, k, pi, zeta)?;
    Ok(PortfolioSolution {
        pi,
        case,
        zeta,
        h,
        residual,
    })
}

/// Four-case optimum for differential borrowing and lending rates with `K = [0, inf)`.
pub fn optimal_portfolio_diffrates(params: &RegimeMarketParams, gamma: f64) -> Result<PortfolioSolution> {
    let MarginModel::DifferentialRates { borrow_rate } = params.margin else {
        return Err(Error::InvalidModel(format!(
            "differential-rates optimizer called with a {} margin",
            params.margin.name()
        )));
    };
    let (r, big_r) = (params.rate, borrow_rate);
    if big_r <= params.drift {
        return Err(Error::Assumption(format!(
            "borrowing rate {big_r} must exceed the drift {}",
            params.drift
        )));
    }
    let k = ConstraintSet::long_only();
    let h0 = h_value(params, gamma, 0.0)?;
    let (pi, case) = if h0 < r {
        (0.0, 1)
    } else {
        let h1 = h_value(params, gamma, 1.0)?;
        if h1 <= r {
            (h_inverse(params, gamma, r, &k)?, 2)
        } else if h1 <= big_r {
            (1.0, 3)
        } else {
            // take the side with h(pi) <= R so that r - h(pi) stays in the domain
            (h_inverse_bracket(params, gamma, big_r, &k)?.hi, 4)
        }
    };
    finish(params, &k, gamma, pi, Some(case))
}

/// Four-case optimum for short selling with a stock-loan fee and `K = (-inf, 1]`.
pub fn optimal_portfolio_short(params: &RegimeMarketParams, gamma: f64) -> Result<PortfolioSolution> {
    let MarginModel::ShortRebate { loan_fee } = params.margin else {
        return Err(Error::InvalidModel(format!(
            "short-rebate optimizer called with a {} margin",
            params.margin.name()
        )));
    };
    let r = params.rate;
    let threshold = 2.0 * r - loan_fee;
    if params.drift <= threshold {
        return Err(Error::Assumption(format!(
            "drift {} must exceed 2r - rL = {threshold}",
            params.drift
        )));
    }
    let k = ConstraintSet::no_borrowing();
    let h0 = h_value(params, gamma, 0.0)?;
    let (pi, case) = if h0 < threshold {
        // take the side with h(pi) >= 2r - rL so that r - h(pi) stays in the domain
        (h_inverse_bracket(params, gamma, threshold, &k)?.lo, 1)
    } else if h0 < r {
        (0.0, 2)
    } else {
        let h1 = h_value(params, gamma, 1.0)?;
        if h1 < r {
            (h_inverse(params, gamma, r, &k)?, 3)
        } else {
            (1.0, 4)
        }
    };
    finish(params, &k, gamma, pi, Some(case))
}

/// Position of `r - h(pi)` relative to the superdifferential of `g - indicator_K` at `pi`:
/// negative when `pi` is too small, positive when too large, zero at the optimum.
fn inclusion_sign(params: &RegimeMarketParams, k: &ConstraintSet, gamma: f64, pi: f64) -> Result<i8> {
    let pieces = params.margin.pieces(params.rate);
    let (lower, upper) = superdifferential(&pieces, k, pi);
    let q = params.rate - h_value(params, gamma, pi)?;
    Ok(if q < lower {
        -1
    } else if q > upper {
        1
    } else {
        0
    })
}

/// Optimum for any concave piecewise-linear margin and interval `K`, by
/// bisection on the monotone optimality inclusion `r - h(pi) in dg(pi)`.
pub fn optimal_portfolio_generic(
    params: &RegimeMarketParams,
    gamma: f64,
    k: &ConstraintSet,
) -> Result<PortfolioSolution> {
    h::check_gamma(gamma)?;
    let sign = |pi: f64| inclusion_sign(params, k, gamma, pi);
    let s0 = sign(0.0)?;
    if s0 == 0 {
        return finish(params, k, gamma, 0.0, None);
    }
    let dir = if s0 < 0 { 1.0 } else { -1.0 };
    let dom = h::search_domain(params, k);
    let (end, end_closed) = if dir > 0.0 {
        (dom.hi, dom.hi_closed)
    } else {
        (dom.lo, dom.lo_closed)
    };
    let mut inner = 0.0;
    let mut trial = 0.0;
    let mut steps = 0;
    let outer = loop {
        let next = h::next_trial(trial, dir, end, end_closed);
        let Some(next) = next.filter(|v| v.abs() <= 1.8e19 && steps < 200) else {
            let h_at = h_value(params, gamma, inner).ok();
            return Err(Error::Infeasible(format!(
                "no weight in K = {k} satisfies the optimality condition: r = {} and h ranges down to {} at pi = {inner}; feasible weights {}",
                params.rate,
                h_at.map_or("n/a".to_string(), |v| v.to_string()),
                params.feasible_range()
            )));
        };
        steps += 1;
        trial = next;
        let s = sign(trial)?;
        if s == 0 {
            return finish(params, k, gamma, trial, None);
        }
        if (s > 0) == (dir > 0.0) {
            break trial;
        }
        inner = trial;
    };
    let (mut lo, mut hi) = if dir > 0.0 { (inner, outer) } else { (outer, inner) };
    while hi - lo > INVERSE_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match sign(mid)? {
            0 => return finish(params, k, gamma, mid, None),
            s if s < 0 => lo = mid,
            _ => hi = mid,
        }
    }
    // Snap to a kink or an end of K inside the final bracket.
    let pieces = params.margin.pieces(params.rate);
    let snaps = pieces
        .breakpoints
        .iter()
        .copied()
        .chain(k.lo().finite())
        .chain(k.hi().finite());
    for s in snaps {
        if s >= lo - INVERSE_TOLERANCE && s <= hi + INVERSE_TOLERANCE && k.contains(s) && sign(s)? == 0 {
            return finish(params, k, gamma, s, None);
        }
    }
    // Interior of a linear piece: both ends bracket r - h(pi) = slope.
    let pick = if sign(hi)? == 0 { hi } else { lo };
    finish(params, k, gamma, pick, None)
}

/// Dispatches to the closed-form case analysis when the margin and `K` are one
/// of the two named pairs, to the generic solver otherwise.
pub fn optimal_portfolio(params: &RegimeMarketParams, gamma: f64, k: &ConstraintSet) -> Result<PortfolioSolution> {
    let sol = match params.margin {
        MarginModel::DifferentialRates { .. } if *k == ConstraintSet::long_only() => {
            optimal_portfolio_diffrates(params, gamma)?
        }
        MarginModel::ShortRebate { .. } if *k == ConstraintSet::no_borrowing() => {
            optimal_portfolio_short(params, gamma)?
        }
        _ => optimal_portfolio_generic(params, gamma, k)?,
    };
    if sol.residual > CONJUGACY_TOLERANCE {
        return Err(Error::Infeasible(format!(
            "conjugacy residual {} at pi = {} exceeds {CONJUGACY_TOLERANCE}",
            sol.residual, sol.pi
        )));
    }
    Ok(sol)
}

fn solve_regimes(model: &MarketModel, gamma: f64, k: &ConstraintSet) -> Result<[PortfolioSolution; 2]> {
    let solve = |i: usize| {
        optimal_portfolio(model.regime(i), gamma, k).map_err(|e| match e {
            Error::Range { target, low, high } => Error::Infeasible(format!(
                "regime {i}: rate band target {target} lies outside the attainable h-range [{low}, {high}]"
            )),
            Error::Infeasible(msg) => Error::Infeasible(format!("regime {i}: {msg}")),
            Error::Assumption(msg) => Error::Assumption(format!("regime {i}: {msg}")),
            other => other,
        })
    };
    Ok([solve(0)?, solve(1)?])
}

/// Log-optimal weights per regime with consumption `c_t = x V_t^{1,pi,0} / (T + 1)`.
pub fn log_optimal_policy(model: &MarketModel, k: &ConstraintSet, x: f64, horizon: f64) -> Result<Policy> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::InvalidParameter(format!("initial wealth must be positive, got {x}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    Ok(Policy {
        utility: Utility::Log,
        solutions: solve_regimes(model, 0.0, k)?,
        consumption: ConsumptionRule::Proportional(x / (horizon + 1.0)),
    })
}

/// Power-optimal weights without consumption. The coefficients must be
/// deterministic, i.e. both regimes identical.
pub fn power_optimal_policy(model: &MarketModel, gamma: f64, k: &ConstraintSet) -> Result<Policy> {
    let utility = Utility::power(gamma)?;
    if !model.is_single_regime() {
        return Err(Error::Assumption(
            "power utility requires deterministic coefficients; the two regimes differ".into(),
        ));
    }
    Ok(Policy {
        utility,
        solutions: solve_regimes(model, gamma, k)?,
        consumption: ConsumptionRule::None,
    })
}

/// Optimal policy for either utility.
pub fn optimal_policy(model: &MarketModel, utility: Utility, k: &ConstraintSet, x: f64, horizon: f64) -> Result<Policy> {
    match utility {
        Utility::Log => log_optimal_policy(model, k, x, horizon),
        Utility::Power { gamma } => power_optimal_policy(model, gamma, k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::JumpTransform;
    use crate::mpp::JumpDistribution;

    fn fig1(gamma_rate: f64) -> RegimeMarketParams {
        RegimeMarketParams {
            rate: gamma_rate,
            drift: -0.05,
            intensity: 1.0,
            jumps: JumpDistribution::exponential_positive(10.0).unwrap(),
            transform: JumpTransform::Exponential,
            margin: MarginModel::DifferentialRates { borrow_rate: 0.05 },
        }
    }

    fn fig3() -> RegimeMarketParams {
        RegimeMarketParams {
            rate: 0.03,
            drift: 0.07,
            intensity: 1.0,
            jumps: JumpDistribution::exponential_negative(10.0).unwrap(),
            transform: JumpTransform::Exponential,
            margin: MarginModel::ShortRebate { loan_fee: 0.05 },
        }
    }

    #[test]
    fn diffrates_cases() {
        let s = optimal_portfolio_diffrates(&fig1(0.07), 0.5).unwrap();
        assert_eq!((s.pi, s.case), (0.0, Some(1)));
        let s = optimal_portfolio_diffrates(&fig1(0.045), 0.0).unwrap();
        assert_eq!(s.case, Some(2));
        assert!((s.pi - 0.746_061_854).abs() < 1e-8);
        let s = optimal_portfolio_diffrates(&fig1(0.045), 0.25).unwrap();
        assert_eq!((s.pi, s.case), (1.0, Some(3)));
        let s = optimal_portfolio_diffrates(&fig1(0.045), 0.5).unwrap();
        assert_eq!(s.case, Some(4));
        assert!((s.pi - 1.028_899_266_7).abs() < 1e-8);
        assert!(s.zeta >= -0.005 && s.residual <= 1e-12);
    }

    #[test]
    fn short_case_one() {
        let s = optimal_portfolio_short(&fig3(), 0.5).unwrap();
        assert_eq!(s.case, Some(1));
        assert!((s.pi + 9.2294).abs() < 1e-3);
        assert!(s.zeta <= 0.02 && s.residual <= 1e-9);
    }

    #[test]
    fn assumptions_are_enforced() {
        let mut p = fig1(0.045);
        p.drift = 0.06;
        assert!(matches!(optimal_portfolio_diffrates(&p, 0.5), Err(Error::Assumption(_))));
        let mut p = fig3();
        p.drift = 0.0;
        assert!(matches!(optimal_portfolio_short(&p, 0.5), Err(Error::Assumption(_))));
    }

    #[test]
    fn generic_solver_agrees_with_closed_forms() {
        for gamma in [0.0, 0.25, 0.5, 0.75] {
            let p = fig1(0.045);
            let closed = optimal_portfolio_diffrates(&p, gamma).unwrap();
            let generic = optimal_portfolio_generic(&p, gamma, &ConstraintSet::long_only()).unwrap();
            assert!((closed.pi - generic.pi).abs() < 1e-9, "gamma {gamma}");
            let p = fig3();
            let closed = optimal_portfolio_short(&p, gamma).unwrap();
            let generic = optimal_portfolio_generic(&p, gamma, &ConstraintSet::no_borrowing()).unwrap();
            assert!((closed.pi - generic.pi).abs() < 1e-9 * closed.pi.abs().max(1.0), "gamma {gamma}");
        }
    }

    #[test]
    fn frictionless_without_jumps_is_unbounded() {
        let p = RegimeMarketParams {
            rate: 0.01,
            drift: 0.05,
            intensity: 0.0,
            jumps: JumpDistribution::degenerate(0.0).unwrap(),
            transform: JumpTransform::Exponential,
            margin: MarginModel::Frictionless,
        };
        let m = MarketModel::single(p).unwrap();
        let err = log_optimal_policy(&m, &ConstraintSet::unconstrained(), 1.0, 1.0).unwrap_err();
        assert!(err.is_infeasibility(), "{err}");
    }

    #[test]
    fn conjugacy_residual_examples() {
        let m = MarginModel::DifferentialRates { borrow_rate: 0.05 };
        let k = ConstraintSet::long_only();
        assert!(verify_conjugacy(&m, 0.045, &k, 0.7, 0.0).unwrap() < 1e-15);
        assert!(verify_conjugacy(&m, 0.045, &k, 1.8, -0.005).unwrap() < 1e-15);
        assert!(verify_conjugacy(&m, 0.045, &k, 0.0, 0.01).unwrap() < 1e-15);
        assert!(verify_conjugacy(&m, 0.045, &k, 0.0, -0.01).is_err());
    }
}

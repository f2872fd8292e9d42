//! Per-regime market coefficients and exact pathwise construction of the
//! money account, stock price and wealth processes.
//!
//! Between jumps every process here is the exponential of a linear function
//! of time, so paths are stored as piecewise-linear logarithms and evaluated
//! in closed form.

mod log_path;
mod paths;

pub use log_path::LogPath;
pub use paths::{
    gross_wealth_log, gross_wealth_path, stock_path, wealth_path, wealth_path_unchecked,
    ConsumptionRule, PortfolioRule, WealthPath, DEFAULT_REPORT_POINTS,
};

use std::fmt;

use crate::error::{Error, Result};
use crate::extended::ExtReal;
use crate::frictions::MarginModel;
use crate::mpp::{GeneratorMatrix, JumpDistribution, Regime};

/// Above this mark `e^y` is evaluated in log space.
const LARGE_MARK: f64 = 30.0;

/// Map from mark to relative price jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpTransform {
    /// `f(y) = e^y - 1`.
    Exponential,
    /// `f(y) = y`, requires `y > -1` on the support.
    Identity,
}

impl JumpTransform {
    pub fn f(self, y: f64) -> f64 {
        match self {
            JumpTransform::Exponential => y.exp_m1(),
            JumpTransform::Identity => y,
        }
    }

    /// `ln(1 + pi f(y))`, or `None` when `1 + pi f(y) <= 0`. Finite for
    /// large exponential marks where `f(y)` itself overflows.
    pub fn log_factor(self, pi: f64, y: f64) -> Option<f64> {
        if self == JumpTransform::Exponential && y > LARGE_MARK && pi > 0.0 {
            // 1 + pi (e^y - 1) = e^y (pi + (1 - pi) e^-y)
            let rest = pi + (1.0 - pi) * (-y).exp();
            return (rest > 0.0).then(|| y + rest.ln());
        }
        if self == JumpTransform::Exponential && y < -LARGE_MARK {
            if pi == 1.0 {
                return Some(y);
            }
            let v = (1.0 - pi) + pi * y.exp();
            return (v > 0.0).then(|| v.ln());
        }
        let u = pi * self.f(y);
        if u > -1.0 {
            Some(u.ln_1p())
        } else {
            None
        }
    }

    /// `(sign f(y), ln |f(y)|)`, with `ln |f(0)| = -inf`.
    pub fn signed_log_f(self, y: f64) -> (f64, f64) {
        match self {
            JumpTransform::Exponential if y > LARGE_MARK => (1.0, y + (-(-y).exp()).ln_1p()),
            _ => {
                let f = self.f(y);
                (f.signum(), f.abs().ln())
            }
        }
    }

    /// Image of `[lo, hi]` under `f` (increasing in both cases).
    pub fn image(self, lo: ExtReal, hi: ExtReal) -> (ExtReal, ExtReal) {
        let map = |v: ExtReal| match (self, v) {
            (JumpTransform::Exponential, ExtReal::NegInf) => ExtReal::Finite(-1.0),
            (_, ExtReal::Finite(y)) => ExtReal::Finite(self.f(y)),
            (_, other) => other,
        };
        (map(lo), map(hi))
    }

    pub fn name(self) -> &'static str {
        match self {
            JumpTransform::Exponential => "exponential",
            JumpTransform::Identity => "identity",
        }
    }
}

/// Coefficients of one regime.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeMarketParams {
    /// Lending rate `r`.
    pub rate: f64,
    /// Stock appreciation rate `mu`.
    pub drift: f64,
    /// Leaving rate of the regime, which is also the jump intensity of the stock.
    pub intensity: f64,
    pub jumps: JumpDistribution,
    pub transform: JumpTransform,
    pub margin: MarginModel,
}

/// Range of `f` over the support of the mark law. `lo_attained` is false
/// only when `lo = -1` is approached in the tail and never reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRange {
    pub lo: f64,
    pub lo_attained: bool,
    pub hi: f64,
}

/// Portfolio weights `pi` with `1 + pi f > 0` on the whole support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleRange {
    pub lo: f64,
    pub lo_closed: bool,
    pub hi: f64,
    pub hi_closed: bool,
}

impl FeasibleRange {
    pub fn contains(&self, pi: f64) -> bool {
        let above = if self.lo_closed { pi >= self.lo } else { pi > self.lo };
        let below = if self.hi_closed { pi <= self.hi } else { pi < self.hi };
        above && below
    }
}

impl fmt::Display for FeasibleRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.lo_closed { '[' } else { '(' };
        let close = if self.hi_closed { ']' } else { ')' };
        write!(f, "{open}{}, {}{close}", self.lo, self.hi)
    }
}

impl RegimeMarketParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rate", self.rate), ("drift", self.drift)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        if !(self.intensity.is_finite() && self.intensity >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "intensity must be finite and nonnegative, got {}",
                self.intensity
            )));
        }
        self.jumps.validate()?;
        self.margin.validate(self.rate)?;
        let range = self.jump_range();
        if range.lo < -1.0 || (range.lo == -1.0 && range.lo_attained) {
            return Err(Error::InvalidModel(format!(
                "{} transform of {} reaches f = {} <= -1 on the support",
                self.transform.name(),
                self.jumps,
                range.lo
            )));
        }
        Ok(())
    }

    pub fn jump_range(&self) -> JumpRange {
        let support = self.jumps.support();
        let (lo, hi) = self.transform.image(support.lo, support.hi);
        JumpRange {
            lo: lo.to_f64(),
            lo_attained: support.lo.is_finite(),
            hi: hi.to_f64(),
        }
    }

    /// `{pi : 1 + pi f(y) > 0 for every y in the support}`.
    pub fn feasible_range(&self) -> FeasibleRange {
        let JumpRange {
            lo,
            lo_attained,
            hi,
        } = self.jump_range();
        // Upper end: constrained by the most negative jump.
        let (upper, upper_closed) = if lo >= 0.0 {
            (f64::INFINITY, false)
        } else if lo_attained {
            (-1.0 / lo, false)
        } else {
            // f > -1 strictly, so 1 + pi f > 0 for pi <= 1 = -1/lo
            (-1.0 / lo, true)
        };
        // Lower end: constrained by the largest positive jump, always attained if finite.
        let (lower, lower_closed) = if hi <= 0.0 {
            (f64::NEG_INFINITY, false)
        } else if hi.is_finite() {
            (-1.0 / hi, false)
        } else {
            (0.0, true)
        };
        FeasibleRange {
            lo: lower,
            lo_closed: lower_closed,
            hi: upper,
            hi_closed: upper_closed,
        }
    }

    /// Excess-return slope `r + g(pi) + pi (mu - r)` of the log gross wealth.
    pub fn wealth_slope(&self, pi: f64) -> f64 {
        self.rate + self.margin.g(self.rate, pi) + pi * (self.drift - self.rate)
    }

    /// `E[f(Y)^k]` for the integer moments used by control variates.
    pub fn jump_moment(&self, k: i32) -> Result<f64> {
        let t = self.transform;
        self.jumps.expect(|y| t.f(y).powi(k))
    }

    /// True when `E[|f(Y)|^k] < inf`.
    pub fn has_jump_moment(&self, k: u32) -> bool {
        match (self.transform, &self.jumps) {
            (JumpTransform::Exponential, JumpDistribution::ExponentialPositive { rate }) => {
                *rate > k as f64
            }
            _ => true,
        }
    }
}

/// Two-regime market. The generator is read off the regime intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    pub regimes: [RegimeMarketParams; 2],
}

impl MarketModel {
    pub fn new(regimes: [RegimeMarketParams; 2]) -> Result<Self> {
        for (i, p) in regimes.iter().enumerate() {
            p.validate()
                .map_err(|e| Error::InvalidModel(format!("regime {i}: {e}")))?;
        }
        Ok(MarketModel { regimes })
    }

    /// Both regimes share one parameter set, so the chain only clocks the jumps.
    pub fn single(params: RegimeMarketParams) -> Result<Self> {
        Self::new([params.clone(), params])
    }

    pub fn regime(&self, i: Regime) -> &RegimeMarketParams {
        &self.regimes[i]
    }

    pub fn generator(&self) -> GeneratorMatrix {
        GeneratorMatrix::new(self.regimes[0].intensity, self.regimes[1].intensity)
            .expect("intensities validated")
    }

    pub fn distributions(&self) -> [JumpDistribution; 2] {
        [self.regimes[0].jumps.clone(), self.regimes[1].jumps.clone()]
    }

    /// Deterministic coefficients: both regimes identical.
    pub fn is_single_regime(&self) -> bool {
        self.regimes[0] == self.regimes[1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(jumps: JumpDistribution, transform: JumpTransform) -> RegimeMarketParams {
        RegimeMarketParams {
            rate: 0.03,
            drift: 0.07,
            intensity: 1.0,
            jumps,
            transform,
            margin: MarginModel::Frictionless,
        }
    }

    #[test]
    fn feasible_ranges() {
        let p = params(
            JumpDistribution::exponential_positive(10.0).unwrap(),
            JumpTransform::Exponential,
        );
        let r = p.feasible_range();
        assert_eq!((r.lo, r.lo_closed, r.hi), (0.0, true, f64::INFINITY));
        let p = params(
            JumpDistribution::exponential_negative(10.0).unwrap(),
            JumpTransform::Exponential,
        );
        let r = p.feasible_range();
        assert_eq!((r.lo, r.hi, r.hi_closed), (f64::NEG_INFINITY, 1.0, true));
        assert!(r.contains(1.0) && !r.contains(1.0 + 1e-12));
        let p = params(
            JumpDistribution::two_point(-0.5, 0.25, 0.5).unwrap(),
            JumpTransform::Identity,
        );
        let r = p.feasible_range();
        assert_eq!((r.lo, r.hi), (-4.0, 2.0));
        assert!(!r.contains(2.0) && !r.contains(-4.0) && r.contains(1.99));
    }

    #[test]
    fn identity_transform_must_stay_above_minus_one() {
        let p = params(
            JumpDistribution::two_point(-1.0, 0.2, 0.5).unwrap(),
            JumpTransform::Identity,
        );
        assert!(p.validate().is_err());
        let p = params(
            JumpDistribution::exponential_negative(3.0).unwrap(),
            JumpTransform::Identity,
        );
        assert!(p.validate().is_err());
    }

    #[test]
    fn log_factor_rejects_bankruptcy() {
        let t = JumpTransform::Identity;
        assert_eq!(t.log_factor(2.0, -0.5), None);
        assert!((t.log_factor(1.0, 0.5).unwrap() - 1.5f64.ln()).abs() < 1e-15);
        let e = JumpTransform::Exponential;
        assert!((e.log_factor(1.0, 0.3).unwrap() - 0.3).abs() < 1e-15);
    }
}

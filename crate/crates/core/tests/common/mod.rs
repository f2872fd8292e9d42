#![allow(dead_code)]

use jumpdual::verify::Scenario;
use jumpdual::{ConstraintSet, JumpDistribution, JumpTransform, MarginModel, MarketModel, RegimeMarketParams};

/// Differential lending and borrowing rates with upward jumps.
pub fn fig1() -> RegimeMarketParams {
    RegimeMarketParams {
        rate: 0.045,
        drift: -0.05,
        intensity: 1.0,
        jumps: JumpDistribution::exponential_positive(10.0).unwrap(),
        transform: JumpTransform::Exponential,
        margin: MarginModel::DifferentialRates { borrow_rate: 0.05 },
    }
}

/// Short selling against a stock-loan fee with downward jumps.
pub fn fig3() -> RegimeMarketParams {
    RegimeMarketParams {
        rate: 0.03,
        drift: 0.07,
        intensity: 1.0,
        jumps: JumpDistribution::exponential_negative(10.0).unwrap(),
        transform: JumpTransform::Exponential,
        margin: MarginModel::ShortRebate { loan_fee: 0.05 },
    }
}

/// A second regime with its own rates, drift and jump law.
pub fn calm() -> RegimeMarketParams {
    RegimeMarketParams {
        rate: 0.02,
        drift: -0.02,
        intensity: 1.0,
        jumps: JumpDistribution::exponential_positive(12.0).unwrap(),
        transform: JumpTransform::Exponential,
        margin: MarginModel::DifferentialRates { borrow_rate: 0.06 },
    }
}

pub fn single(params: RegimeMarketParams, constraint: ConstraintSet) -> Scenario {
    Scenario {
        model: MarketModel::single(params).unwrap(),
        constraint,
        horizon: 1.0,
        wealth: 1.0,
        initial_regime: 0,
    }
}

pub fn two_regime(start: usize) -> Scenario {
    Scenario {
        model: MarketModel::new([fig1(), calm()]).unwrap(),
        constraint: ConstraintSet::long_only(),
        horizon: 1.0,
        wealth: 1.0,
        initial_regime: start,
    }
}

/// `E[e^{sY}]` for `Exp+(a)`.
pub fn mgf_pos(a: f64, s: f64) -> f64 {
    a / (a - s)
}

/// `E[e^{sY}]` for `Exp-(a)`.
pub fn mgf_neg(a: f64, s: f64) -> f64 {
    a / (a + s)
}

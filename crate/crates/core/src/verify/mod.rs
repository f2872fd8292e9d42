//! Monte Carlo and pathwise checks of the duality machinery: state prices,
//! the budget inequality, expected utility, the dual functional and the
//! grid-search optimality test.
//!
//! Paths are simulated in parallel from per-path random streams and reduced
//! in path order with pairwise summation, so every estimate is bit-identical
//! for a given seed and path count.

mod checks;
mod grid;
mod state_price;

pub use checks::{
    budget_check, dual_functional, duality_gap, martingale_factor, mc_expected_utility,
    state_price_inverse_check, wealth_identity_check, GapReport,
};
pub use grid::{grid_points, grid_search_constant_portfolio, GridPoint, GridSearch, GridSpec};
pub use state_price::{simulate_state_price, StatePrice, StatePricePath};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frictions::ConstraintSet;
use crate::market::MarketModel;
use crate::mpp::{simulate_path, MarkedPointPath, Regime};

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
    pub seed: u64,
    /// Paths on which consumption exhausted wealth before the horizon.
    pub ruined: usize,
}

impl McEstimate {
    /// Sample mean and `std / sqrt(N)`; any `-inf` sample makes the mean `-inf`.
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len();
        let ruined = samples.iter().filter(|v| !v.is_finite()).count();
        if n == 0 {
            return McEstimate {
                mean: f64::NAN,
                stderr: f64::NAN,
                paths: 0,
                seed,
                ruined,
            };
        }
        if ruined > 0 {
            return McEstimate {
                mean: f64::NEG_INFINITY,
                stderr: f64::INFINITY,
                paths: n,
                seed,
                ruined,
            };
        }
        let mean = pairwise_sum(samples) / n as f64;
        let stderr = if n > 1 {
            let dev: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        McEstimate {
            mean,
            stderr,
            paths: n,
            seed,
            ruined,
        }
    }

    /// `|mean - target| <= k * stderr + floor`.
    pub fn agrees_with(&self, target: f64, k: f64, floor: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr + floor
    }
}

/// Pairwise summation with a fixed split, independent of thread scheduling.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Market, constraint set and initial conditions shared by the checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: MarketModel,
    pub constraint: ConstraintSet,
    pub horizon: f64,
    pub wealth: f64,
    pub initial_regime: Regime,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.wealth.is_finite() && self.wealth > 0.0) {
            return Err(Error::InvalidParameter(format!("initial wealth must be positive, got {}", self.wealth)));
        }
        if self.initial_regime > 1 {
            return Err(Error::InvalidParameter(format!(
                "initial regime must be 0 or 1, got {}",
                self.initial_regime
            )));
        }
        Ok(())
    }
}

/// Path count and base seed of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub paths: usize,
    pub seed: u64,
}

/// Applies `f` to paths `0..paths` in parallel and returns the results in path order.
pub fn map_paths<T, F>(scenario: &Scenario, mc: McConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&MarkedPointPath) -> Result<T> + Sync,
{
    scenario.validate()?;
    let q = scenario.model.generator();
    let dists = scenario.model.distributions();
    (0..mc.paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate_path(&q, &dists, scenario.initial_regime, scenario.horizon, mc.seed, i)?;
            f(&path)
        })
        .collect()
}

/// Estimates `E[f(path)]`.
pub fn estimate<F>(scenario: &Scenario, mc: McConfig, f: F) -> Result<McEstimate>
where
    F: Fn(&MarkedPointPath) -> Result<f64> + Sync,
{
    let samples = map_paths(scenario, mc, f)?;
    Ok(McEstimate::from_samples(&samples, mc.seed))
}

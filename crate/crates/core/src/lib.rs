//! Optimal investment and consumption in pure-jump markets driven by a
//! Markov-modulated marked point process, with margin-payment frictions,
//! plus the convex-duality and Monte Carlo machinery that verifies the
//! optimizers.

pub mod error;
pub mod extended;
pub mod frictions;
pub mod market;
pub mod mpp;
pub mod policy;
pub mod quadrature;
pub mod regime_value;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use extended::{ExtReal, Interval};
pub use frictions::{ConstraintSet, MarginModel};
pub use market::{JumpTransform, MarketModel, RegimeMarketParams};
pub use mpp::{GeneratorMatrix, JumpDistribution, MarkedPointPath, Regime, RegimePath};
pub use policy::{Policy, PortfolioSolution, Utility};

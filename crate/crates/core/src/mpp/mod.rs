//! Markov-modulated marked point process: mark laws, the two-state regime
//! chain whose jump times are the event times, and path simulation.

mod chain;
mod distribution;

pub use chain::{
    simulate_marks, simulate_marks_with, simulate_path, simulate_regime_chain,
    simulate_regime_chain_with, GeneratorMatrix, MarkedPointPath, Regime, RegimePath,
};
pub use distribution::{JumpDistribution, Support, Tabulated};

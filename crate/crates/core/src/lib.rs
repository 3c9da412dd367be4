//! Log-optimal portfolios under proportional transaction costs.
//!
//! The crate computes weights on the unit simplex that maximize the expected
//! logarithmic growth of an account rebalanced every `n` periods, both for
//! the exact objective and for its quadratic approximation, and provides the
//! tooling around them: optimality certificates, dominance and survival
//! tests, growth/variance frontiers, backtests and a sliding-window online
//! trader.

pub mod analysis;
pub mod backtest;
pub mod cli;
pub mod error;
pub mod market_data;
pub mod objective;
pub mod online;
pub mod solver;
pub mod synthetic;

pub use error::{Error, Result};

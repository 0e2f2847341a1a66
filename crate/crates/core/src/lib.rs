//! Dynamic (VaR, CoVaR) models: CoCAViaR recursions, two-step M-estimation
//! with asymptotic inference, an ECCC-GARCH simulator, a CCC-GARCH
//! benchmark, and forecast comparison backtests.

pub mod backtest;
pub mod cocaviar;
pub mod error;
pub mod estimation;
pub mod garch;
pub mod inference;
pub mod io;
pub mod optim;
pub mod par;
pub mod scoring;
pub mod simulation;
pub mod stats;
pub mod types;

pub use error::{Error, Result};
pub use types::*;

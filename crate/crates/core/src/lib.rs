//! Multi-curve Heath–Jarrow–Morton toolkit.
//!
//! * [`qe`]: exact algebra of quasi-exponential functions.
//! * [`curves`]: forward curves, bond prices, spreads.
//! * [`hjm`]: volatility specifications, drifts and Monte Carlo simulation.
//! * [`fdr`]: finite-dimensional realizations and their state processes.
//! * [`geometry`]: Lie brackets, span estimates and tangency checks.
//! * [`calibration`]: two-stage calibration of the three-curve Hull–White model.

pub mod calibration;
pub mod curves;
pub mod error;
pub mod fdr;
pub mod geometry;
pub mod hjm;
pub mod qe;
pub mod rng;

pub use error::{Error, Result};

//! Monte Carlo simulation and transmit-power optimization for relay- and RIS-assisted
//! industrial subnetworks.

pub mod campaign;
pub mod classify;
pub mod cli;
pub mod error;
pub mod optimizer;
pub mod protocol;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use num_complex::Complex64;

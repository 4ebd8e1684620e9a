//! Kalman filtering for linear stochastic equations driven by Brownian sheets,
//! on a uniform time-space grid.

pub mod cli;
pub mod convergence;
pub mod error;
pub mod error_surface;
pub mod filter;
pub mod grid;
pub mod kernel;
pub mod moments;
pub mod oracle;
pub mod scenario;
pub mod sheet;
pub mod simulate;
pub mod summary;
pub mod validation;

//! Configuration-driven experiment runs over `moment-mrf`: hierarchy sweeps
//! on synthetic grids, cost-volume stereo, chain oracle comparisons and
//! synthetic volume generation.

pub mod config;
pub mod error;
pub mod run;
pub mod volume;

pub use config::RunConfig;
pub use error::{CliError, Result};

//! MAP inference for Markov random fields with continuous labels through a
//! piecewise-polynomial dual and moment/sum-of-squares cones.

pub mod cones;
pub mod error;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod poly;
pub mod rounding;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};

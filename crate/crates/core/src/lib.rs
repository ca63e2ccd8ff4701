pub mod baselines;
pub mod dataset;
pub mod error;
pub mod model;
pub mod rng;
pub mod snapshot;
pub mod tasks;

pub use error::{Error, Result};

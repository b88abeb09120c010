pub mod config;
pub mod dataset;
pub mod error;
pub mod fuzzy;
pub mod ga;
pub mod imaging;
pub mod loss;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};

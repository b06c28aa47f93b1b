pub mod config;
pub mod devlab;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod rng;
pub mod selftest;
pub mod subsets;
pub mod sum;
pub mod ustat;

pub use distributions::{DiscreteFinite, DistributionSpec, Law};
pub use error::{Error, Result};
pub use estimators::EstimatorSpec;

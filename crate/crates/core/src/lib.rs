//! Sequential model-based optimization for hyperparameter optimization and
//! algorithm configuration.

pub mod acquisition;
pub mod benchmarks;
pub mod cli;
pub mod design;
pub mod intensification;
pub mod runhistory;
pub mod smbo;
pub mod space;
pub mod stats;
pub mod surrogate;
pub mod tae;

//! Experiment driver for the subspace solver: problem construction
//! (phantoms, coil maps, sampling masks, noise), configuration parsing,
//! solver dispatch, iteration logging, convergence diagnostics, and image
//! I/O.

pub mod cimg;
pub mod config;
pub mod csvlog;
pub mod denoise;
pub mod error;
pub mod mask;
pub mod noise;
pub mod phantom;
pub mod plot;
pub mod rates;
pub mod rng;
pub mod runner;
pub mod sense;

pub use config::{load_config, parse_config_str, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use runner::{build_problem, run_experiment, Diagnostics};

//! Experiment runner for `reflex-core`: TOML configs, validation, result
//! documents and CSV output, and bit-exact replay.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod io;
pub mod replay;
pub mod validate;

pub use config::ExperimentConfig;
pub use error::RunError;
pub use exec::RayonExecutor;
pub use experiment::{run, ResultDocument};

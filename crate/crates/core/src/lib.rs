//! Numerical kernels for small-noise diffusions reflected at the boundary of a
//! bounded domain.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure functions
//! of their inputs: domain geometry, the discrete Skorohod map, the controlled
//! skeleton equation, reflected Euler–Maruyama simulation on coupled dyadic
//! grids, action minimization, and the Monte Carlo probes that compare
//! simulated rare-event frequencies against minimized actions.
//!
//! Parallelism is injected through [`exec::Executor`]; every result is a
//! deterministic function of its inputs regardless of the executor used.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod brownian;
pub mod coeffs;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod ldp;
pub mod linalg;
pub mod optim;
pub mod rate;
pub mod rng;
pub mod sde;
pub mod skeleton;
pub mod skorohod;

pub use coeffs::{CoefficientField, Coefficients, DiffusionSpec, DriftSpec};
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use geometry::{DomainSpec, Shape};
pub use skorohod::{Grid, Path, ReflectedPath};

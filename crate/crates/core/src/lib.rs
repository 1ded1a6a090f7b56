//! # rwmlab
//!
//! A laboratory for random walk Metropolis (RWM) tuning on block-IID
//! targets. The library simulates the RWM chain with block-shaped Gaussian
//! proposals together with its limiting anisotropic Langevin diffusion,
//! computes closed-form scaling/shaping rules (the 0.234 acceptance rule,
//! optimal proposal covariance, exact spectral gaps, speed limits), and
//! verifies the score identities those rules rest on by Monte Carlo.
//!
//! Modules:
//! - [`linalg`], [`special`], [`rng`], [`mvn`]: deterministic numeric kernels.
//! - [`targets`]: block densities with scores, samplers and closed-form
//!   score/state covariances.
//! - [`rwm`]: the discrete Metropolis kernel and its continuous-time
//!   pure-jump embedding.
//! - [`diffusion`]: Euler-Maruyama integration of the limiting diffusions.
//! - [`tuning`]: scaling/shaping rules and spectral quantities.
//! - [`identity`]: Monte Carlo verification of score identities.
//! - [`diagnostics`]: acceptance rates, autocorrelation, marginal distances.

pub mod chain;
pub mod diagnostics;
pub mod diffusion;
pub mod error;
pub mod identity;
pub mod linalg;
pub mod mvn;
pub mod parallel;
pub mod rng;
pub mod rwm;
pub mod special;
pub mod targets;
pub mod tuning;

pub use error::{Error, Result};
pub use linalg::{frobenius, Matrix, SpdMatrix};
pub use rng::RngStream;

//! Spectral edge-perturbation augmentation for graph contrastive learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: dense symmetric graphs, Laplacians, edge flips and generators.
//! - [`spectral`]: symmetric eigensolvers (dense and Lanczos), the spectrum-norm
//!   objective with its analytic gradient, and spectral property analyzers.
//! - [`augment`]: projection onto the perturbation budget and the projected
//!   gradient optimisation of Bernoulli flip-probability matrices.
//! - [`baselines`]: uniform and cluster-aware reference schemes.
//! - [`gcl`]: a small GCN/GIN contrastive trainer with manual backprop and
//!   linear probes.
//! - [`oracle`]: finite-difference and brute-force checkers used to validate
//!   the analytic code paths.

pub mod augment;
pub mod baselines;
pub mod error;
pub mod gcl;
pub mod graph;
pub mod io;
pub mod oracle;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::Graph;

/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;

//! Random model of neural-network loss landscapes built from clustered
//! logit gradients.
//!
//! Logits are Gaussian with scale `sigma_z`; each logit gradient is a class
//! mean plus an example-specific residual. From an ensemble the crate
//! assembles the Gauss-Newton Hessian, computes its spectrum, counts the
//! outliers above the bulk, measures how much of the gradient lives in the
//! top eigenvectors, and tracks how the spectrum changes as the logit scale
//! grows. The clustering statistics also run on external gradient dumps.
//!
//! Data-parallel loops go through [`Exec`]; disabling the default
//! `parallel` feature makes every loop sequential.

pub mod cli;
pub mod clustering;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod hessian;
pub mod io;
pub mod logits;
pub mod params;
pub mod rng;
pub mod spectra;

pub use error::{Error, Result};
pub use exec::Exec;
pub use params::ModelParams;

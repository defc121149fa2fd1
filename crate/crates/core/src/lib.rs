//! Riemannian Gaussian distributions on positive-definite matrices and on
//! Siegel domains, computed through their log-normal and acosh-normal
//! random-matrix ensembles.

pub mod dd;
pub mod error;
pub mod inference;
pub mod matrix;
pub mod quadrature;
pub mod specfun;
pub mod partition;
pub mod rng;
pub mod sampler;
pub mod siegel;
pub mod spd;
pub mod spectral;

pub use error::{Error, Result};

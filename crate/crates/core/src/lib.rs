//! Where do random processes and fields attain their maximum? Exact
//! samplers, argmax extraction, perturbation identities, Gaussian bridges
//! and Lévy path reversal.

pub mod bridge;
pub mod error;
pub mod extremum;
pub mod kernels;
pub mod harness;
pub mod levy;
pub mod mc;
pub mod perturb;
pub mod process;
pub mod sampler;

pub use error::{Error, Result};

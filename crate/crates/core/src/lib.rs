//! Flux-noise spectroscopy and dissipative qubit dynamics.

pub mod circuit;
pub mod constants;
pub mod detector;
pub mod error;
pub mod extract;
pub mod io;
pub mod models;
pub mod mrt;
pub mod optim;
pub mod qp;
pub mod quad;
pub mod rng;
pub mod spectra;
pub mod synth;

pub use error::{Error, Result};

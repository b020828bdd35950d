//! Multi-stage residual learning with variational quantum circuits.
//!
//! A dense statevector simulator with adjoint gradients backs a small
//! circuit model (encoding block, variational layers, linear Pauli-Z
//! readout). Models are trained stage by stage on the residuals of the
//! frozen ensemble, and the results are analysed in the frequency domain.

pub mod circuit;
pub mod config;
pub mod datagen;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod model;
pub mod simulator;
pub mod spectral;
pub mod training;

pub use error::{Error, Result};

/// Formats a float as the shortest decimal string that parses back to the
/// same value (Rust `{:?}` formatting). Used for every numeric CSV field.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

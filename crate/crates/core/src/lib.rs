//! Exponential perturbation theory for a nonstationary anharmonic oscillator:
//! classical trajectories, zero- and first-order states, transition
//! probabilities and a direct Schrödinger-equation oracle.

pub mod basis;
pub mod classical;
pub mod cli;
pub mod config;
pub mod error;
pub mod firstorder;
pub mod ode;
pub mod oracle;
pub mod pipeline;
pub mod profiles;
pub mod quadrature;
pub mod smatrix;
pub mod special;

pub use error::{Error, Result};

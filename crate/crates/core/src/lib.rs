//! Distributed H∞ state-feedback synthesis for networks of identical subsystems.
//!
//! The network matrices have the form I⊗M^d + P⊗M^i for a symmetric pattern P.
//! Controllers u = (I⊗K^d + P⊗K^i)x are synthesised from per-eigenvalue matrix
//! inequalities and every result is checked against the dense closed loop.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod lmi;
pub mod model;
pub mod slalg;
pub mod synthesis;

pub use error::{Error, Result};

//! Numerical toolkit for device-independent key distribution and randomness
//! certification with a single photon split between two weak homodyne
//! stations.
//!
//! * [`fock`]: truncated Fock-space brute force for photon-count statistics.
//! * [`correlations`]: closed-form boxes, the CH functional and its optimum.
//! * [`polytope`]: the 24 vertices of the no-signaling polytope and the
//!   minimal-ensemble search.
//! * [`security`]: key rate, guessing probability and min-entropy from the
//!   optimal eavesdropper ensemble.
//! * [`protocol`]: seeded Monte Carlo runs of the key distribution protocol.
//! * [`cli`]: command implementations behind the `diqkd` binary.

pub mod boxes;
pub mod cli;
pub mod correlations;
pub mod error;
pub mod fock;
pub mod polytope;
pub mod protocol;
pub mod security;

pub use boxes::{CorrelationBox, Setting};
pub use error::{Error, Result};

//! Simulation and security analysis of quantum key distribution with the
//! transverse spatial entanglement of down-converted photon pairs.
//!
//! The crate is organised bottom-up:
//!
//! * [`source`], [`amplitude`], [`factorized`], [`transverse`], [`schmidt`]:
//!   the biphoton state and its representations.
//! * [`infotheory`]: entropies, mutual information, conditional variances,
//!   the EPR witness and the key-rate bound.
//! * [`detection`]: detector arrays, channel loss and dark counts.
//! * [`adversary`]: intercept-resend attack and security curve.
//! * [`negativity`]: log-negativity of the attacked state.
//! * [`montecarlo`]: event-level protocol simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod amplitude;
pub mod detection;
pub mod error;
pub mod factorized;
pub mod grid;
pub mod infotheory;
pub mod montecarlo;
pub mod negativity;
pub mod schmidt;
pub mod source;
pub mod transverse;

pub use amplitude::{Basis, JointAmplitude, JointDistribution, Party};
pub use error::{Error, Result};
pub use grid::Grid1D;
pub use source::SourceParams;

//! Simulation and analysis of unidirectional cyclic teleportation of three
//! cat coherent states over three Bell coherent-state pairs.
//!
//! - [`coherent`]: exact algebra of finite coherent-state superpositions.
//! - [`fock`]: truncated Fock-space oracle used to cross-check the algebra.
//! - [`protocol`]: preparation, wiring, heralding, correction, enumeration.
//! - [`analysis`]: fidelity reports, equality chains, averages and sweeps.
//! - [`harness`]: seeded three-party message-passing simulation.
//! - [`cli`]: command-line front end.

pub mod analysis;
pub mod cli;
pub mod coherent;
pub mod error;
pub mod fock;
pub mod harness;
pub mod protocol;

pub use coherent::{CoherentTerm, ModeLabel, SuperposedState, C64};
pub use error::{Error, Result};
pub use protocol::{CaseId, DetectionEvent, Leg, ProtocolParams};

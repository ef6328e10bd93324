//! Simulation of a weak cross-Kerr parity detector and the gates built on it:
//! a two-qubit entangler with feed-forward and a near-deterministic CNOT.
//!
//! States are superpositions over photon polarization strings where each
//! branch carries one coherent probe label `α e^{ikθ}` per active probe; see
//! [`state::HybridState`]. A truncated Fock-space model in [`oracle`] serves
//! as an independent reference.

pub mod analysis;
pub mod error;
pub mod gates;
pub mod measurement;
pub mod optics;
pub mod oracle;
pub mod state;

pub use analysis::{geometry, p_error, run_shots, DiscriminationGeometry, Experiment, ShotStats};
pub use error::{Error, Result};
pub use gates::{cnot, entangler, entangler_45, parity_gate, CnotCircuit, GateTrace, MeasurementEvent};
pub use measurement::{BornRule, Forced, ForcedOutcomes, HomodyneRecord, OutcomeSource, Parity};
pub use oracle::{oracle_embed, FockOracleState};
pub use optics::{ParityBasis, SingleQubitGate};
pub use state::{new_state, Branch, HybridState, PolBasis, Polarization, ProbeMode};

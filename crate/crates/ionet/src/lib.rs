//! Reachability analysis for immediate observation (IO) Petri nets.
//!
//! An IO net moves one token per transition from a source place to a
//! destination place while reading, but not consuming, an optional observed
//! place. This crate provides the net data model and firing semantics,
//! a Dinitz max-flow engine, an NP certificate checker and bounded search
//! for non-forgetting nets, a polynomial decision procedure for marking
//! pairs without near-misses, brute-force oracles for differential testing,
//! and line-oriented text formats for nets, markings and witnesses.

pub mod format;
pub mod history;
#[cfg(test)]
pub(crate) mod testnets;
pub mod maxflow;
pub mod nearmiss;
pub mod net;
pub mod nonforgetting;
pub mod oracle;

pub use history::{AcceleratedSequence, History};
pub use maxflow::{Capacity, Cut, Flow, FlowGraph};
pub use nearmiss::{Analysis, NearMissWitness, RestrictionSet, Triple, Verdict};
pub use net::{IONet, IOTransition, Marking, PlaceId, TokenMove, TransitionId};
pub use nonforgetting::{PhaseCertificate, SatCircuit};

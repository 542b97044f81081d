//! Topology-hiding path validation for multi-path QKD networks.
//!
//! Repeater nodes append a blinded credential presentation and a
//! scope-exclusive pseudonym to a growing audit payload; each link is
//! additionally authenticated towards the next physical neighbor. The
//! receiver verifies that every hop held an issuer credential satisfying the
//! agreed policy and that all pseudonyms are pairwise distinct (hence the
//! paths node-disjoint), while learning nothing about the operator's
//! topology beyond entry/exit nodes and hop counts.

pub mod group;
pub mod groth;
pub mod policy;
pub mod pseudonym;
pub mod sok;
pub mod protocol;
pub mod netsim;
pub mod stats;

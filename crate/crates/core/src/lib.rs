//! Clustering-based reduced-order micromechanics on periodic voxel grids.
//!
//! The crate is organised around the two stages of a self-consistent
//! clustering analysis:
//!
//! * an **offline** stage ([`offline`]) that computes elastic strain
//!   concentration tensors with a full-field spectral solver, decomposes each
//!   material phase into clusters ([`clustering`]) and assembles the cluster
//!   interaction tensors ([`cit`]);
//! * an **online** stage ([`simulation`]) that solves the cluster-reduced
//!   Lippmann-Schwinger system increment by increment ([`solver`]), with
//!   optional clustering adaptivity and solution rewinding ([`adaptivity`]).
//!
//! A full-field elasto-plastic reference solver lives in [`oracle`] together
//! with the error metrics used to compare reduced and reference solutions.
//!
//! Inner loops (per-voxel and per-cluster updates, interaction tensor
//! columns, K-Means restarts, scanning lines) run on rayon when the
//! `parallel` feature is enabled (default) and sequentially otherwise. Both
//! paths produce bitwise identical results.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptivity;
pub mod cit;
pub mod clustering;
pub mod error;
pub mod materials;
pub mod offline;
pub mod oracle;
pub mod par;
pub mod rng;
pub mod simulation;
pub mod solver;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};

/// Identifier of a material phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct PhaseId(pub u32);

/// Identifier of a material cluster. Ids are never reused within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub u32);

impl std::fmt::Display for PhaseId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::fmt::Display for ClusterId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Round half away from zero.
pub fn nint(x: f64) -> i64 {
    x.round() as i64
}

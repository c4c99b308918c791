use super::inherit;
use crate::clustering::ClusterMap;
use crate::materials::ClusterState;
use crate::spectral::ReferenceMaterial;
use crate::tensor::Sym2;
use crate::{ClusterId, Error, Result};

/// Snapshot of a run at the start of an increment.
#[derive(Debug, Clone, PartialEq)]
pub struct RewindState {
    /// Number of increments completed when the snapshot was taken.
    pub increment: usize,
    /// Cluster states in `map.ids()` order.
    pub states: Vec<ClusterState>,
    /// Strain increment guesses in `map.ids()` order.
    pub guess: Vec<Sym2>,
    pub map: ClusterMap,
    pub reference: ReferenceMaterial,
    /// Length of the homogenized history at the snapshot.
    pub history_len: usize,
}

impl RewindState {
    pub fn new(
        increment: usize,
        states: Vec<ClusterState>,
        guess: Vec<Sym2>,
        map: ClusterMap,
        reference: ReferenceMaterial,
        history_len: usize,
    ) -> Result<Self> {
        let n = map.n_clusters();
        if states.len() != n || guess.len() != n {
            return Err(Error::ShapeMismatch { expected: n, actual: states.len() });
        }
        Ok(Self { increment, states, guess, map, reference, history_len })
    }

    pub fn ids(&self) -> Vec<ClusterId> {
        self.map.ids()
    }
}

/// Default storing predicate: the first increment producing plastic flow.
pub fn should_store_rewind(converged: &[ClusterState]) -> bool {
    converged.iter().any(|s| s.acc_p > 0.0)
}

/// States and guesses for every cluster of `new_map`, copied from its
/// nearest ancestor present in the snapshot.
pub fn perform_rewind(snapshot: &RewindState, new_map: &ClusterMap) -> Result<(Vec<ClusterState>, Vec<Sym2>)> {
    let ids = snapshot.ids();
    let states = inherit(&ids, &snapshot.states, new_map)?;
    let guess = inherit(&ids, &snapshot.guess, new_map)?;
    Ok((states, guess))
}

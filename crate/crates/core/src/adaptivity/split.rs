use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::Serialize;

use super::{child_count, enforce_budget, evaluate_adaptivity_conditions, reconstruct_voxel_feature, select_targets};
use super::{AdaptivityConfig, TargetEntry};
use crate::cit::{incremental_update, CitContext, InteractionMatrix};
use crate::clustering::{kmeans_lloyd, ClusterMap, FeatureDataset, KMeansOptions};
use crate::materials::ClusterState;
use crate::spectral::VoxelGrid;
use crate::{par, rng, ClusterId, Error, PhaseId, Result};

/// Offline data needed by an adaptivity step.
#[derive(Clone, Copy)]
pub struct AdaptivityInput<'a> {
    pub grid: &'a VoxelGrid,
    /// Per-voxel clustering features.
    pub features: &'a FeatureDataset,
    /// Per-voxel concentration tensor norms.
    pub h_norm: Option<&'a [f64]>,
    pub cit: &'a CitContext,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventTarget {
    pub cluster: ClusterId,
    pub max_jump: f64,
    pub children: Vec<ClusterId>,
}

/// Record of one adaptivity step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptivityEvent {
    pub increment: usize,
    /// Step index within the increment.
    pub step: usize,
    pub eligible_phases: Vec<PhaseId>,
    /// Targets found by the scan, before the budget.
    pub n_candidates: usize,
    pub targets: Vec<EventTarget>,
    pub n_clusters_before: usize,
    pub n_clusters_after: usize,
    /// Wall-clock seconds of target selection, cluster analysis and
    /// interaction tensor update.
    pub time_a: f64,
    pub time_b: f64,
    pub time_c: f64,
}

/// Outcome of an adaptivity step that passed the condition gate.
#[derive(Debug, Clone)]
pub struct AdaptivityStep {
    pub event: AdaptivityEvent,
    /// Refined map and interaction matrix; `None` when nothing was split.
    pub update: Option<(ClusterMap, InteractionMatrix)>,
}

/// Splits each `(parent, n_child)` with mini-batch K-Means over the parents'
/// voxel features. Returns the refined map and the children per parent.
pub fn split_clusters(
    map: &ClusterMap,
    features: &FeatureDataset,
    splits: &[(ClusterId, usize)],
    increment: usize,
    seed: u64,
) -> Result<(ClusterMap, Vec<Vec<ClusterId>>)> {
    let groups = par::try_map_range(splits.len(), |k| {
        let (parent, n_child) = splits[k];
        let voxels = &map.record(parent)?.voxels;
        if n_child < 2 || n_child > voxels.len() {
            return Err(Error::InvalidClustering(format!(
                "cannot split cluster {parent} of {} voxels into {n_child}",
                voxels.len()
            )));
        }
        let data = features.subset(voxels)?;
        let split_seed = rng::derive_seed(seed, &[increment as u64, u64::from(parent.0)]);
        let result = kmeans_lloyd(&data, n_child, KMeansOptions::mini_batch(), split_seed)?;
        let mut g = vec![Vec::new(); n_child];
        for (&v, &l) in voxels.iter().zip(&result.labels) {
            g[l].push(v);
        }
        Ok(g)
    })?;
    let mut refined = map.clone();
    let mut children = Vec::with_capacity(splits.len());
    for ((parent, _), g) in splits.iter().zip(groups) {
        children.push(refined.split(*parent, g, increment)?);
    }
    Ok((refined, children))
}

/// Per-cluster values for `new_map` copied from the nearest ancestor among
/// `old_ids` (values in `old_ids` order).
pub fn inherit<T: Clone>(old_ids: &[ClusterId], old_values: &[T], new_map: &ClusterMap) -> Result<Vec<T>> {
    if old_ids.len() != old_values.len() {
        return Err(Error::ShapeMismatch { expected: old_ids.len(), actual: old_values.len() });
    }
    let set: BTreeSet<ClusterId> = old_ids.iter().copied().collect();
    let index: BTreeMap<ClusterId, usize> = old_ids.iter().enumerate().map(|(k, id)| (*id, k)).collect();
    new_map
        .ids()
        .into_iter()
        .map(|id| Ok(old_values[index[&new_map.ancestor_in(id, &set)?]].clone()))
        .collect()
}

/// One adaptivity step after `increment` (1-based) on the converged
/// `states` (in `map.ids()` order). Returns `None` when no phase passes the
/// condition gate.
pub fn adaptivity_step(
    input: AdaptivityInput,
    cfg: &AdaptivityConfig,
    map: &ClusterMap,
    cit: &InteractionMatrix,
    states: &[ClusterState],
    increment: usize,
    step: usize,
) -> Result<Option<AdaptivityStep>> {
    let start = Instant::now();
    let field = reconstruct_voxel_feature(states, map, cfg.feature, input.h_norm)?;
    let gate = evaluate_adaptivity_conditions(cfg, increment, step, map, &field);
    let eligible: BTreeSet<PhaseId> = gate.into_iter().filter(|(_, go)| *go).map(|(p, _)| p).collect();
    if eligible.is_empty() {
        return Ok(None);
    }
    let mut scan_rng = rng::derived_rng(input.seed, &[increment as u64, step as u64, 0x5ca9]);
    let targets = select_targets(input.grid, &field, map, &eligible, cfg, &mut scan_rng)?;
    let children: BTreeMap<ClusterId, usize> = targets
        .entries
        .iter()
        .map(|t| Ok((t.id, child_count(t, map.record(t.id)?.voxels.len(), cfg))))
        .collect::<Result<_>>()?;
    let accepted: Vec<(TargetEntry, usize)> = enforce_budget(&targets, &children, cfg, map.n_clusters());
    let time_a = start.elapsed().as_secs_f64();
    let mut event = AdaptivityEvent {
        increment,
        step,
        eligible_phases: eligible.into_iter().collect(),
        n_candidates: targets.len(),
        targets: Vec::new(),
        n_clusters_before: map.n_clusters(),
        n_clusters_after: map.n_clusters(),
        time_a,
        time_b: 0.0,
        time_c: 0.0,
    };
    if accepted.is_empty() {
        return Ok(Some(AdaptivityStep { event, update: None }));
    }
    let start = Instant::now();
    let splits: Vec<(ClusterId, usize)> = accepted.iter().map(|(t, k)| (t.id, *k)).collect();
    let (refined, kids) = split_clusters(map, input.features, &splits, increment, input.seed)?;
    event.time_b = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let updated = incremental_update(input.cit, cit, map, &refined)?;
    event.time_c = start.elapsed().as_secs_f64();
    event.n_clusters_after = refined.n_clusters();
    event.targets = accepted
        .iter()
        .zip(kids)
        .map(|((t, _), children)| EventTarget { cluster: t.id, max_jump: t.max_jump, children })
        .collect();
    Ok(Some(AdaptivityStep { event, update: Some((refined, updated)) }))
}

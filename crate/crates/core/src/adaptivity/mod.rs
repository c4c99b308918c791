//! Clustering adaptivity: condition gate, target selection by feature jumps
//! across cluster boundaries, child cluster counts, cluster budget, splitting
//! with state inheritance, and solution rewinding.

mod rewind;
mod split;
mod targets;


use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterMap;
use crate::materials::ClusterState;
use crate::{Error, PhaseId, Result};

pub use rewind::{perform_rewind, should_store_rewind, RewindState};
pub use split::{adaptivity_step, inherit, split_clusters, AdaptivityEvent, AdaptivityInput, AdaptivityStep, EventTarget};
pub use targets::{child_count, enforce_budget, select_targets, TargetEntry, TargetSet};

/// When the rewind snapshot is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewindTrigger {
    /// Start of the first increment that produces plastic flow.
    #[default]
    FirstPlastic,
    /// Start of the loading path.
    Start,
}

/// Per-cluster quantity driving the adaptivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptivityFeature {
    /// Accumulated plastic strain.
    #[default]
    AccP,
    PlasticWorkDensity,
    /// Cluster mean of the Frobenius norm of the elastic strain
    /// concentration tensor.
    HNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptivityConfig {
    pub feature: AdaptivityFeature,
    /// Normalized jump at or above which both clusters of a pair are
    /// targeted. A value of 1 disables targeting.
    pub trigger_ratio: f64,
    /// Smallest child volume fraction of a split; fixes the maximum child
    /// count `nint(1 / child_volume_fraction)`.
    pub child_volume_fraction: f64,
    pub split_factor: f64,
    /// Zero selects the static split factor.
    pub split_amplitude: f64,
    pub magnitude_exponent: f64,
    /// Magnitude scaling for the lower-valued cluster of a jump.
    pub theta_low: f64,
    /// Adaptivity is evaluated every `frequency` increments.
    pub frequency: usize,
    pub max_consecutive_steps: usize,
    pub cluster_budget: usize,
    pub min_feature_value: f64,
    pub max_level: u32,
    pub max_level_gap: u32,
    pub min_voxels_per_cluster: usize,
    pub scan_frequency: usize,
    pub repeat_increment: bool,
    /// Phases whose clustering may evolve.
    pub adaptive_phases: BTreeSet<PhaseId>,
    /// Store a snapshot and rewind to it once after the first adaptivity
    /// step.
    pub rewind: bool,
    pub rewind_trigger: RewindTrigger,
}

impl Default for AdaptivityConfig {
    fn default() -> Self {
        Self {
            feature: AdaptivityFeature::AccP,
            trigger_ratio: 0.1,
            child_volume_fraction: 0.5,
            split_factor: 1.0,
            split_amplitude: 0.0,
            magnitude_exponent: 1.0,
            theta_low: 1.0,
            frequency: 1,
            max_consecutive_steps: 1,
            cluster_budget: 100_000,
            min_feature_value: 0.0,
            max_level: 100,
            max_level_gap: 100,
            min_voxels_per_cluster: 2,
            scan_frequency: 1,
            repeat_increment: true,
            adaptive_phases: BTreeSet::new(),
            rewind: false,
            rewind_trigger: RewindTrigger::FirstPlastic,
        }
    }
}

impl AdaptivityConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        unit("trigger_ratio", self.trigger_ratio)?;
        unit("split_factor", self.split_factor)?;
        unit("split_amplitude", self.split_amplitude)?;
        unit("theta_low", self.theta_low)?;
        if !(self.child_volume_fraction > 0.0 && self.child_volume_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "child_volume_fraction = {} is outside (0, 1]",
                self.child_volume_fraction
            )));
        }
        if !(self.magnitude_exponent > 0.0) {
            return Err(Error::InvalidConfig("magnitude_exponent must be positive".into()));
        }
        if !self.min_feature_value.is_finite() {
            return Err(Error::InvalidConfig("min_feature_value must be finite".into()));
        }
        for (name, v) in [
            ("frequency", self.frequency),
            ("max_consecutive_steps", self.max_consecutive_steps),
            ("scan_frequency", self.scan_frequency),
            ("min_voxels_per_cluster", self.min_voxels_per_cluster),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// Maximum number of children of one split.
    pub fn max_children(&self) -> usize {
        (crate::nint(1.0 / self.child_volume_fraction).max(1)) as usize
    }
}

/// Per-cluster value of the adaptivity feature, in `map.ids()` order.
/// `h_norm` holds per-voxel concentration tensor norms.
pub fn cluster_feature(
    states: &[ClusterState],
    map: &ClusterMap,
    feature: AdaptivityFeature,
    h_norm: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let ids = map.ids();
    if states.len() != ids.len() {
        return Err(Error::ShapeMismatch { expected: ids.len(), actual: states.len() });
    }
    match feature {
        AdaptivityFeature::AccP => Ok(states.iter().map(|s| s.acc_p).collect()),
        AdaptivityFeature::PlasticWorkDensity => Ok(states.iter().map(|s| s.plastic_work).collect()),
        AdaptivityFeature::HNorm => {
            let h = h_norm.ok_or_else(|| Error::InvalidConfig("h_norm feature requires concentration tensors".into()))?;
            if h.len() != map.n_voxels() {
                return Err(Error::ShapeMismatch { expected: map.n_voxels(), actual: h.len() });
            }
            ids.iter()
                .map(|&id| {
                    let rec = map.record(id)?;
                    Ok(rec.voxels.iter().map(|&v| h[v]).sum::<f64>() / rec.voxels.len() as f64)
                })
                .collect()
        }
    }
}

/// Piecewise-uniform per-voxel field: each voxel takes its cluster's value.
pub fn reconstruct_voxel_feature(
    states: &[ClusterState],
    map: &ClusterMap,
    feature: AdaptivityFeature,
    h_norm: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let values = cluster_feature(states, map, feature, h_norm)?;
    Ok(piecewise_field(map, &values))
}

/// Maps per-cluster values (in `map.ids()` order) to voxels.
pub fn piecewise_field(map: &ClusterMap, values: &[f64]) -> Vec<f64> {
    let ids = map.ids();
    let index: BTreeMap<_, _> = ids.iter().enumerate().map(|(k, id)| (*id, k)).collect();
    map.labels().iter().map(|id| values[index[id]]).collect()
}

/// Phases passing the adaptivity gate after `increment` (1-based), given
/// `consecutive` steps already taken in this increment.
pub fn evaluate_adaptivity_conditions(
    cfg: &AdaptivityConfig,
    increment: usize,
    consecutive: usize,
    map: &ClusterMap,
    field: &[f64],
) -> BTreeMap<PhaseId, bool> {
    let mut phase_max: BTreeMap<PhaseId, f64> = BTreeMap::new();
    for rec in map.clusters() {
        let m = phase_max.entry(rec.phase).or_insert(f64::NEG_INFINITY);
        for &v in &rec.voxels {
            *m = m.max(field[v]);
        }
    }
    let common = increment.is_multiple_of(cfg.frequency)
        && consecutive < cfg.max_consecutive_steps
        && map.n_clusters() < cfg.cluster_budget;
    phase_max
        .into_iter()
        .map(|(p, max)| {
            let go = common && cfg.adaptive_phases.contains(&p) && max >= cfg.min_feature_value;
            (p, go)
        })
        .collect()
}

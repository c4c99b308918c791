use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use super::AdaptivityConfig;
use crate::clustering::ClusterMap;
use crate::spectral::VoxelGrid;
use crate::{nint, par, ClusterId, PhaseId, Result};

/// One targeted cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetEntry {
    pub id: ClusterId,
    /// Largest normalized jump recorded for the cluster.
    pub max_jump: f64,
    /// Largest split magnitude `jump − trigger_ratio`, scaled by `theta_low`
    /// when the cluster is the lower-valued side of the jump.
    pub magnitude: f64,
}

/// Targeted clusters in ascending id order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TargetSet {
    pub entries: Vec<TargetEntry>,
}

impl TargetSet {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn ids(&self) -> Vec<ClusterId> {
        self.entries.iter().map(|e| e.id).collect()
    }
}

fn record(marks: &mut BTreeMap<ClusterId, (f64, f64)>, id: ClusterId, jump: f64, magnitude: f64) {
    let e = marks.entry(id).or_insert((jump, magnitude));
    e.0 = e.0.max(jump);
    e.1 = e.1.max(magnitude);
}

/// Pair start positions along a line of `n` voxels scanned with stride `x`
/// from `offset`; the first and last voxels are always included.
fn scan_positions(n: usize, x: usize, offset: usize) -> Vec<usize> {
    let mut p: BTreeSet<usize> = (offset..n).step_by(x).collect();
    p.insert(0);
    p.insert(n - 1);
    p.into_iter().collect()
}

/// Scans every axis for feature jumps across cluster boundaries within the
/// `eligible` phases. `field` is the per-voxel feature; the scan offsets are
/// drawn from `rng`, one per axis.
pub fn select_targets(
    grid: &VoxelGrid,
    field: &[f64],
    map: &ClusterMap,
    eligible: &BTreeSet<PhaseId>,
    cfg: &AdaptivityConfig,
    rng: &mut impl Rng,
) -> Result<TargetSet> {
    let mut range: BTreeMap<PhaseId, (f64, f64)> = BTreeMap::new();
    for (v, &f) in field.iter().enumerate() {
        let r = range.entry(grid.phase(v)).or_insert((f, f));
        r.0 = r.0.min(f);
        r.1 = r.1.max(f);
    }
    let labels = map.labels();
    let dims = grid.dims();
    let strides = grid.strides();
    let offsets: Vec<usize> = dims.iter().map(|_| rng.random_range(0..cfg.scan_frequency)).collect();
    let active = cfg.trigger_ratio < 1.0;
    let mut marks: BTreeMap<ClusterId, (f64, f64)> = BTreeMap::new();
    for axis in 0..dims.len() {
        let n = dims[axis];
        let positions = scan_positions(n, cfg.scan_frequency, offsets[axis]);
        // line origins: voxels with index 0 along `axis`
        let origins: Vec<usize> = (0..grid.n_voxels()).filter(|&v| (v / strides[axis]).is_multiple_of(n)).collect();
        let lines = par::try_map_range(origins.len(), |l| {
            let mut local = BTreeMap::new();
            let origin = origins[l];
            for &p in &positions {
                let a = origin + p * strides[axis];
                let b = origin + ((p + 1) % n) * strides[axis];
                let (ca, cb) = (labels[a], labels[b]);
                let phase = grid.phase(a);
                if !active || ca == cb || phase != grid.phase(b) || !eligible.contains(&phase) {
                    continue;
                }
                let (lo, hi) = range[&phase];
                if hi <= lo {
                    continue;
                }
                let jump = (field[a] - field[b]).abs() / (hi - lo);
                if jump < cfg.trigger_ratio {
                    continue;
                }
                let (la, lb) = (map.level_of(ca)?, map.level_of(cb)?);
                let s = jump - cfg.trigger_ratio;
                let mut candidates = Vec::with_capacity(2);
                if la.abs_diff(lb) > cfg.max_level_gap {
                    candidates.push(if la < lb { (ca, field[a], field[b]) } else { (cb, field[b], field[a]) });
                } else {
                    candidates.push((ca, field[a], field[b]));
                    candidates.push((cb, field[b], field[a]));
                }
                for (c, own, other) in candidates {
                    let rec = map.record(c)?;
                    if rec.level >= cfg.max_level || rec.voxels.len() < cfg.min_voxels_per_cluster.max(2) {
                        continue;
                    }
                    let magnitude = if own < other { cfg.theta_low * s } else { s };
                    record(&mut local, c, jump, magnitude);
                }
            }
            Ok::<_, crate::Error>(local)
        })?;
        for local in lines {
            for (id, (j, m)) in local {
                record(&mut marks, id, j, m);
            }
        }
    }
    Ok(TargetSet {
        entries: marks.into_iter().map(|(id, (max_jump, magnitude))| TargetEntry { id, max_jump, magnitude }).collect(),
    })
}

/// Number of children of a target cluster with `voxels` voxels.
pub fn child_count(target: &TargetEntry, voxels: usize, cfg: &AdaptivityConfig) -> usize {
    let n_max = cfg.max_children() as f64;
    let gamma = if cfg.split_amplitude == 0.0 {
        cfg.split_factor
    } else {
        let span = 1.0 - cfg.trigger_ratio;
        let g = if span > 0.0 { (target.magnitude.max(0.0) / span).powf(cfg.magnitude_exponent) } else { 1.0 };
        (cfg.split_factor - 0.5 * cfg.split_amplitude + g * cfg.split_amplitude).clamp(0.0, 1.0)
    };
    (nint(gamma * n_max).max(2) as usize).min(voxels)
}

/// Greedy selection by descending maximum jump (ties by ascending id) while
/// the projected cluster count is below the budget. Returns the accepted
/// targets with their child counts, in ascending id order.
pub fn enforce_budget(
    targets: &TargetSet,
    children: &BTreeMap<ClusterId, usize>,
    cfg: &AdaptivityConfig,
    n_clusters: usize,
) -> Vec<(TargetEntry, usize)> {
    let mut order = targets.entries.clone();
    order.sort_by(|a, b| b.max_jump.total_cmp(&a.max_jump).then(a.id.cmp(&b.id)));
    let mut projected = n_clusters;
    let mut accepted = Vec::new();
    for t in order {
        if projected >= cfg.cluster_budget {
            break;
        }
        let k = children[&t.id];
        projected += k - 1;
        accepted.push((t, k));
    }
    accepted.sort_by_key(|(t, _)| t.id);
    accepted
}

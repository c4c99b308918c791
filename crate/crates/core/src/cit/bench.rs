use std::time::{Duration, Instant};

use rand::Rng;

use super::{assemble_matrix, incremental_update, CitContext, CitCounters};
use crate::clustering::ClusterMap;
use crate::spectral::VoxelGrid;
use crate::{nint, rng, ClusterId, Error, Result};

const REPEATS: usize = 3;
const EQUALITY_TOL: f64 = 1e-12;

/// Outcome of one standard-versus-incremental interaction tensor update.
#[derive(Debug, Clone, PartialEq)]
pub struct CitBenchReport {
    pub n_init: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Clusters kept unchanged.
    pub n_old: usize,
    /// Clusters created by the splits.
    pub n_new: usize,
    pub n_total: usize,
    pub standard: CitCounters,
    pub proposed: CitCounters,
    pub time_standard: Duration,
    pub time_proposed: Duration,
    pub max_difference: f64,
}

impl CitBenchReport {
    pub fn speedup(&self) -> f64 {
        self.time_standard.as_secs_f64() / self.time_proposed.as_secs_f64()
    }
}

/// Periodic Voronoi partition of a single-phase grid into `n` cells.
fn voronoi(grid: &VoxelGrid, n: usize, seed: u64) -> Result<ClusterMap> {
    let dims = grid.dims();
    let mut rng = rng::derived_rng(seed, &[0]);
    let mut sites: Vec<Vec<usize>> = Vec::with_capacity(n);
    while sites.len() < n {
        let s: Vec<usize> = dims.iter().map(|&d| rng.random_range(0..d)).collect();
        if !sites.contains(&s) {
            sites.push(s);
        }
    }
    let labels = (0..grid.n_voxels())
        .map(|v| {
            let x = grid.multi_index(v);
            let dist = |s: &[usize]| -> usize {
                x.iter()
                    .zip(s)
                    .zip(dims)
                    .map(|((&a, &b), &d)| {
                        let t = a.abs_diff(b);
                        let t = t.min(d - t);
                        t * t
                    })
                    .sum()
            };
            let best = (0..n).min_by_key(|&k| dist(&sites[k])).expect("n >= 1");
            ClusterId(best as u32)
        })
        .collect();
    ClusterMap::from_labels(grid, labels)
}

/// Builds a clustering with `n_init` clusters, splits `n_init - nint(α n_init)`
/// of them into `nint((1 + β) n_init) - nint(α n_init)` children, and times a
/// full sorted reassembly against the incremental update.
pub fn benchmark_cit_update(grid: &VoxelGrid, n_init: usize, alpha: f64, beta: f64, seed: u64) -> Result<CitBenchReport> {
    if !(0.0..=1.0).contains(&alpha) || !(beta >= 0.0) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} must lie in [0, 1] and beta {beta} be non-negative")));
    }
    if grid.phases().len() != 1 {
        return Err(Error::InvalidConfig("interaction tensor benchmark needs a single-phase grid".into()));
    }
    if n_init == 0 || n_init > grid.n_voxels() {
        return Err(Error::InvalidConfig(format!("cannot place {n_init} clusters on {} voxels", grid.n_voxels())));
    }
    let n_old = nint(alpha * n_init as f64) as usize;
    let n_total = nint((1.0 + beta) * n_init as f64) as usize;
    let n_new = n_total.saturating_sub(n_old);
    let n_split = n_init - n_old;
    if n_new == 0 || n_split == 0 || n_new < 2 * n_split {
        return Err(Error::InvalidConfig(format!(
            "infeasible update: alpha {alpha}, beta {beta} give {n_split} split clusters and {n_new} new clusters (need beta >= 1 - alpha)"
        )));
    }

    let old_map = voronoi(grid, n_init, seed)?;
    let mut order: Vec<ClusterId> = old_map.ids();
    order.sort_by_key(|&id| (std::cmp::Reverse(old_map.record(id).map_or(0, |r| r.voxels.len())), id));
    let mut new_map = old_map.clone();
    for (k, &parent) in order[..n_split].iter().enumerate() {
        let children = n_new / n_split + usize::from(k < n_new % n_split);
        let voxels = old_map.record(parent)?.voxels.clone();
        if voxels.len() < children {
            return Err(Error::InvalidConfig(format!("cluster {parent} too small for {children} children")));
        }
        let groups = (0..children)
            .map(|c| voxels[c * voxels.len() / children..(c + 1) * voxels.len() / children].to_vec())
            .collect();
        new_map.split(parent, groups, 1)?;
    }

    let ctx = CitContext::new(grid)?;
    let old = assemble_matrix(&ctx, &old_map)?;
    let mut time_standard = Duration::MAX;
    let mut time_proposed = Duration::MAX;
    let mut standard = None;
    let mut proposed = None;
    for _ in 0..REPEATS {
        let t = Instant::now();
        standard = Some(assemble_matrix(&ctx, &new_map)?);
        time_standard = time_standard.min(t.elapsed());
        let t = Instant::now();
        proposed = Some(incremental_update(&ctx, &old, &old_map, &new_map)?);
        time_proposed = time_proposed.min(t.elapsed());
    }
    let (standard, proposed) = (standard.expect("repeats >= 1"), proposed.expect("repeats >= 1"));
    let max_difference = standard.max_relative_difference(&proposed);
    if max_difference > EQUALITY_TOL {
        return Err(Error::InvalidClustering(format!(
            "incremental update deviates from full reassembly by {max_difference:e}"
        )));
    }
    Ok(CitBenchReport {
        n_init,
        alpha,
        beta,
        n_old,
        n_new,
        n_total: new_map.n_clusters(),
        standard: standard.counters(),
        proposed: proposed.counters(),
        time_standard,
        time_proposed,
        max_difference,
    })
}

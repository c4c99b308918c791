use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};

use super::{kmeans_lloyd, FeatureDataset, KMeansOptions};
use crate::spectral::VoxelGrid;
use crate::{ClusterId, Error, PhaseId, Result};

/// One material cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRecord {
    pub id: ClusterId,
    pub phase: PhaseId,
    /// Sorted linear voxel indices.
    pub voxels: Vec<usize>,
    /// Adaptivity level: number of splits since the base clustering.
    pub level: u32,
    pub parent: Option<ClusterId>,
    /// Increment at which the cluster was created (0 for base clusters).
    pub birth_increment: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Lineage {
    parent: Option<ClusterId>,
    level: u32,
}

/// Voxel to cluster assignment with the hierarchy of every cluster ever
/// created.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMap {
    labels: Vec<ClusterId>,
    active: BTreeMap<ClusterId, ClusterRecord>,
    lineage: BTreeMap<ClusterId, Lineage>,
    next_id: u32,
}

impl ClusterMap {
    /// Base-level map from per-voxel cluster labels.
    pub fn from_labels(grid: &VoxelGrid, labels: Vec<ClusterId>) -> Result<Self> {
        if labels.len() != grid.n_voxels() {
            return Err(Error::ShapeMismatch { expected: grid.n_voxels(), actual: labels.len() });
        }
        let mut active: BTreeMap<ClusterId, ClusterRecord> = BTreeMap::new();
        for (v, &id) in labels.iter().enumerate() {
            let phase = grid.phase(v);
            let rec = active.entry(id).or_insert_with(|| ClusterRecord {
                id,
                phase,
                voxels: Vec::new(),
                level: 0,
                parent: None,
                birth_increment: 0,
            });
            if rec.phase != phase {
                return Err(Error::InvalidClustering(format!("cluster {id} spans several phases")));
            }
            rec.voxels.push(v);
        }
        let lineage = active.keys().map(|&id| (id, Lineage { parent: None, level: 0 })).collect();
        let next_id = active.keys().next_back().map_or(0, |id| id.0 + 1);
        Ok(Self { labels, active, lineage, next_id })
    }

    pub fn n_voxels(&self) -> usize {
        self.labels.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.active.len()
    }

    pub fn labels(&self) -> &[ClusterId] {
        &self.labels
    }

    /// Active cluster ids in ascending order.
    pub fn ids(&self) -> Vec<ClusterId> {
        self.active.keys().copied().collect()
    }

    pub fn clusters(&self) -> impl Iterator<Item = &ClusterRecord> {
        self.active.values()
    }

    pub fn get(&self, id: ClusterId) -> Option<&ClusterRecord> {
        self.active.get(&id)
    }

    pub fn record(&self, id: ClusterId) -> Result<&ClusterRecord> {
        self.active.get(&id).ok_or(Error::UnknownCluster(id))
    }

    pub fn contains(&self, id: ClusterId) -> bool {
        self.active.contains_key(&id)
    }

    /// Volume fraction `n_voxels(I) / n_v`.
    pub fn fraction(&self, id: ClusterId) -> Result<f64> {
        Ok(self.record(id)?.voxels.len() as f64 / self.n_voxels() as f64)
    }

    pub fn fractions(&self) -> Vec<f64> {
        let n = self.n_voxels() as f64;
        self.active.values().map(|r| r.voxels.len() as f64 / n).collect()
    }

    /// Active clusters of a phase in ascending id order.
    pub fn phase_clusters(&self, phase: PhaseId) -> Vec<ClusterId> {
        self.active.values().filter(|r| r.phase == phase).map(|r| r.id).collect()
    }

    /// Next id a split would assign.
    pub fn next_id(&self) -> u32 {
        self.next_id
    }

    /// Parent of any cluster ever created.
    pub fn parent_of(&self, id: ClusterId) -> Result<Option<ClusterId>> {
        self.lineage.get(&id).map(|l| l.parent).ok_or(Error::UnknownCluster(id))
    }

    pub fn level_of(&self, id: ClusterId) -> Result<u32> {
        self.lineage.get(&id).map(|l| l.level).ok_or(Error::UnknownCluster(id))
    }

    /// Walks parent links from `id` (inclusive) to the first cluster in `set`.
    pub fn ancestor_in(&self, id: ClusterId, set: &BTreeSet<ClusterId>) -> Result<ClusterId> {
        let mut current = Some(id);
        while let Some(c) = current {
            if set.contains(&c) {
                return Ok(c);
            }
            current = self.lineage.get(&c).ok_or(Error::HierarchyCorrupted(id))?.parent;
        }
        Err(Error::HierarchyCorrupted(id))
    }

    /// Replaces `parent` by children made of the given voxel groups, which
    /// must partition the parent's voxels. Returns the new ids in order.
    pub fn split(&mut self, parent: ClusterId, groups: Vec<Vec<usize>>, increment: usize) -> Result<Vec<ClusterId>> {
        let record = self.record(parent)?.clone();
        let mut all: Vec<usize> = groups.iter().flatten().copied().collect();
        all.sort_unstable();
        if groups.iter().any(|g| g.is_empty()) || all != record.voxels {
            return Err(Error::InvalidClustering(format!(
                "split of cluster {parent} does not partition its voxels"
            )));
        }
        self.active.remove(&parent);
        let mut ids = Vec::with_capacity(groups.len());
        for mut voxels in groups {
            voxels.sort_unstable();
            let id = ClusterId(self.next_id);
            self.next_id += 1;
            for &v in &voxels {
                self.labels[v] = id;
            }
            let level = record.level + 1;
            self.lineage.insert(id, Lineage { parent: Some(parent), level });
            self.active.insert(id, ClusterRecord {
                id,
                phase: record.phase,
                voxels,
                level,
                parent: Some(parent),
                birth_increment: increment,
            });
            ids.push(id);
        }
        Ok(ids)
    }

    /// Checks every structural invariant against the grid.
    pub fn validate(&self, grid: &VoxelGrid) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidClustering(m));
        if self.labels.len() != grid.n_voxels() {
            return bad("label count differs from voxel count".into());
        }
        let mut seen = 0;
        let mut total = 0.0;
        for r in self.active.values() {
            if r.voxels.is_empty() {
                return Err(Error::EmptyCluster(r.id));
            }
            if r.voxels.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("cluster {} voxels not sorted", r.id));
            }
            for &v in &r.voxels {
                if self.labels.get(v) != Some(&r.id) {
                    return bad(format!("voxel {v} not labelled with cluster {}", r.id));
                }
                if grid.phase(v) != r.phase {
                    return bad(format!("cluster {} is not phase-pure", r.id));
                }
            }
            seen += r.voxels.len();
            total += r.voxels.len() as f64 / self.n_voxels() as f64;
            let lin = self.lineage.get(&r.id).copied();
            if lin != Some(Lineage { parent: r.parent, level: r.level }) {
                return bad(format!("cluster {} lineage mismatch", r.id));
            }
            if r.parent.is_none() && r.level != 0 {
                return bad(format!("base cluster {} has level {}", r.id, r.level));
            }
            if let Some(p) = r.parent {
                if self.level_of(p)? + 1 != r.level || self.active.contains_key(&p) {
                    return bad(format!("cluster {} has inconsistent parent {p}", r.id));
                }
            }
        }
        if seen != self.n_voxels() {
            return bad("clusters do not cover every voxel exactly once".into());
        }
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("volume fractions sum to {total}"));
        }
        Ok(())
    }

    /// Content hash of the active labelling.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for l in &self.labels {
            h.update(l.0.to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Per-phase K-Means clustering of the feature rows. Cluster ids are
/// contiguous, phases in ascending order, and numbered by first voxel
/// occurrence within each phase.
pub fn base_clustering(
    grid: &VoxelGrid,
    features: &FeatureDataset,
    clusters_per_phase: &BTreeMap<PhaseId, usize>,
    options: KMeansOptions,
    seed: u64,
) -> Result<ClusterMap> {
    let counts = grid.phase_counts();
    for (&phase, &k) in clusters_per_phase {
        let n = counts.get(&phase).copied().unwrap_or(0);
        if k == 0 || k > n {
            return Err(Error::InvalidClustering(format!(
                "phase {phase} has {n} voxels but {k} clusters were requested"
            )));
        }
    }
    let mut labels = vec![ClusterId(u32::MAX); grid.n_voxels()];
    let mut offset = 0u32;
    for &phase in counts.keys() {
        let &k = clusters_per_phase.get(&phase).ok_or_else(|| {
            Error::InvalidClustering(format!("no cluster count given for phase {phase}"))
        })?;
        let voxels: Vec<usize> = (0..grid.n_voxels()).filter(|&v| grid.phase(v) == phase).collect();
        let data = features.subset(&voxels)?;
        let phase_seed = crate::rng::derive_seed(seed, &[u64::from(phase.0)]);
        let result = kmeans_lloyd(&data, k, options, phase_seed)?;
        for (v, l) in voxels.iter().zip(result.labels) {
            labels[*v] = ClusterId(offset + l as u32);
        }
        offset += k as u32;
    }
    let map = ClusterMap::from_labels(grid, labels)?;
    map.validate(grid)?;
    Ok(map)
}

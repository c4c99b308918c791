//! Offline stage: elastic strain concentration features, per-phase base
//! clustering and cluster interaction tensors.

use std::collections::BTreeMap;

use crate::cit::{assemble_matrix, CitContext, InteractionMatrix};
use crate::clustering::{base_clustering, ClusterMap, FeatureDataset, KMeansOptions};
use crate::materials::{voigt_reference, PhaseMaterial};
use crate::oracle::{strain_concentration, OracleOptions};
use crate::spectral::{ReferenceMaterial, VoxelGrid};
use crate::{Error, PhaseId, Result};

/// Volume-average reference material of the phases present in the grid.
pub fn grid_voigt_reference(
    grid: &VoxelGrid,
    materials: &BTreeMap<PhaseId, PhaseMaterial>,
) -> Result<ReferenceMaterial> {
    let fractions = grid.phase_fractions();
    let pairs = fractions
        .iter()
        .map(|(p, f)| Ok((materials.get(p).ok_or(Error::UnknownPhase(*p))?, *f)))
        .collect::<Result<Vec<_>>>()?;
    voigt_reference(pairs)
}

/// Per-voxel clustering features.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineFeatures {
    /// Strain concentration tensors, row-major 3×3 in Voigt notation.
    pub concentration: Vec<[f64; 9]>,
    pub dataset: FeatureDataset,
    /// Frobenius norm of each concentration tensor.
    pub h_norm: Vec<f64>,
}

/// Elastic strain concentration tensors computed with the full-field solver
/// and a Voigt reference material.
pub fn compute_features(
    grid: &VoxelGrid,
    materials: &BTreeMap<PhaseId, PhaseMaterial>,
    options: OracleOptions,
) -> Result<OfflineFeatures> {
    let reference = grid_voigt_reference(grid, materials)?;
    let concentration = strain_concentration(grid, materials, &reference, options)?;
    let data: Vec<f64> = concentration.iter().flatten().copied().collect();
    let dataset = FeatureDataset::new(data, 9, (0..grid.n_voxels()).collect())?;
    let h_norm = concentration.iter().map(|h| h.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    Ok(OfflineFeatures { concentration, dataset, h_norm })
}

/// Clustered RVE with its interaction tensors.
pub struct OfflineModel {
    pub map: ClusterMap,
    pub cit: InteractionMatrix,
    pub ctx: CitContext,
}

/// Base clustering of each phase followed by full interaction tensor
/// assembly.
pub fn build_offline(
    grid: &VoxelGrid,
    features: &OfflineFeatures,
    clusters_per_phase: &BTreeMap<PhaseId, usize>,
    options: KMeansOptions,
    seed: u64,
) -> Result<OfflineModel> {
    let map = base_clustering(grid, &features.dataset, clusters_per_phase, options, seed)?;
    from_map(grid, map)
}

/// Interaction tensors of a given clustering.
pub fn from_map(grid: &VoxelGrid, map: ClusterMap) -> Result<OfflineModel> {
    let ctx = CitContext::new(grid)?;
    let cit = assemble_matrix(&ctx, &map)?;
    Ok(OfflineModel { map, cit, ctx })
}

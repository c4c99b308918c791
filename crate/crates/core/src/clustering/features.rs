use crate::{Error, Result};

/// Row-major feature matrix with one row per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    data: Vec<f64>,
    dim: usize,
    voxel_ids: Vec<usize>,
}

impl FeatureDataset {
    pub fn new(data: Vec<f64>, dim: usize, voxel_ids: Vec<usize>) -> Result<Self> {
        if dim == 0 || data.len() != dim * voxel_ids.len() {
            return Err(Error::ShapeMismatch { expected: dim * voxel_ids.len(), actual: data.len() });
        }
        let mut sorted = voxel_ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidClustering("duplicate voxel ids in feature dataset".into()));
        }
        Ok(Self { data, dim, voxel_ids })
    }

    /// Dataset whose row `i` belongs to voxel `i`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidClustering("feature rows differ in length".into()));
        }
        Self::new(rows.concat(), dim, (0..rows.len()).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.voxel_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxel_ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn voxel_ids(&self) -> &[usize] {
        &self.voxel_ids
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Rows of the given voxels, in the given order.
    pub fn subset(&self, voxels: &[usize]) -> Result<Self> {
        let mut position = std::collections::HashMap::with_capacity(self.len());
        for (i, &v) in self.voxel_ids.iter().enumerate() {
            position.insert(v, i);
        }
        let mut data = Vec::with_capacity(voxels.len() * self.dim);
        for v in voxels {
            let &i = position
                .get(v)
                .ok_or_else(|| Error::InvalidClustering(format!("voxel {v} has no feature row")))?;
            data.extend_from_slice(self.row(i));
        }
        Self::new(data, self.dim, voxels.to_vec())
    }
}

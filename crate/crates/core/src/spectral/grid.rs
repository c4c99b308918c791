use std::collections::BTreeMap;
use std::f64::consts::PI;

use sha2::{Digest, Sha256};

use crate::{Error, PhaseId, Result};

/// Periodic regular grid of voxels with per-voxel phase labels.
///
/// Labels are stored row-major: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    dims: Vec<usize>,
    lengths: Vec<f64>,
    labels: Vec<PhaseId>,
}

impl VoxelGrid {
    pub fn new(dims: Vec<usize>, lengths: Vec<f64>, labels: Vec<PhaseId>) -> Result<Self> {
        if dims.is_empty() || dims.len() != lengths.len() {
            return Err(Error::InvalidGrid(format!(
                "{} dims for {} lengths",
                dims.len(),
                lengths.len()
            )));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidGrid(format!("dimension {d} < 2")));
        }
        if let Some(l) = lengths.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidGrid(format!("length {l} must be positive")));
        }
        let n: usize = dims.iter().product();
        if labels.len() != n {
            return Err(Error::ShapeMismatch { expected: n, actual: labels.len() });
        }
        Ok(Self { dims, lengths, labels })
    }

    /// Grid filled with a single phase.
    pub fn uniform(dims: Vec<usize>, lengths: Vec<f64>, phase: PhaseId) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, lengths, vec![phase; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn labels(&self) -> &[PhaseId] {
        &self.labels
    }

    pub fn n_dim(&self) -> usize {
        self.dims.len()
    }

    pub fn n_voxels(&self) -> usize {
        self.labels.len()
    }

    pub fn phase(&self, voxel: usize) -> PhaseId {
        self.labels[voxel]
    }

    /// Distinct phases in ascending order.
    pub fn phases(&self) -> Vec<PhaseId> {
        let mut p: Vec<PhaseId> = self.labels.clone();
        p.sort_unstable();
        p.dedup();
        p
    }

    /// Voxel count of every phase present.
    pub fn phase_counts(&self) -> BTreeMap<PhaseId, usize> {
        let mut counts = BTreeMap::new();
        for &p in &self.labels {
            *counts.entry(p).or_insert(0) += 1;
        }
        counts
    }

    /// Volume fraction of every phase present.
    pub fn phase_fractions(&self) -> BTreeMap<PhaseId, f64> {
        let n = self.n_voxels() as f64;
        self.phase_counts().into_iter().map(|(p, c)| (p, c as f64 / n)).collect()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for a in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.dims[a + 1];
        }
        strides
    }

    pub fn linear_index(&self, index: &[usize]) -> Result<usize> {
        self.check_index(index)?;
        Ok(index.iter().zip(self.strides()).map(|(s, st)| s * st).sum())
    }

    pub fn multi_index(&self, mut linear: usize) -> Vec<usize> {
        let strides = self.strides();
        strides
            .iter()
            .map(|&st| {
                let s = linear / st;
                linear %= st;
                s
            })
            .collect()
    }

    fn check_index(&self, index: &[usize]) -> Result<()> {
        if index.len() != self.dims.len() || index.iter().zip(&self.dims).any(|(s, n)| s >= n) {
            return Err(Error::IndexOutOfRange { index: index.to_vec(), dims: self.dims.clone() });
        }
        Ok(())
    }

    /// Content hash over dimensions, lengths and labels.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for d in &self.dims {
            h.update((*d as u64).to_le_bytes());
        }
        for l in &self.lengths {
            h.update(l.to_bits().to_le_bytes());
        }
        for p in &self.labels {
            h.update(p.0.to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Physical coordinates of a sampling point: `(l_i / n_i) s_i`.
pub fn sample_coordinates(grid: &VoxelGrid, index: &[usize]) -> Result<Vec<f64>> {
    grid.check_index(index)?;
    Ok(index
        .iter()
        .zip(grid.dims.iter().zip(&grid.lengths))
        .map(|(&s, (&n, &l))| l / n as f64 * s as f64)
        .collect())
}

/// Angular wave vector `(2π / l_i) s_i`, optionally folded to signed
/// frequencies (indices above `n/2` map to `s - n`).
pub fn frequency_vector(grid: &VoxelGrid, index: &[usize], folded: bool) -> Result<Vec<f64>> {
    grid.check_index(index)?;
    Ok(index
        .iter()
        .zip(grid.dims.iter().zip(&grid.lengths))
        .map(|(&s, (&n, &l))| {
            let k = if folded && s > n / 2 { s as f64 - n as f64 } else { s as f64 };
            2.0 * PI / l * k
        })
        .collect())
}

/// Folded wave vectors of every frequency sample, in grid layout.
#[derive(Debug, Clone)]
pub struct FrequencyGrid {
    dims: Vec<usize>,
    wave_vectors: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(grid: &VoxelGrid) -> Self {
        let n_dim = grid.n_dim();
        let mut wave_vectors = Vec::with_capacity(grid.n_voxels() * n_dim);
        for v in 0..grid.n_voxels() {
            let idx = grid.multi_index(v);
            wave_vectors.extend(frequency_vector(grid, &idx, true).expect("index in range"));
        }
        Self { dims: grid.dims.clone(), wave_vectors }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.wave_vectors.len() / self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wave_vectors.is_empty()
    }

    pub fn wave_vector(&self, sample: usize) -> &[f64] {
        let d = self.dims.len();
        &self.wave_vectors[sample * d..(sample + 1) * d]
    }

    /// Sample index of the frequency mirrored through the origin.
    pub fn mirror(&self, sample: usize) -> usize {
        let mut rem = sample;
        let mut out = 0;
        let mut stride: usize = self.dims.iter().product();
        for &n in &self.dims {
            stride /= n;
            let s = rem / stride;
            rem %= stride;
            out += ((n - s) % n) * stride;
        }
        out
    }
}

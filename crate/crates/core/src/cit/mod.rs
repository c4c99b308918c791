//! Cluster interaction tensors: spectral computation, cluster symmetry,
//! assembly, incremental update after cluster splits and a binary dump.
//!
//! Every tensor is stored as its two reference-independent parts, so the
//! interaction matrix of any isotropic reference material is a linear
//! combination that costs no further convolutions.

mod bench;
mod dump;

use std::collections::{BTreeMap, BTreeSet};

use rustfft::num_complex::Complex64;

pub use bench::{benchmark_cit_update, CitBenchReport};
pub use dump::{read_matrix, write_matrix, DUMP_MAGIC, DUMP_VERSION};

use crate::clustering::ClusterMap;
use crate::spectral::{green_coefficients, GreenParts, ReferenceMaterial, SpectralTransform};
use crate::tensor::Sym4;
use crate::{par, ClusterId, Error, Result};

/// Mandel entries of a symmetric 3×3 matrix that are computed; the rest
/// follow by symmetry.
const UPPER: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Reference-independent parts `(A, B)` of an interaction tensor; the tensor
/// of reference `(λ, μ)` is `c_a A + c_b B`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TensorParts {
    pub a: Sym4,
    pub b: Sym4,
}

impl TensorParts {
    pub fn combine(&self, reference: &ReferenceMaterial) -> Sym4 {
        let (ca, cb) = green_coefficients(reference);
        self.a * ca + self.b * cb
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { a: self.a * s, b: self.b * s }
    }
}

/// How an entry of an interaction matrix was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Full,
    Symmetry,
    Retained,
}

/// Number of entries of each provenance produced by the last assembly or update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CitCounters {
    pub full: usize,
    pub symmetry: usize,
    pub retained: usize,
}

/// Dense matrix of interaction tensors over the active clusters in
/// ascending id order; entry `(I, J)` is the strain response of `I` to the
/// stress polarization of `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    ids: Vec<ClusterId>,
    fractions: Vec<f64>,
    entries: Vec<TensorParts>,
    provenance: Vec<Provenance>,
    counters: CitCounters,
}

impl InteractionMatrix {
    pub fn ids(&self) -> &[ClusterId] {
        &self.ids
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn n_clusters(&self) -> usize {
        self.ids.len()
    }

    pub fn counters(&self) -> CitCounters {
        self.counters
    }

    pub fn index_of(&self, id: ClusterId) -> Result<usize> {
        self.ids.binary_search(&id).map_err(|_| Error::UnknownCluster(id))
    }

    /// Parts of entry `(i, j)` by position.
    pub fn parts(&self, i: usize, j: usize) -> &TensorParts {
        &self.entries[i * self.ids.len() + j]
    }

    pub fn provenance(&self, i: usize, j: usize) -> Provenance {
        self.provenance[i * self.ids.len() + j]
    }

    /// Interaction tensor between two clusters for a reference material.
    pub fn tensor(&self, reference: &ReferenceMaterial, i: ClusterId, j: ClusterId) -> Result<Sym4> {
        Ok(self.parts(self.index_of(i)?, self.index_of(j)?).combine(reference))
    }

    /// All tensors for a reference material, row-major by position.
    pub fn combined(&self, reference: &ReferenceMaterial) -> Vec<Sym4> {
        let (ca, cb) = green_coefficients(reference);
        self.entries.iter().map(|p| p.a * ca + p.b * cb).collect()
    }

    /// Largest relative deviation from the cluster symmetry
    /// `T(J,I) = f_I / f_J T(I,J)` over all pairs and both parts.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.ids.len();
        let scale = self.entries.iter().map(|p| p.a.norm().max(p.b.norm())).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let expect = symmetry_counterpart_parts(self.parts(i, j), self.fractions[i], self.fractions[j]);
                let got = self.parts(j, i);
                worst = worst.max((got.a - expect.a).norm() / scale).max((got.b - expect.b).norm() / scale);
            }
        }
        worst
    }

    /// Largest entry difference relative to the largest entry.
    pub fn max_relative_difference(&self, other: &Self) -> f64 {
        if self.ids != other.ids {
            return f64::INFINITY;
        }
        let scale = self.entries.iter().map(|p| p.a.norm().max(p.b.norm())).fold(0.0, f64::max);
        let diff = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(x, y)| (x.a - y.a).norm().max((x.b - y.b).norm()))
            .fold(0.0, f64::max);
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }
}

/// Per-voxel convolution of a cluster indicator with both Green operator parts.
#[derive(Debug, Clone)]
pub struct ConvolutionField {
    pub a: Vec<Sym4>,
    pub b: Vec<Sym4>,
}

/// Convolution of the indicator of `voxels` with the Green operator parts.
pub fn cluster_convolution(
    parts: &GreenParts,
    transform: &SpectralTransform,
    voxels: &[usize],
) -> Result<ConvolutionField> {
    let n = transform.len();
    if parts.len() != n {
        return Err(Error::ShapeMismatch { expected: n, actual: parts.len() });
    }
    if voxels.is_empty() {
        return Err(Error::InvalidClustering("convolution of an empty cluster".into()));
    }
    let mut indicator = vec![Complex64::default(); n];
    for &v in voxels {
        *indicator
            .get_mut(v)
            .ok_or_else(|| Error::IndexOutOfRange { index: vec![v], dims: transform.dims().to_vec() })? =
            Complex64::new(1.0, 0.0);
    }
    transform.forward(&mut indicator)?;
    // both parts are real and even, so each packed spectrum transforms back
    // to part A in the real and part B in the imaginary component
    let packed = par::try_map_range(UPPER.len(), |c| {
        let (r, s) = UPPER[c];
        let mut spec: Vec<Complex64> = indicator
            .iter()
            .zip(parts.a.iter().zip(&parts.b))
            .map(|(x, (a, b))| x * Complex64::new(a[(r, s)], b[(r, s)]))
            .collect();
        transform.inverse(&mut spec)?;
        Ok::<_, Error>(spec)
    })?;
    let mut a = vec![Sym4::zeros(); n];
    let mut b = vec![Sym4::zeros(); n];
    for (c, &(r, s)) in UPPER.iter().enumerate() {
        for v in 0..n {
            let z = packed[c][v];
            a[v][(r, s)] = z.re;
            a[v][(s, r)] = z.re;
            b[v][(r, s)] = z.im;
            b[v][(s, r)] = z.im;
        }
    }
    Ok(ConvolutionField { a, b })
}

/// Mean of a convolution field over the voxels of cluster `I`.
pub fn interaction_tensor(convolution: &ConvolutionField, voxels_i: &[usize]) -> Result<TensorParts> {
    if voxels_i.is_empty() {
        return Err(Error::InvalidClustering("interaction tensor of an empty cluster".into()));
    }
    let mut p = TensorParts::default();
    for &v in voxels_i {
        p.a += convolution.a[v];
        p.b += convolution.b[v];
    }
    Ok(p.scaled(1.0 / voxels_i.len() as f64))
}

/// `T(J,I) = f_I / f_J T(I,J)`.
pub fn symmetry_counterpart(t_ij: &Sym4, f_i: f64, f_j: f64) -> Sym4 {
    t_ij * (f_i / f_j)
}

fn symmetry_counterpart_parts(t_ij: &TensorParts, f_i: f64, f_j: f64) -> TensorParts {
    t_ij.scaled(f_i / f_j)
}

/// Context shared by assembly and update: Green parts and transform of a grid.
#[derive(Debug, Clone)]
pub struct CitContext {
    pub parts: GreenParts,
    pub transform: SpectralTransform,
}

impl CitContext {
    pub fn new(grid: &crate::spectral::VoxelGrid) -> Result<Self> {
        let freq = crate::spectral::FrequencyGrid::new(grid);
        Ok(Self { parts: GreenParts::new(&freq)?, transform: SpectralTransform::new(grid.dims()) })
    }
}

/// Computes column `j` (cluster `col`) for the rows listed in `rows`
/// (positions into `ids`), returning the parts per requested row.
fn column(
    ctx: &CitContext,
    map: &ClusterMap,
    col: ClusterId,
    row_ids: &[ClusterId],
) -> Result<Vec<TensorParts>> {
    let conv = cluster_convolution(&ctx.parts, &ctx.transform, &map.record(col)?.voxels)?;
    row_ids.iter().map(|&r| interaction_tensor(&conv, &map.record(r)?.voxels)).collect()
}

fn empty_matrix(map: &ClusterMap) -> InteractionMatrix {
    let ids = map.ids();
    let n = ids.len();
    InteractionMatrix {
        fractions: map.fractions(),
        ids,
        entries: vec![TensorParts::default(); n * n],
        provenance: vec![Provenance::Full; n * n],
        counters: CitCounters::default(),
    }
}

/// Full assembly: lower triangle (with diagonal) by convolution, upper
/// triangle by cluster symmetry.
pub fn assemble_matrix(ctx: &CitContext, map: &ClusterMap) -> Result<InteractionMatrix> {
    let mut m = empty_matrix(map);
    let n = m.ids.len();
    let ids = m.ids.clone();
    let columns = par::try_map_range(n, |j| column(ctx, map, ids[j], &ids[j..]))?;
    for (j, col) in columns.into_iter().enumerate() {
        for (k, p) in col.into_iter().enumerate() {
            let i = j + k;
            m.entries[i * n + j] = p;
            m.provenance[i * n + j] = Provenance::Full;
            m.counters.full += 1;
            if i != j {
                m.entries[j * n + i] = symmetry_counterpart_parts(&p, m.fractions[i], m.fractions[j]);
                m.provenance[j * n + i] = Provenance::Symmetry;
                m.counters.symmetry += 1;
            }
        }
    }
    Ok(m)
}

/// Assembly computing every entry by convolution; used as a reference.
pub fn assemble_matrix_unsymmetric(ctx: &CitContext, map: &ClusterMap) -> Result<InteractionMatrix> {
    let mut m = empty_matrix(map);
    let n = m.ids.len();
    let ids = m.ids.clone();
    let columns = par::try_map_range(n, |j| column(ctx, map, ids[j], &ids))?;
    for (j, col) in columns.into_iter().enumerate() {
        for (i, p) in col.into_iter().enumerate() {
            m.entries[i * n + j] = p;
        }
    }
    m.counters.full = n * n;
    Ok(m)
}

/// Updates an interaction matrix after clusters of `old_map` were replaced
/// by children in `new_map`. Entries between retained clusters are copied,
/// columns of new clusters are convolved for every row, and rows of new
/// clusters against retained columns follow by symmetry.
pub fn incremental_update(
    ctx: &CitContext,
    old: &InteractionMatrix,
    old_map: &ClusterMap,
    new_map: &ClusterMap,
) -> Result<InteractionMatrix> {
    let mut m = empty_matrix(new_map);
    let n = m.ids.len();
    let old_ids: BTreeSet<ClusterId> = old.ids.iter().copied().collect();
    let mut retained = Vec::new();
    let mut fresh = Vec::new();
    for (pos, &id) in m.ids.iter().enumerate() {
        if old_ids.contains(&id) {
            let a = old_map.record(id)?;
            let b = new_map.record(id)?;
            if a.voxels != b.voxels || a.phase != b.phase {
                return Err(Error::RetainedClusterChanged(id));
            }
            retained.push(pos);
        } else {
            fresh.push(pos);
        }
    }
    if fresh.is_empty() && m.ids == old.ids {
        return Ok(old.clone());
    }
    let old_pos: BTreeMap<ClusterId, usize> = old.ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    for &i in &retained {
        for &j in &retained {
            let (oi, oj) = (old_pos[&m.ids[i]], old_pos[&m.ids[j]]);
            m.entries[i * n + j] = *old.parts(oi, oj);
            m.provenance[i * n + j] = Provenance::Retained;
            m.counters.retained += 1;
        }
    }
    // rows needed for new column number k: all retained rows and the new
    // rows from k onwards
    let ids = m.ids.clone();
    let columns = par::try_map_range(fresh.len(), |k| {
        let rows: Vec<ClusterId> =
            retained.iter().chain(&fresh[k..]).map(|&p| ids[p]).collect();
        column(ctx, new_map, ids[fresh[k]], &rows)
    })?;
    for (k, col) in columns.into_iter().enumerate() {
        let j = fresh[k];
        let rows = retained.iter().chain(&fresh[k..]);
        for (&i, p) in rows.zip(col) {
            m.entries[i * n + j] = p;
            m.provenance[i * n + j] = Provenance::Full;
            m.counters.full += 1;
            if i != j {
                m.entries[j * n + i] = symmetry_counterpart_parts(&p, m.fractions[i], m.fractions[j]);
                m.provenance[j * n + i] = Provenance::Symmetry;
                m.counters.symmetry += 1;
            }
        }
    }
    Ok(m)
}

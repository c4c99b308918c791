//! Full-field spectral elasto-plastic solver used as the reference
//! solution, elastic strain concentration tensors, and error metrics.

use std::collections::BTreeMap;

use crate::materials::{ClusterState, PhaseMaterial};
use crate::solver::{compute_toughness, FractureCriterion, LoadingPath};
use crate::spectral::{
    assemble_green_operator, FrequencyGrid, GreenOperator, ReferenceMaterial, SpectralTransform, VoxelGrid,
};
use crate::tensor::{in_plane, Sym2, Sym2Ps, SQRT2};
use crate::{par, Error, PhaseId, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Relative change of the strain field ending the fixed-point iterations.
    pub tol: f64,
    pub max_iter: usize,
    pub max_cuts: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 20_000, max_cuts: 4 }
    }
}

/// Per-voxel fields at one increment.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub strain: Vec<Sym2>,
    pub stress: Vec<Sym2Ps>,
    pub acc_p: Vec<f64>,
    pub plastic_work: Vec<f64>,
}

impl FieldSnapshot {
    pub fn from_states(states: &[ClusterState]) -> Self {
        Self {
            strain: states.iter().map(|s| s.strain).collect(),
            stress: states.iter().map(|s| s.stress).collect(),
            acc_p: states.iter().map(|s| s.acc_p).collect(),
            plastic_work: states.iter().map(|s| s.plastic_work).collect(),
        }
    }
}

/// Homogenized state after one increment of the full-field solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRecord {
    pub strain: Sym2,
    pub stress: Sym2Ps,
    pub iterations: usize,
    pub fractured: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullFieldSolution {
    pub history: Vec<OracleRecord>,
    /// Fields at the requested increments (1-based).
    pub checkpoints: BTreeMap<usize, FieldSnapshot>,
    pub final_states: Vec<ClusterState>,
    /// First fractured increment (1-based).
    pub fracture_increment: Option<usize>,
    /// Area under the homogenized σ11-ε11 curve up to fracture.
    pub toughness: f64,
}

struct FullField<'a> {
    grid: &'a VoxelGrid,
    materials: Vec<PhaseMaterial>,
    green: GreenOperator,
    transform: SpectralTransform,
    options: OracleOptions,
}

impl FullField<'_> {
    /// Solves `ε = E − Γ * (σ(ε) − D⁰ε)` for the macro strain `target`.
    fn solve(&self, states_n: &[ClusterState], target: &Sym2, guess: Vec<Sym2>) -> Result<(Vec<ClusterState>, usize)> {
        let d0 = self.green.reference.elasticity();
        let mut eps = guess;
        for iteration in 1..=self.options.max_iter {
            let stresses = par::try_map_range(eps.len(), |v| {
                let (s, _) = self.materials[v].state_update(&states_n[v], &(eps[v] - states_n[v].strain))?;
                Ok::<_, Error>(in_plane(&s.stress))
            })?;
            let tau: Vec<Sym2> = stresses.iter().zip(&eps).map(|(s, e)| s - d0 * e).collect();
            let spec = self.green.apply(&self.transform.forward_sym2(&tau)?)?;
            let fluct = self.transform.inverse_sym2(&spec)?;
            let next: Vec<Sym2> = fluct.iter().map(|f| target - f).collect();
            let (mut diff, mut size) = (0.0, 0.0);
            for (a, b) in next.iter().zip(&eps) {
                diff += (a - b).norm_squared();
                size += a.norm_squared();
            }
            eps = next;
            if !diff.is_finite() {
                return Err(Error::FullFieldDivergence { iterations: iteration, change: f64::NAN });
            }
            if diff.sqrt() <= self.options.tol * size.sqrt() {
                let states = par::try_map_range(eps.len(), |v| {
                    Ok::<_, Error>(self.materials[v].state_update(&states_n[v], &(eps[v] - states_n[v].strain))?.0)
                })?;
                return Ok((states, iteration));
            }
            if iteration == self.options.max_iter {
                return Err(Error::FullFieldDivergence { iterations: iteration, change: (diff / size).sqrt() });
            }
        }
        unreachable!("max_iter >= 1")
    }

    fn solve_with_cuts(&self, states_n: &[ClusterState], from: &Sym2, to: &Sym2, guess: Vec<Sym2>, depth: usize) -> Result<(Vec<ClusterState>, usize)> {
        match self.solve(states_n, to, guess) {
            Ok(r) => Ok(r),
            Err(e) if depth >= self.options.max_cuts => Err(e),
            Err(_) => {
                let mid = (from + to) * 0.5;
                let start = |s: &[ClusterState], t: &Sym2, f: &Sym2| s.iter().map(|x| x.strain + (t - f)).collect();
                let (half, i1) = self.solve_with_cuts(states_n, from, &mid, start(states_n, &mid, from), depth + 1)?;
                let (full, i2) = self.solve_with_cuts(&half, &mid, to, start(&half, to, &mid), depth + 1)?;
                let states = full
                    .iter()
                    .zip(states_n)
                    .map(|(s, s0)| ClusterState { delta_strain: s.strain - s0.strain, delta_stress: s.stress - s0.stress, ..*s })
                    .collect();
                Ok((states, i1 + i2))
            }
        }
    }
}

fn setup<'a>(
    grid: &'a VoxelGrid,
    materials: &BTreeMap<PhaseId, PhaseMaterial>,
    reference: &ReferenceMaterial,
    options: OracleOptions,
) -> Result<FullField<'a>> {
    if grid.n_dim() != 2 {
        return Err(Error::UnsupportedDimension(grid.n_dim()));
    }
    let mats = grid
        .labels()
        .iter()
        .map(|p| materials.get(p).copied().ok_or(Error::UnknownPhase(*p)))
        .collect::<Result<Vec<_>>>()?;
    let green = assemble_green_operator(reference, &FrequencyGrid::new(grid))?;
    Ok(FullField { grid, materials: mats, green, transform: SpectralTransform::new(grid.dims()), options })
}

/// Voxelwise fracture criterion: the failed fraction of the phase reaches
/// the threshold.
pub fn voxel_fracture(grid: &VoxelGrid, states: &[ClusterState], crit: &FractureCriterion) -> Result<bool> {
    let (mut total, mut failed) = (0usize, 0usize);
    for (v, s) in states.iter().enumerate() {
        if grid.phase(v) == crit.phase {
            total += 1;
            failed += usize::from(s.acc_p > crit.acc_p_threshold);
        }
    }
    if total == 0 {
        return Err(Error::UnknownPhase(crit.phase));
    }
    Ok(failed as f64 / total as f64 >= crit.volume_fraction_threshold)
}

/// Strain-driven full-field solution of a loading path with the basic
/// fixed-point scheme; `checkpoints` lists 1-based increments whose fields
/// are kept.
pub fn solve_full_field(
    grid: &VoxelGrid,
    materials: &BTreeMap<PhaseId, PhaseMaterial>,
    loading: &LoadingPath,
    reference: &ReferenceMaterial,
    options: OracleOptions,
    checkpoints: &[usize],
    fracture: Option<&FractureCriterion>,
) -> Result<FullFieldSolution> {
    if !loading.is_strain_driven() {
        return Err(Error::InvalidConfig("the full-field solver supports strain-driven loading only".into()));
    }
    let ff = setup(grid, materials, reference, options)?;
    let n = ff.grid.n_voxels();
    let mut states = vec![ClusterState::default(); n];
    let mut macro_strain = Sym2::zeros();
    let mut previous_delta: Option<Vec<Sym2>> = None;
    let mut history = Vec::with_capacity(loading.len());
    let mut snaps = BTreeMap::new();
    let mut fracture_increment = None;
    for (m, inc) in loading.increments.iter().enumerate() {
        let target = macro_strain + inc.values;
        // extrapolate the previous strain increment field
        let guess: Vec<Sym2> = match &previous_delta {
            Some(d) => states.iter().zip(d).map(|(s, d)| s.strain + d).collect(),
            None => states.iter().map(|s| s.strain + inc.values).collect(),
        };
        let (next, iterations) = ff
            .solve_with_cuts(&states, &macro_strain, &target, guess, 0)
            .map_err(|e| Error::IncrementFailed { increment: m + 1, cuts: options.max_cuts, source: Box::new(e) })?;
        previous_delta = Some(next.iter().map(|s| s.delta_strain).collect());
        states = next;
        macro_strain = target;
        let inv = 1.0 / n as f64;
        let fractured = match fracture {
            Some(c) => voxel_fracture(grid, &states, c)?,
            None => false,
        };
        if fractured && fracture_increment.is_none() {
            fracture_increment = Some(m + 1);
        }
        history.push(OracleRecord {
            strain: states.iter().map(|s| s.strain).sum::<Sym2>() * inv,
            stress: states.iter().map(|s| s.stress).sum::<Sym2Ps>() * inv,
            iterations,
            fractured,
        });
        if checkpoints.contains(&(m + 1)) {
            snaps.insert(m + 1, FieldSnapshot::from_states(&states));
        }
    }
    let points: Vec<(f64, f64)> = history.iter().map(|r| (r.strain[0], r.stress[0])).collect();
    let toughness = compute_toughness(&points, fracture_increment);
    Ok(FullFieldSolution { history, checkpoints: snaps, final_states: states, fracture_increment, toughness })
}

/// Elastic strain concentration tensors: per voxel the 3×3 matrix mapping a
/// macroscale strain to the local strain, both in Voigt notation
/// `(ε11, ε22, 2ε12)`, flattened row-major.
pub fn strain_concentration(
    grid: &VoxelGrid,
    materials: &BTreeMap<PhaseId, PhaseMaterial>,
    reference: &ReferenceMaterial,
    options: OracleOptions,
) -> Result<Vec<[f64; 9]>> {
    let elastic: BTreeMap<PhaseId, PhaseMaterial> = materials
        .iter()
        .map(|(p, m)| Ok((*p, PhaseMaterial::elastic(m.young, m.poisson)?)))
        .collect::<Result<_>>()?;
    let ff = setup(grid, &elastic, reference, options)?;
    let n = grid.n_voxels();
    let loads = [Sym2::new(1.0, 0.0, 0.0), Sym2::new(0.0, 1.0, 0.0), Sym2::new(0.0, 0.0, SQRT2 * 0.5)];
    let mut h = vec![[0.0; 9]; n];
    for (c, load) in loads.iter().enumerate() {
        let zero = vec![ClusterState::default(); n];
        let (states, _) = ff.solve(&zero, load, vec![*load; n])?;
        for (v, s) in states.iter().enumerate() {
            let voigt = [s.strain[0], s.strain[1], SQRT2 * s.strain[2]];
            for r in 0..3 {
                h[v][3 * r + c] = voigt[r];
            }
        }
    }
    Ok(h)
}

/// `|reduced − reference| / |reference| × 100`.
pub fn relative_error(reduced: f64, reference: f64) -> Result<f64> {
    if reference == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((reduced - reference).abs() / reference.abs() * 100.0)
}

/// Root-mean-square voxelwise difference.
pub fn rmse_field(reduced: &[f64], reference: &[f64]) -> Result<f64> {
    if reduced.len() != reference.len() || reduced.is_empty() {
        return Err(Error::ShapeMismatch { expected: reference.len(), actual: reduced.len() });
    }
    let sum: f64 = reduced.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sum / reduced.len() as f64).sqrt())
}

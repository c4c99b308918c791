use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{Control, MacroConstraint, SolverConfig};
use crate::cit::InteractionMatrix;
use crate::clustering::ClusterMap;
use crate::materials::{ClusterState, PhaseMaterial};
use crate::spectral::ReferenceMaterial;
use crate::tensor::{in_plane, Sym2, Sym4};
use crate::{par, Error, PhaseId, Result};

/// Clusters of a reduced model in interaction matrix order.
#[derive(Debug, Clone)]
pub struct ReducedModel<'a> {
    pub fractions: Vec<f64>,
    pub materials: Vec<PhaseMaterial>,
    pub cit: &'a InteractionMatrix,
}

impl<'a> ReducedModel<'a> {
    pub fn new(
        map: &ClusterMap,
        cit: &'a InteractionMatrix,
        materials: &BTreeMap<PhaseId, PhaseMaterial>,
    ) -> Result<Self> {
        if cit.ids() != map.ids().as_slice() {
            return Err(Error::InvalidClustering("interaction matrix does not match the cluster map".into()));
        }
        let mut mats = Vec::with_capacity(cit.n_clusters());
        for &id in cit.ids() {
            let phase = map.record(id)?.phase;
            mats.push(*materials.get(&phase).ok_or(Error::UnknownPhase(phase))?);
        }
        Ok(Self { fractions: cit.fractions().to_vec(), materials: mats, cit })
    }

    pub fn n_clusters(&self) -> usize {
        self.fractions.len()
    }
}

/// Converged increment of the reduced system.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSolution {
    /// Cluster states in interaction matrix order.
    pub states: Vec<ClusterState>,
    /// Far-field strain increment.
    pub far_field: Sym2,
    /// Linear solves performed (over all sub-increments).
    pub iterations: usize,
    /// Number of increment halvings performed.
    pub cuts: usize,
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::ShapeMismatch { expected, actual });
    }
    Ok(())
}

/// Stacked residual: per cluster
/// `Δε_I + Σ_J T_IJ (Δσ_J − D⁰ Δε_J) − Δε⁰`, followed by the three
/// macroscale constraint rows.
pub fn assemble_residual(
    fractions: &[f64],
    tensors: &[Sym4],
    d0: &Sym4,
    delta_strains: &[Sym2],
    far_field: &Sym2,
    delta_stresses: &[Sym2],
    constraint: &MacroConstraint,
) -> Result<DVector<f64>> {
    let n = fractions.len();
    check_len(n, delta_strains.len())?;
    check_len(n, delta_stresses.len())?;
    check_len(n * n, tensors.len())?;
    let polarization: Vec<Sym2> = (0..n).map(|j| delta_stresses[j] - d0 * delta_strains[j]).collect();
    let rows = par::map_range(n, |i| {
        let mut r = delta_strains[i] - far_field;
        for (t, p) in tensors[i * n..(i + 1) * n].iter().zip(&polarization) {
            r += t * p;
        }
        r
    });
    let mut out = DVector::zeros(3 * (n + 1));
    for (i, r) in rows.iter().enumerate() {
        out.fixed_rows_mut::<3>(3 * i).copy_from(r);
    }
    let mean_strain: Sym2 = (0..n).map(|i| delta_strains[i] * fractions[i]).sum();
    let mean_stress: Sym2 = (0..n).map(|i| delta_stresses[i] * fractions[i]).sum();
    for c in 0..3 {
        out[3 * n + c] = match constraint.control[c] {
            Control::Strain => mean_strain[c] - constraint.values[c],
            Control::Stress => mean_stress[c] - constraint.values[c],
        };
    }
    Ok(out)
}

/// Jacobian of [`assemble_residual`] with respect to
/// `(Δε_1, …, Δε_n, Δε⁰)`.
pub fn assemble_jacobian(
    fractions: &[f64],
    tensors: &[Sym4],
    d0: &Sym4,
    tangents: &[Sym4],
    constraint: &MacroConstraint,
) -> Result<DMatrix<f64>> {
    let n = fractions.len();
    check_len(n, tangents.len())?;
    check_len(n * n, tensors.len())?;
    let size = 3 * (n + 1);
    let sensitivity: Vec<Sym4> = tangents.iter().map(|d| d - d0).collect();
    let blocks = par::map_range(n, |i| {
        (0..n)
            .map(|k| {
                let mut b = tensors[i * n + k] * sensitivity[k];
                if i == k {
                    b += Sym4::identity();
                }
                b
            })
            .collect::<Vec<_>>()
    });
    let mut jac = DMatrix::zeros(size, size);
    for (i, row) in blocks.iter().enumerate() {
        for (k, b) in row.iter().enumerate() {
            jac.fixed_view_mut::<3, 3>(3 * i, 3 * k).copy_from(b);
        }
        jac.fixed_view_mut::<3, 3>(3 * i, 3 * n).copy_from(&(-Sym4::identity()));
    }
    for c in 0..3 {
        for k in 0..n {
            for col in 0..3 {
                jac[(3 * n + c, 3 * k + col)] = match constraint.control[c] {
                    Control::Strain => fractions[k] * if c == col { 1.0 } else { 0.0 },
                    Control::Stress => fractions[k] * tangents[k][(c, col)],
                };
            }
        }
    }
    Ok(jac)
}

struct Norms {
    strain_residual: f64,
    strain_scale: f64,
    stress_residual: f64,
    stress_scale: f64,
}

fn norms(
    fractions: &[f64],
    residual: &DVector<f64>,
    delta_strains: &[Sym2],
    far_field: &Sym2,
    delta_stresses: &[Sym2],
    constraint: &MacroConstraint,
) -> Norms {
    let n = fractions.len();
    let mut ls = 0.0;
    let mut strain_size = 0.0;
    for i in 0..n {
        ls += fractions[i] * residual.fixed_rows::<3>(3 * i).norm_squared();
        strain_size += fractions[i] * delta_strains[i].norm_squared();
    }
    let mean_stress: Sym2 = (0..n).map(|i| delta_stresses[i] * fractions[i]).sum();
    let (mut strain_rows, mut stress_rows, mut strain_target, mut stress_target) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..3 {
        let r = residual[3 * n + c];
        match constraint.control[c] {
            Control::Strain => {
                strain_rows += r * r;
                strain_target += constraint.values[c] * constraint.values[c];
            }
            Control::Stress => {
                stress_rows += r * r;
                stress_target += constraint.values[c] * constraint.values[c];
            }
        }
    }
    Norms {
        strain_residual: ls.sqrt() + strain_rows.sqrt(),
        strain_scale: strain_target.sqrt().max(strain_size.sqrt()).max(far_field.norm()),
        stress_residual: stress_rows.sqrt(),
        stress_scale: stress_target.sqrt().max(mean_stress.norm()),
    }
}

fn update_states(
    model: &ReducedModel,
    states_n: &[ClusterState],
    delta_strains: &[Sym2],
) -> Result<Vec<(ClusterState, Sym4)>> {
    par::try_map_range(states_n.len(), |i| model.materials[i].state_update(&states_n[i], &delta_strains[i]))
}

/// Newton-Raphson solution of one increment without increment cutting.
/// At least one linear solve is always performed.
pub fn newton_solve_increment(
    model: &ReducedModel,
    states_n: &[ClusterState],
    guess: &[Sym2],
    constraint: &MacroConstraint,
    reference: &ReferenceMaterial,
    cfg: &SolverConfig,
) -> Result<IncrementSolution> {
    let n = model.n_clusters();
    check_len(n, states_n.len())?;
    check_len(n, guess.len())?;
    let tensors = model.cit.combined(reference);
    let d0 = reference.elasticity();
    let mut x: Vec<Sym2> = guess.to_vec();
    let mut far_field: Sym2 = (0..n).map(|i| guess[i] * model.fractions[i]).sum();
    let mut iteration = 0;
    loop {
        let updated = update_states(model, states_n, &x)?;
        let stresses: Vec<Sym2> = updated.iter().map(|(s, _)| in_plane(&s.delta_stress)).collect();
        let residual = assemble_residual(&model.fractions, &tensors, &d0, &x, &far_field, &stresses, constraint)?;
        let nm = norms(&model.fractions, &residual, &x, &far_field, &stresses, constraint);
        if !residual.iter().all(|v| v.is_finite()) {
            return Err(Error::NewtonDivergence { iterations: iteration, residual: f64::NAN });
        }
        let converged = nm.strain_residual <= cfg.newton_tol * nm.strain_scale
            && nm.stress_residual <= cfg.newton_tol * nm.stress_scale;
        if iteration >= 1 && converged {
            return Ok(IncrementSolution {
                states: updated.into_iter().map(|(s, _)| s).collect(),
                far_field,
                iterations: iteration,
                cuts: 0,
            });
        }
        if iteration == cfg.newton_max_iter {
            let rel = nm.strain_residual / nm.strain_scale.max(f64::MIN_POSITIVE);
            return Err(Error::NewtonDivergence { iterations: iteration, residual: rel });
        }
        let tangents: Vec<Sym4> = updated.iter().map(|(_, t)| *t).collect();
        let jac = assemble_jacobian(&model.fractions, &tensors, &d0, &tangents, constraint)?;
        let dx = jac.lu().solve(&(-residual)).ok_or(Error::SingularJacobian { iteration })?;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += dx.fixed_rows::<3>(3 * i);
        }
        far_field += dx.fixed_rows::<3>(3 * n);
        iteration += 1;
    }
}

/// [`newton_solve_increment`] with up to `cfg.max_cuts` recursive halvings
/// of a failed increment.
pub fn solve_increment_with_cuts(
    model: &ReducedModel,
    states_n: &[ClusterState],
    guess: &[Sym2],
    constraint: &MacroConstraint,
    reference: &ReferenceMaterial,
    cfg: &SolverConfig,
) -> Result<IncrementSolution> {
    solve_level(model, states_n, guess, constraint, reference, cfg, 0)
}

fn solve_level(
    model: &ReducedModel,
    states_n: &[ClusterState],
    guess: &[Sym2],
    constraint: &MacroConstraint,
    reference: &ReferenceMaterial,
    cfg: &SolverConfig,
    depth: usize,
) -> Result<IncrementSolution> {
    match newton_solve_increment(model, states_n, guess, constraint, reference, cfg) {
        Ok(s) => Ok(s),
        Err(e) if depth >= cfg.max_cuts || matches!(e, Error::ShapeMismatch { .. }) => Err(e),
        Err(_) => {
            let half = constraint.scaled(0.5);
            let half_guess: Vec<Sym2> = guess.iter().map(|g| g * 0.5).collect();
            let first = solve_level(model, states_n, &half_guess, &half, reference, cfg, depth + 1)?;
            let second = solve_level(model, &first.states, &half_guess, &half, reference, cfg, depth + 1)?;
            let states = second
                .states
                .iter()
                .zip(states_n)
                .map(|(s, s0)| ClusterState {
                    delta_strain: s.strain - s0.strain,
                    delta_stress: s.stress - s0.stress,
                    ..*s
                })
                .collect();
            Ok(IncrementSolution {
                states,
                far_field: first.far_field + second.far_field,
                iterations: first.iterations + second.iterations,
                cuts: 1 + first.cuts + second.cuts,
            })
        }
    }
}

use super::system::{solve_increment_with_cuts, IncrementSolution, ReducedModel};
use super::{MacroConstraint, SolverConfig};
use crate::materials::ClusterState;
use crate::spectral::ReferenceMaterial;
use crate::tensor::{in_plane, Sym2};
use crate::Result;

/// Relative size below which a regression basis vector counts as absent.
const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    /// Both moduli fitted.
    Fitted,
    /// Traceless strain increment: shear modulus fitted, λ kept.
    ShearOnly,
    /// No information (zero or purely volumetric increment) or a
    /// non-physical fit: previous moduli kept.
    Kept,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfConsistentFit {
    pub reference: ReferenceMaterial,
    pub status: FitStatus,
}

/// Least-squares fit of `Δσ ≈ λ tr(Δε) I + 2μ Δε` over in-plane Mandel
/// components.
pub fn self_consistent_fit(delta_eps: &Sym2, delta_sigma: &Sym2, previous: &ReferenceMaterial) -> SelfConsistentFit {
    let kept = SelfConsistentFit { reference: *previous, status: FitStatus::Kept };
    let tr = delta_eps[0] + delta_eps[1];
    let a = Sym2::new(tr, tr, 0.0);
    let b = delta_eps * 2.0;
    let (aa, ab, bb) = (a.dot(&a), a.dot(&b), b.dot(&b));
    let (asg, bsg) = (a.dot(delta_sigma), b.dot(delta_sigma));
    if bb == 0.0 || !bb.is_finite() {
        return kept;
    }
    let det = aa * bb - ab * ab;
    if aa <= DEGENERACY_TOL * bb {
        let mu = bsg / bb;
        return match ReferenceMaterial::new(previous.lambda, mu) {
            Ok(reference) => SelfConsistentFit { reference, status: FitStatus::ShearOnly },
            Err(_) => kept,
        };
    }
    if det <= DEGENERACY_TOL * aa * bb {
        return kept;
    }
    let lambda = (bb * asg - ab * bsg) / det;
    let mu = (aa * bsg - ab * asg) / det;
    match ReferenceMaterial::new(lambda, mu) {
        Ok(reference) => SelfConsistentFit { reference, status: FitStatus::Fitted },
        Err(_) => kept,
    }
}

/// Increment solved within the self-consistent loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ScIncrement {
    pub solution: IncrementSolution,
    /// Reference material of the final Newton solve.
    pub reference: ReferenceMaterial,
    /// Newton solves over all self-consistent passes.
    pub newton_iterations: usize,
    pub sc_iterations: usize,
    /// False when the loop stopped at `sc_max_iter` without converging.
    pub sc_converged: bool,
}

fn relative_change(a: &ReferenceMaterial, b: &ReferenceMaterial) -> f64 {
    let d = ((a.lambda - b.lambda).powi(2) + (a.mu - b.mu).powi(2)).sqrt();
    d / (b.lambda * b.lambda + b.mu * b.mu).sqrt()
}

/// Alternates Newton solves and reference fits until the reference material
/// stops changing. An infinite `sc_tol` performs a single Newton solve.
pub fn run_self_consistent_increment(
    model: &ReducedModel,
    states_n: &[ClusterState],
    guess: &[Sym2],
    constraint: &MacroConstraint,
    reference: &ReferenceMaterial,
    cfg: &SolverConfig,
) -> Result<ScIncrement> {
    let mut current = *reference;
    let mut newton_iterations = 0;
    let mut pass = 0;
    loop {
        pass += 1;
        let solution = solve_increment_with_cuts(model, states_n, guess, constraint, &current, cfg)?;
        newton_iterations += solution.iterations;
        let done = |sc_converged| ScIncrement {
            solution: solution.clone(),
            reference: current,
            newton_iterations,
            sc_iterations: pass,
            sc_converged,
        };
        if cfg.sc_tol.is_infinite() {
            return Ok(done(true));
        }
        let (de, ds) = solution.states.iter().zip(&model.fractions).fold(
            (Sym2::zeros(), Sym2::zeros()),
            |(e, s), (st, f)| (e + st.delta_strain * *f, s + in_plane(&st.delta_stress) * *f),
        );
        let fit = self_consistent_fit(&de, &ds, &current);
        if fit.status == FitStatus::Kept || relative_change(&fit.reference, &current) < cfg.sc_tol {
            return Ok(done(true));
        }
        if pass >= cfg.sc_max_iter {
            return Ok(done(false));
        }
        current = fit.reference;
    }
}

//! Online stage: the cluster-reduced Lippmann-Schwinger system solved per
//! loading increment by Newton-Raphson, wrapped in the regression-based
//! self-consistent update of the reference material, plus homogenization,
//! fracture detection and toughness.

mod loading;
mod post;
mod selfconsistent;
mod system;

pub use loading::{Control, LoadingPath, MacroConstraint};
pub use post::{check_fracture, compute_toughness, homogenize, FractureCriterion, Homogenized};
pub use selfconsistent::{run_self_consistent_increment, self_consistent_fit, FitStatus, ScIncrement, SelfConsistentFit};
pub use system::{
    assemble_jacobian, assemble_residual, newton_solve_increment, solve_increment_with_cuts,
    IncrementSolution, ReducedModel,
};

use crate::{Error, Result};

/// Tolerances and iteration caps of the online solver.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Relative residual tolerance of the Newton iterations.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Relative change of `(λ⁰, μ⁰)` ending the self-consistent loop; infinity
    /// disables the loop.
    pub sc_tol: f64,
    pub sc_max_iter: usize,
    /// Maximum number of increment halvings after a failed solve.
    pub max_cuts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { newton_tol: 1e-6, newton_max_iter: 12, sc_tol: 1e-4, sc_max_iter: 20, max_cuts: 4 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) || !(self.sc_tol > 0.0) {
            return Err(Error::InvalidConfig("solver tolerances must be positive".into()));
        }
        if self.newton_max_iter == 0 || self.sc_max_iter == 0 {
            return Err(Error::InvalidConfig("solver iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;

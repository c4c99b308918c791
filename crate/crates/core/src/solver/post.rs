use serde::{Deserialize, Serialize};

use crate::clustering::ClusterMap;
use crate::materials::ClusterState;
use crate::tensor::{Sym2, Sym2Ps};
use crate::{Error, PhaseId, Result};

/// Fracture when the fraction of a phase whose accumulated plastic strain
/// exceeds `acc_p_threshold` reaches `volume_fraction_threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractureCriterion {
    pub phase: PhaseId,
    pub volume_fraction_threshold: f64,
    pub acc_p_threshold: f64,
}

impl FractureCriterion {
    pub fn validate(&self) -> Result<()> {
        if !(self.volume_fraction_threshold > 0.0) || !(self.acc_p_threshold > 0.0) {
            return Err(Error::InvalidConfig("fracture thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// Volume averages of the cluster states.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Homogenized {
    pub strain: Sym2,
    pub stress: Sym2Ps,
    pub delta_strain: Sym2,
    pub delta_stress: Sym2Ps,
}

/// Volume-fraction weighted sums of cluster strains and stresses.
pub fn homogenize(states: &[ClusterState], fractions: &[f64]) -> Result<Homogenized> {
    if states.len() != fractions.len() {
        return Err(Error::ShapeMismatch { expected: fractions.len(), actual: states.len() });
    }
    let mut h = Homogenized::default();
    for (s, &f) in states.iter().zip(fractions) {
        h.strain += s.strain * f;
        h.stress += s.stress * f;
        h.delta_strain += s.delta_strain * f;
        h.delta_stress += s.delta_stress * f;
    }
    Ok(h)
}

/// Evaluates the fracture criterion; `states` follow `map.ids()` order.
pub fn check_fracture(states: &[ClusterState], map: &ClusterMap, crit: &FractureCriterion) -> Result<bool> {
    let ids = map.ids();
    if states.len() != ids.len() {
        return Err(Error::ShapeMismatch { expected: ids.len(), actual: states.len() });
    }
    let mut phase_fraction = 0.0;
    let mut failed = 0.0;
    for (s, id) in states.iter().zip(ids) {
        let rec = map.record(id)?;
        if rec.phase != crit.phase {
            continue;
        }
        let f = rec.voxels.len() as f64 / map.n_voxels() as f64;
        phase_fraction += f;
        if s.acc_p > crit.acc_p_threshold {
            failed += f;
        }
    }
    if phase_fraction == 0.0 {
        return Err(Error::UnknownPhase(crit.phase));
    }
    Ok(failed / phase_fraction >= crit.volume_fraction_threshold)
}

/// Trapezoidal area under a stress-strain curve starting at the origin.
/// `points[k]` is the state after increment `k + 1`; integration stops at
/// `fracture_increment` (inclusive) or at the end of the path.
pub fn compute_toughness(points: &[(f64, f64)], fracture_increment: Option<usize>) -> f64 {
    let end = fracture_increment.map_or(points.len(), |m| m.min(points.len()));
    let mut prev = (0.0, 0.0);
    let mut area = 0.0;
    for &(e, s) in &points[..end] {
        area += 0.5 * (s + prev.1) * (e - prev.0);
        prev = (e, s);
    }
    area
}

//! Constitutive models: isotropic linear elasticity and von Mises plasticity
//! with isotropic power-law hardening, both under plane strain.

use serde::{Deserialize, Serialize};

use crate::spectral::ReferenceMaterial;
use crate::tensor::{
    deviator, deviatoric_projector_ps, identity_ps, in_plane, in_plane4, isotropic_elasticity,
    isotropic_elasticity_ps, lift, Sym2, Sym2Ps, Sym4,
};
use crate::{Error, Result};

/// Floor applied to the accumulated plastic strain when evaluating the
/// hardening slope of power laws with exponent below one.
pub const HARDENING_SLOPE_FLOOR: f64 = 1e-12;
/// Maximum iterations of the scalar return-mapping equation.
pub const RETURN_MAPPING_MAX_ITER: usize = 50;
/// Residual tolerance of the return mapping relative to the initial yield stress.
pub const RETURN_MAPPING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaterialModel {
    Elastic,
    /// `σ_y(p) = yield_stress + hardening_coefficient * p^hardening_exponent`
    VonMises { yield_stress: f64, hardening_coefficient: f64, hardening_exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseMaterial {
    pub young: f64,
    pub poisson: f64,
    pub model: MaterialModel,
}

/// Per-cluster (or per-voxel) material state.
///
/// Stresses and plastic strains carry the out-of-plane component; strains are
/// in-plane because the out-of-plane strain vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClusterState {
    /// Total strain.
    pub strain: Sym2,
    /// Strain increment of the last update.
    pub delta_strain: Sym2,
    /// Total stress.
    pub stress: Sym2Ps,
    /// Stress increment of the last update.
    pub delta_stress: Sym2Ps,
    /// Plastic strain.
    pub eps_p: Sym2Ps,
    /// Accumulated plastic strain.
    pub acc_p: f64,
    /// Accumulated plastic work per unit volume.
    pub plastic_work: f64,
}

impl ClusterState {
    pub fn stress_in_plane(&self) -> Sym2 {
        in_plane(&self.stress)
    }
}

impl PhaseMaterial {
    pub fn elastic(young: f64, poisson: f64) -> Result<Self> {
        let m = Self { young, poisson, model: MaterialModel::Elastic };
        m.validate()?;
        Ok(m)
    }

    pub fn von_mises(
        young: f64,
        poisson: f64,
        yield_stress: f64,
        hardening_coefficient: f64,
        hardening_exponent: f64,
    ) -> Result<Self> {
        let m = Self {
            young,
            poisson,
            model: MaterialModel::VonMises { yield_stress, hardening_coefficient, hardening_exponent },
        };
        m.validate()?;
        Ok(m)
    }

    /// Elasto-plastic matrix of the two-particle benchmark.
    pub fn benchmark_matrix() -> Self {
        Self::von_mises(100.0, 0.3, 0.5, 0.2, 0.4).expect("valid constants")
    }

    /// Soft elastic particles of the two-particle benchmark.
    pub fn benchmark_particles() -> Self {
        Self::elastic(1.0, 0.19).expect("valid constants")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.young > 0.0 && self.young.is_finite()) {
            return Err(Error::InvalidMaterial(format!("Young's modulus {} must be positive", self.young)));
        }
        if !(self.poisson > -1.0 && self.poisson < 0.5) {
            return Err(Error::InvalidMaterial(format!("Poisson's ratio {} outside (-1, 0.5)", self.poisson)));
        }
        if let MaterialModel::VonMises { yield_stress, hardening_coefficient, hardening_exponent } = self.model {
            if !(yield_stress > 0.0 && yield_stress.is_finite()) {
                return Err(Error::InvalidMaterial(format!("yield stress {yield_stress} must be positive")));
            }
            if !(hardening_coefficient >= 0.0 && hardening_coefficient.is_finite()) {
                return Err(Error::InvalidMaterial(format!(
                    "hardening coefficient {hardening_coefficient} must be non-negative"
                )));
            }
            if !(hardening_exponent > 0.0 && hardening_exponent <= 1.0) {
                return Err(Error::InvalidMaterial(format!(
                    "hardening exponent {hardening_exponent} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn is_plastic(&self) -> bool {
        matches!(self.model, MaterialModel::VonMises { .. })
    }

    /// Lamé parameters `(λ, μ)`.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.young, self.poisson);
        (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
    }

    pub fn bulk(&self) -> f64 {
        let (l, m) = self.lame();
        l + 2.0 * m / 3.0
    }

    /// In-plane elasticity tensor.
    pub fn elasticity(&self) -> Sym4 {
        let (l, m) = self.lame();
        isotropic_elasticity(l, m)
    }

    pub fn hardening_stress(&self, acc_p: f64) -> Result<f64> {
        match self.model {
            MaterialModel::Elastic => {
                Err(Error::InvalidMaterial("elastic material has no hardening law".into()))
            }
            MaterialModel::VonMises { yield_stress, hardening_coefficient, hardening_exponent } => {
                Ok(yield_stress + hardening_coefficient * acc_p.max(0.0).powf(hardening_exponent))
            }
        }
    }

    /// Hardening slope `dσ_y/dp`, evaluated at `max(p, floor)`.
    pub fn hardening_slope(&self, acc_p: f64) -> Result<f64> {
        match self.model {
            MaterialModel::Elastic => {
                Err(Error::InvalidMaterial("elastic material has no hardening law".into()))
            }
            MaterialModel::VonMises { hardening_coefficient, hardening_exponent, .. } => {
                let p = acc_p.max(HARDENING_SLOPE_FLOOR);
                Ok(hardening_coefficient * hardening_exponent * p.powf(hardening_exponent - 1.0))
            }
        }
    }

    /// Incremental state update returning the new state and the in-plane
    /// consistent tangent.
    pub fn state_update(&self, state: &ClusterState, delta_strain: &Sym2) -> Result<(ClusterState, Sym4)> {
        let (lambda, mu) = self.lame();
        let strain = state.strain + delta_strain;
        let de = isotropic_elasticity_ps(lambda, mu);
        let trial_elastic = lift(&strain) - state.eps_p;
        let trial = de * trial_elastic;
        let mut next = ClusterState {
            strain,
            delta_strain: *delta_strain,
            stress: trial,
            delta_stress: trial - state.stress,
            ..*state
        };

        let MaterialModel::VonMises { yield_stress, .. } = self.model else {
            return Ok((next, in_plane4(&de)));
        };
        let s_trial = deviator(&trial);
        let s_norm = s_trial.norm();
        let q_trial = (1.5f64).sqrt() * s_norm;
        let sy_n = self.hardening_stress(state.acc_p)?;
        let tol = RETURN_MAPPING_TOL * yield_stress;
        if q_trial - sy_n <= tol {
            return Ok((next, in_plane4(&de)));
        }

        let g = mu;
        let residual = |dg: f64| -> Result<f64> {
            Ok(q_trial - 3.0 * g * dg - self.hardening_stress(state.acc_p + dg)?)
        };
        let (mut lo, mut hi) = (0.0, q_trial / (3.0 * g));
        // perfectly plastic estimate lies right of the root; the residual is
        // convex and decreasing so Newton converges monotonically from there
        let mut dg = (q_trial - sy_n) / (3.0 * g);
        let mut f = residual(dg)?;
        let mut iterations = 0;
        while f.abs() > tol {
            iterations += 1;
            if iterations > RETURN_MAPPING_MAX_ITER {
                return Err(Error::ReturnMapping { iterations: iterations - 1, residual: f });
            }
            if f > 0.0 {
                lo = dg;
            } else {
                hi = dg;
            }
            let slope = -3.0 * g - self.hardening_slope(state.acc_p + dg)?;
            let mut candidate = dg - f / slope;
            if !(candidate > lo && candidate < hi) {
                candidate = 0.5 * (lo + hi);
            }
            if candidate == dg {
                break;
            }
            dg = candidate;
            f = residual(dg)?;
        }

        let flow = s_trial * (1.5 / q_trial);
        let delta_eps_p = flow * dg;
        let stress = trial - delta_eps_p * (2.0 * g);
        next.stress = stress;
        next.delta_stress = stress - state.stress;
        next.eps_p = state.eps_p + delta_eps_p;
        next.acc_p = state.acc_p + dg;
        next.plastic_work = state.plastic_work + 0.5 * (state.stress + stress).dot(&delta_eps_p);

        let h = self.hardening_slope(next.acc_p)?;
        let n_unit = s_trial / s_norm;
        let m = identity_ps();
        let k = lambda + 2.0 * mu / 3.0;
        let tangent = deviatoric_projector_ps() * (2.0 * g * (1.0 - 3.0 * g * dg / q_trial))
            + n_unit * n_unit.transpose() * (6.0 * g * g * (dg / q_trial - 1.0 / (3.0 * g + h)))
            + m * m.transpose() * k;
        Ok((next, in_plane4(&tangent)))
    }
}

/// Volume-average (Voigt) of the Lamé parameters of a set of phases.
pub fn voigt_reference<'a>(
    phases: impl IntoIterator<Item = (&'a PhaseMaterial, f64)>,
) -> Result<ReferenceMaterial> {
    let (mut lambda, mut mu, mut total) = (0.0, 0.0, 0.0);
    for (mat, fraction) in phases {
        let (l, m) = mat.lame();
        lambda += fraction * l;
        mu += fraction * m;
        total += fraction;
    }
    if total <= 0.0 {
        return Err(Error::ZeroReference);
    }
    ReferenceMaterial::new(lambda / total, mu / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{sym2, von_mises};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hardening_law() {
        let m = PhaseMaterial::benchmark_matrix();
        assert_eq!(m.hardening_stress(0.0).unwrap(), 0.5);
        assert!((m.hardening_stress(1.0).unwrap() - 0.7).abs() < 1e-15);
        let perfect = PhaseMaterial::von_mises(10.0, 0.3, 0.4, 0.0, 0.5).unwrap();
        assert_eq!(perfect.hardening_stress(3.0).unwrap(), 0.4);
        assert!(PhaseMaterial::benchmark_particles().hardening_stress(0.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(PhaseMaterial::elastic(0.0, 0.3).is_err());
        assert!(PhaseMaterial::elastic(1.0, 0.5).is_err());
        assert!(PhaseMaterial::von_mises(1.0, 0.3, 0.0, 0.1, 0.5).is_err());
        assert!(PhaseMaterial::von_mises(1.0, 0.3, 1.0, -0.1, 0.5).is_err());
        assert!(PhaseMaterial::von_mises(1.0, 0.3, 1.0, 0.1, 1.5).is_err());
    }

    #[test]
    fn zero_increment_keeps_state() {
        let m = PhaseMaterial::benchmark_matrix();
        let (s1, _) = m.state_update(&ClusterState::default(), &sym2(0.02, -0.01, 0.005)).unwrap();
        let (s2, _) = m.state_update(&s1, &Sym2::zeros()).unwrap();
        assert!((s2.stress - s1.stress).norm() < 1e-12);
        assert_eq!(s2.acc_p, s1.acc_p);
    }

    #[test]
    fn volumetric_trial_stays_elastic() {
        let m = PhaseMaterial::benchmark_matrix();
        // an out-of-plane eigenstrain makes the elastic trial strain purely
        // volumetric, far beyond the uniaxial yield strain
        let e = 0.5;
        let state = ClusterState { strain: sym2(e, e, 0.0), eps_p: Sym2Ps::new(0.0, 0.0, -e, 0.0), ..Default::default() };
        let (s, t) = m.state_update(&state, &Sym2::zeros()).unwrap();
        assert_eq!(s.acc_p, 0.0);
        assert_eq!(t, m.elasticity());
        assert!(von_mises(&s.stress) < 1e-12);
    }

    #[test]
    fn yield_consistency_and_monotonicity() {
        let m = PhaseMaterial::benchmark_matrix();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut state = ClusterState::default();
        for _ in 0..200 {
            let d = sym2(
                rng.random_range(-0.004..0.006),
                rng.random_range(-0.004..0.004),
                rng.random_range(-0.004..0.004),
            );
            let (next, _) = m.state_update(&state, &d).unwrap();
            assert!(next.acc_p >= state.acc_p);
            assert!(next.plastic_work >= state.plastic_work - 1e-15);
            if next.acc_p > state.acc_p {
                let q = von_mises(&next.stress);
                assert!((q - m.hardening_stress(next.acc_p).unwrap()).abs() <= 1e-10 * 0.5);
            }
            state = next;
        }
    }

    #[test]
    fn tangent_matches_finite_differences() {
        let m = PhaseMaterial::benchmark_matrix();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in 0..20 {
            let mut state = ClusterState::default();
            for _ in 0..(case % 4) {
                let pre = sym2(rng.random_range(0.0..0.01), rng.random_range(-0.005..0.0), rng.random_range(-0.003..0.003));
                state = m.state_update(&state, &pre).unwrap().0;
            }
            let d = sym2(rng.random_range(0.005..0.02), rng.random_range(-0.01..0.0), rng.random_range(-0.005..0.005));
            let (_, tangent) = m.state_update(&state, &d).unwrap();
            let h = 1e-7;
            let mut fd = Sym4::zeros();
            for c in 0..3 {
                let mut dp = d;
                dp[c] += h;
                let mut dm = d;
                dm[c] -= h;
                let sp = m.state_update(&state, &dp).unwrap().0.stress_in_plane();
                let sm = m.state_update(&state, &dm).unwrap().0.stress_in_plane();
                fd.set_column(c, &((sp - sm) / (2.0 * h)));
            }
            assert!((fd - tangent).norm() <= 1e-5 * tangent.norm(), "case {case}: {fd} vs {tangent}");
        }
    }

    #[test]
    fn elastic_update_is_linear() {
        let m = PhaseMaterial::benchmark_particles();
        let d = sym2(0.3, -0.1, 0.2);
        let (a, _) = m.state_update(&ClusterState::default(), &d).unwrap();
        let (b, _) = m.state_update(&ClusterState::default(), &(d * 2.5)).unwrap();
        assert!((b.stress - a.stress * 2.5).norm() <= 1e-14 * b.stress.norm());
    }

    /// Uniaxial strain: q = 2G(ε - 3p/2) = σ_y(p), σ11 = Kε + 2q/3.
    fn uniaxial_oracle(m: &PhaseMaterial, eps: f64) -> f64 {
        let (_, g) = m.lame();
        let k = m.bulk();
        let q_el = 2.0 * g * eps;
        let q = if q_el <= m.hardening_stress(0.0).unwrap() {
            q_el
        } else {
            let (mut lo, mut hi) = (0.0, eps / 1.5);
            for _ in 0..200 {
                let p = 0.5 * (lo + hi);
                if 2.0 * g * (eps - 1.5 * p) - m.hardening_stress(p).unwrap() > 0.0 {
                    lo = p;
                } else {
                    hi = p;
                }
            }
            2.0 * g * (eps - 1.5 * 0.5 * (lo + hi))
        };
        k * eps + 2.0 * q / 3.0
    }

    #[test]
    fn uniaxial_strain_matches_scalar_oracle() {
        let m = PhaseMaterial::benchmark_matrix();
        let mut state = ClusterState::default();
        let de = 0.05 / 100.0;
        for i in 1..=100 {
            state = m.state_update(&state, &sym2(de, 0.0, 0.0)).unwrap().0;
            let expected = uniaxial_oracle(&m, de * i as f64);
            let rel = (state.stress[0] - expected).abs() / expected.abs();
            assert!(rel < 1e-6, "step {i}: {} vs {expected}", state.stress[0]);
        }
    }

    #[test]
    fn voigt_average() {
        let a = PhaseMaterial::benchmark_matrix();
        let b = PhaseMaterial::benchmark_particles();
        let r = voigt_reference([(&a, 0.75), (&b, 0.25)]).unwrap();
        assert!((r.mu - (0.75 * a.lame().1 + 0.25 * b.lame().1)).abs() < 1e-14);
    }
}

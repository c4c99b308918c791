use nalgebra::Vector3;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::FrequencyGrid;
use crate::tensor::{isotropic_elasticity, sym4_from_components, Sym4};
use crate::{par, Error, Result};

/// Isotropic linear elastic reference material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMaterial {
    pub lambda: f64,
    pub mu: f64,
}

impl ReferenceMaterial {
    /// Validated reference material for a plane (two-dimensional) problem.
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        Self::with_dim(lambda, mu, 2)
    }

    pub fn with_dim(lambda: f64, mu: f64, n_dim: usize) -> Result<Self> {
        let ok = lambda.is_finite()
            && mu.is_finite()
            && mu > 0.0
            && lambda + 2.0 * mu / n_dim as f64 > 0.0;
        if !ok {
            return Err(Error::InvalidReference { lambda, mu });
        }
        Ok(Self { lambda, mu })
    }

    pub fn elasticity(&self) -> Sym4 {
        isotropic_elasticity(self.lambda, self.mu)
    }
}

/// Scalar weights `(c_a, c_b)` such that the Green operator is
/// `c_a * A(ζ) + c_b * B(ζ)` for the reference-independent parts of
/// [`GreenParts`].
pub fn green_coefficients(reference: &ReferenceMaterial) -> (f64, f64) {
    let (l, m) = (reference.lambda, reference.mu);
    (1.0 / m, -(l + m) / (m * (l + 2.0 * m)))
}

fn unit_parts(zeta: &[f64]) -> (Sym4, Sym4) {
    let norm = zeta.iter().map(|z| z * z).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (Sym4::zeros(), Sym4::zeros());
    }
    let n = [zeta[0] / norm, zeta[1] / norm];
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let a = sym4_from_components(|k, h, i, j| {
        0.25 * (d(k, i) * n[h] * n[j]
            + d(h, i) * n[k] * n[j]
            + d(k, j) * n[h] * n[i]
            + d(h, j) * n[k] * n[i])
    });
    let b = sym4_from_components(|k, h, i, j| n[i] * n[j] * n[k] * n[h]);
    (a, b)
}

/// Reference-independent parts of the isotropic Green operator at every
/// frequency sample.
///
/// The operator of any reference material is `c_a A + c_b B` with the weights
/// from [`green_coefficients`]. At Nyquist frequencies the parts are averaged
/// with those of the mirrored frequency so that real fields map to real
/// fields.
#[derive(Debug, Clone)]
pub struct GreenParts {
    pub a: Vec<Sym4>,
    pub b: Vec<Sym4>,
}

impl GreenParts {
    pub fn new(freq: &FrequencyGrid) -> Result<Self> {
        if freq.dims().len() != 2 {
            return Err(Error::UnsupportedDimension(freq.dims().len()));
        }
        let parts = par::map_range(freq.len(), |s| {
            let m = freq.mirror(s);
            let (a, b) = unit_parts(freq.wave_vector(s));
            if m == s {
                return (a, b);
            }
            let (am, bm) = unit_parts(freq.wave_vector(m));
            let mirrored = freq.wave_vector(m).iter().zip(freq.wave_vector(s)).all(|(x, y)| *x == -*y);
            if mirrored {
                (a, b)
            } else {
                ((a + am) * 0.5, (b + bm) * 0.5)
            }
        });
        let (a, b) = parts.into_iter().unzip();
        Ok(Self { a, b })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn combine(&self, reference: &ReferenceMaterial) -> GreenOperator {
        let (ca, cb) = green_coefficients(reference);
        let components = self.a.iter().zip(&self.b).map(|(a, b)| a * ca + b * cb).collect();
        GreenOperator { reference: *reference, components }
    }
}

/// Frequency-domain Green operator of a reference material, one Mandel
/// matrix per frequency sample.
#[derive(Debug, Clone)]
pub struct GreenOperator {
    pub reference: ReferenceMaterial,
    pub components: Vec<Sym4>,
}

impl GreenOperator {
    /// Strain spectrum `Φ(ζ) : τ(ζ)` of a polarization spectrum.
    pub fn apply(&self, tau: &[Vector3<Complex64>]) -> Result<Vec<Vector3<Complex64>>> {
        if tau.len() != self.components.len() {
            return Err(Error::ShapeMismatch { expected: self.components.len(), actual: tau.len() });
        }
        Ok(par::map_range(tau.len(), |s| {
            let g = &self.components[s];
            let t = &tau[s];
            Vector3::from_fn(|r, _| {
                (0..3).fold(Complex64::default(), |acc, c| acc + t[c] * g[(r, c)])
            })
        }))
    }
}

pub fn assemble_green_operator(
    reference: &ReferenceMaterial,
    freq: &FrequencyGrid,
) -> Result<GreenOperator> {
    let reference = ReferenceMaterial::with_dim(reference.lambda, reference.mu, freq.dims().len())?;
    Ok(GreenParts::new(freq)?.combine(&reference))
}

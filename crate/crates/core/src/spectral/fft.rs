use std::sync::Arc;

use nalgebra::Vector3;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::tensor::Sym2;
use crate::{par, Error, Result};

/// Multidimensional DFT over a fixed grid shape.
///
/// Forward transforms are unnormalised; inverse transforms scale by `1/n_v`.
/// Plans are immutable and shared, buffers are owned by the caller.
#[derive(Clone)]
pub struct SpectralTransform {
    dims: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for SpectralTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralTransform").field("dims", &self.dims).finish()
    }
}

impl SpectralTransform {
    pub fn new(dims: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = dims.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self { dims: dims.to_vec(), forward, inverse }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), actual: n });
        }
        Ok(())
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let total = data.len();
        let mut stride = total;
        let mut lines = Vec::new();
        for (a, plan) in plans.iter().enumerate() {
            let n = self.dims[a];
            stride /= n;
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            // gather every line along this axis into contiguous storage
            lines.resize(total, Complex64::default());
            let block = n * stride;
            let mut line = 0;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let dst = &mut lines[line * n..(line + 1) * n];
                    for (s, d) in dst.iter_mut().enumerate() {
                        *d = data[outer + inner + s * stride];
                    }
                    line += 1;
                }
            }
            plan.process_with_scratch(&mut lines, &mut scratch);
            let mut line = 0;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let src = &lines[line * n..(line + 1) * n];
                    for (s, v) in src.iter().enumerate() {
                        data[outer + inner + s * stride] = *v;
                    }
                    line += 1;
                }
            }
        }
    }

    /// In-place unnormalised forward transform.
    pub fn forward(&self, data: &mut [Complex64]) -> Result<()> {
        self.check(data.len())?;
        self.run(data, &self.forward);
        Ok(())
    }

    /// In-place inverse transform including the `1/n_v` factor.
    pub fn inverse(&self, data: &mut [Complex64]) -> Result<()> {
        self.check(data.len())?;
        self.run(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
        Ok(())
    }

    pub fn forward_real(&self, field: &[f64]) -> Result<Vec<Complex64>> {
        let mut data: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut data)?;
        Ok(data)
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, spectrum: &[Complex64]) -> Result<Vec<f64>> {
        let mut data = spectrum.to_vec();
        self.inverse(&mut data)?;
        Ok(data.into_iter().map(|c| c.re).collect())
    }

    /// Component-wise forward transform of a symmetric second-order field.
    pub fn forward_sym2(&self, field: &[Sym2]) -> Result<Vec<Vector3<Complex64>>> {
        self.check(field.len())?;
        let comps = par::try_map_range(3, |c| {
            let scalar: Vec<f64> = field.iter().map(|v| v[c]).collect();
            self.forward_real(&scalar)
        })?;
        Ok((0..field.len())
            .map(|i| Vector3::new(comps[0][i], comps[1][i], comps[2][i]))
            .collect())
    }

    /// Component-wise inverse transform, real part.
    pub fn inverse_sym2(&self, spectrum: &[Vector3<Complex64>]) -> Result<Vec<Sym2>> {
        self.check(spectrum.len())?;
        let comps = par::try_map_range(3, |c| {
            let scalar: Vec<Complex64> = spectrum.iter().map(|v| v[c]).collect();
            self.inverse_real(&scalar)
        })?;
        Ok((0..spectrum.len())
            .map(|i| Sym2::new(comps[0][i], comps[1][i], comps[2][i]))
            .collect())
    }
}

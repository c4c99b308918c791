//! Periodic voxel grids, discrete Fourier transforms of tensor fields and the
//! frequency-domain Green operator of an isotropic reference material.

mod fft;
mod green;
mod grid;

pub use fft::SpectralTransform;
pub use green::{
    assemble_green_operator, green_coefficients, GreenOperator, GreenParts, ReferenceMaterial,
};
pub use grid::{frequency_vector, sample_coordinates, FrequencyGrid, VoxelGrid};

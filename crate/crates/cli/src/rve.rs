//! Voxel RVE input files and circular-particle generators.

use std::fmt::Write as _;
use std::path::Path;

use crom_core::rng::derived_rng;
use crom_core::spectral::VoxelGrid;
use crom_core::PhaseId;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

pub const MATRIX_PHASE: PhaseId = PhaseId(0);
pub const PARTICLE_PHASE: PhaseId = PhaseId(1);
/// Largest admissible gap between requested and achieved particle fraction.
pub const FRACTION_TOLERANCE: f64 = 0.02;
const MAX_PLACEMENT_ATTEMPTS: usize = 200_000;

/// Circular particles (phase 1) in a matrix (phase 0), wrapped periodically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// Two equal discs centred on the loading axis (axis 0) on either side
    /// of the grid centre, separated by `gap` voxels (a quarter of the
    /// domain when absent).
    TwoParticle {
        dims: [usize; 2],
        #[serde(default = "unit_lengths")]
        lengths: [f64; 2],
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gap: Option<f64>,
    },
    /// Randomly placed non-overlapping discs of equal radius reaching
    /// `volume_fraction`.
    MultiParticle {
        dims: [usize; 2],
        #[serde(default = "unit_lengths")]
        lengths: [f64; 2],
        radius: f64,
        volume_fraction: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn unit_lengths() -> [f64; 2] {
    [1.0, 1.0]
}

/// Generated grid with the achieved particle statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedRve {
    pub grid: VoxelGrid,
    pub n_particles: usize,
    pub volume_fraction: f64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let (dims, lengths, radius) = match self {
            Self::TwoParticle { dims, lengths, radius, gap } => {
                if gap.is_some_and(|g| !(g >= 0.0)) {
                    return Err(CliError::Generator("gap must be non-negative".into()));
                }
                (dims, lengths, radius)
            }
            Self::MultiParticle { dims, lengths, radius, volume_fraction, .. } => {
                if !(*volume_fraction > 0.0 && *volume_fraction < 1.0) {
                    return Err(CliError::Generator(format!("volume fraction {volume_fraction} outside (0, 1)")));
                }
                (dims, lengths, radius)
            }
        };
        if dims.iter().any(|&d| d < 2) {
            return Err(CliError::Generator(format!("grid dimensions {dims:?} must be at least 2")));
        }
        if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(CliError::Generator(format!("lengths {lengths:?} must be positive")));
        }
        if !(*radius > 0.0) || 2.0 * radius >= dims[0].min(dims[1]) as f64 {
            return Err(CliError::Generator(format!("radius {radius} does not fit the grid {dims:?}")));
        }
        Ok(())
    }
}

/// Periodic squared distance between voxel centre `(i, j)` and point `c`.
fn wrapped_dist2(i: usize, j: usize, c: [f64; 2], dims: [usize; 2]) -> f64 {
    let axis = |x: f64, c: f64, n: f64| {
        let d = (x - c).rem_euclid(n);
        d.min(n - d)
    };
    let dx = axis(i as f64 + 0.5, c[0], dims[0] as f64);
    let dy = axis(j as f64 + 0.5, c[1], dims[1] as f64);
    dx * dx + dy * dy
}

fn rasterize(dims: [usize; 2], lengths: [f64; 2], centers: &[[f64; 2]], radius: f64) -> Result<GeneratedRve> {
    let r2 = radius * radius;
    let labels: Vec<PhaseId> = (0..dims[0] * dims[1])
        .map(|v| {
            let (i, j) = (v / dims[1], v % dims[1]);
            if centers.iter().any(|&c| wrapped_dist2(i, j, c, dims) <= r2) {
                PARTICLE_PHASE
            } else {
                MATRIX_PHASE
            }
        })
        .collect();
    let inside = labels.iter().filter(|&&p| p == PARTICLE_PHASE).count();
    let grid = VoxelGrid::new(dims.to_vec(), lengths.to_vec(), labels)?;
    Ok(GeneratedRve { grid, n_particles: centers.len(), volume_fraction: inside as f64 / grid_len(dims) })
}

fn grid_len(dims: [usize; 2]) -> f64 {
    (dims[0] * dims[1]) as f64
}

/// Builds the voxel grid described by `spec`.
pub fn generate_rve(spec: &GeneratorSpec) -> Result<GeneratedRve> {
    spec.validate()?;
    match *spec {
        GeneratorSpec::TwoParticle { dims, lengths, radius, gap } => {
            let gap = gap.unwrap_or(dims[0] as f64 / 4.0);
            let (c0, c1) = (dims[0] as f64 / 2.0, dims[1] as f64 / 2.0);
            let offset = gap / 2.0 + radius;
            if 2.0 * offset + 2.0 * radius > dims[0] as f64 {
                return Err(CliError::Generator(format!(
                    "two discs of radius {radius} with gap {gap} do not fit along axis 0 ({} voxels)",
                    dims[0]
                )));
            }
            rasterize(dims, lengths, &[[c0 - offset, c1], [c0 + offset, c1]], radius)
        }
        GeneratorSpec::MultiParticle { dims, lengths, radius, volume_fraction, seed } => {
            let area = std::f64::consts::PI * radius * radius;
            let n = ((volume_fraction * grid_len(dims) / area).round() as usize).max(1);
            let mut rng = derived_rng(seed, &[0x0072_7665]);
            // one voxel of clearance keeps discretized discs from touching
            let min_dist2 = (2.0 * radius + 1.0).powi(2);
            let mut centers: Vec<[f64; 2]> = Vec::with_capacity(n);
            let mut attempts = 0;
            while centers.len() < n {
                attempts += 1;
                if attempts > MAX_PLACEMENT_ATTEMPTS {
                    return Err(CliError::Generator(format!(
                        "placed only {} of {n} particles of radius {radius}",
                        centers.len()
                    )));
                }
                let c = [rng.random_range(0.0..dims[0] as f64), rng.random_range(0.0..dims[1] as f64)];
                let clear = centers.iter().all(|o| {
                    let d = |a: f64, b: f64, n: usize| {
                        let t = (a - b).rem_euclid(n as f64);
                        t.min(n as f64 - t)
                    };
                    let (dx, dy) = (d(c[0], o[0], dims[0]), d(c[1], o[1], dims[1]));
                    dx * dx + dy * dy >= min_dist2
                });
                if clear {
                    centers.push(c);
                }
            }
            let rve = rasterize(dims, lengths, &centers, radius)?;
            if (rve.volume_fraction - volume_fraction).abs() > FRACTION_TOLERANCE {
                return Err(CliError::Generator(format!(
                    "achieved volume fraction {:.4} differs from {volume_fraction} by more than {FRACTION_TOLERANCE}",
                    rve.volume_fraction
                )));
            }
            Ok(rve)
        }
    }
}

/// Parses the text format: a header `n1 n2 l1 l2` followed by row-major
/// integer phase labels; lines starting with `#` are comments.
pub fn parse_rve(text: &str, origin: &Path) -> Result<VoxelGrid> {
    let err = |message: String| CliError::Rve { path: origin.to_path_buf(), message };
    let mut tokens = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#'))
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)));
    let mut header = Vec::with_capacity(4);
    for _ in 0..4 {
        let (_, t) = tokens.next().ok_or_else(|| err("missing header `n1 n2 l1 l2`".into()))?;
        header.push(t);
    }
    let dim = |t: &str| t.parse::<usize>().map_err(|_| err(format!("invalid grid dimension `{t}`")));
    let len = |t: &str| t.parse::<f64>().map_err(|_| err(format!("invalid length `{t}`")));
    let dims = vec![dim(header[0])?, dim(header[1])?];
    let lengths = vec![len(header[2])?, len(header[3])?];
    let expected = dims[0] * dims[1];
    let mut labels = Vec::with_capacity(expected);
    for (line, t) in tokens {
        let p = t.parse::<u32>().map_err(|_| err(format!("line {line}: invalid phase label `{t}`")))?;
        labels.push(PhaseId(p));
    }
    if labels.len() != expected {
        return Err(err(format!("expected {expected} labels for a {}x{} grid, found {}", dims[0], dims[1], labels.len())));
    }
    VoxelGrid::new(dims, lengths, labels).map_err(|e| err(e.to_string()))
}

pub fn load_rve(path: &Path) -> Result<VoxelGrid> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_rve(&text, path)
}

/// Text form accepted by [`parse_rve`], one grid row per line.
pub fn format_rve(grid: &VoxelGrid) -> String {
    let dims = grid.dims();
    let lengths = grid.lengths();
    let mut s = format!("{} {} {} {}\n", dims[0], dims[1], lengths[0], lengths[1]);
    for row in grid.labels().chunks(dims[1]) {
        let line: Vec<String> = row.iter().map(|p| p.0.to_string()).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

pub fn write_rve(path: &Path, grid: &VoxelGrid) -> Result<()> {
    std::fs::write(path, format_rve(grid)).map_err(io_err(path))
}

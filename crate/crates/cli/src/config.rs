//! Run configuration in TOML with strict key checking.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crom_core::adaptivity::AdaptivityConfig;
use crom_core::clustering::KMeansOptions;
use crom_core::materials::PhaseMaterial;
use crom_core::oracle::OracleOptions;
use crom_core::solver::{Control, FractureCriterion, LoadingPath, SolverConfig};
use crom_core::tensor::sym2;
use crom_core::PhaseId;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, CliError, Result};
use crate::rve::GeneratorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sca,
    Asca,
    Oracle,
    CitBench,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sca => "sca",
            Mode::Asca => "asca",
            Mode::Oracle => "oracle",
            Mode::CitBench => "cit-bench",
        })
    }
}

/// Voxel grid from a label file or a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RveSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
}

/// Proportional loading: `total` holds the tensor components `[11, 22, 12]`
/// reached after `increments` equal steps, each read as strain or stress
/// according to `control`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadingSection {
    pub total: [f64; 3],
    pub increments: usize,
    #[serde(default = "all_strain")]
    pub control: [Control; 3],
}

fn all_strain() -> [Control; 3] {
    [Control::Strain; 3]
}

impl LoadingSection {
    pub fn path(&self) -> Result<LoadingPath> {
        let [a, b, c] = self.total;
        Ok(LoadingPath::proportional(self.control, sym2(a, b, c), self.increments)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub tol: f64,
    pub max_iter: usize,
    pub max_cuts: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        let o = OracleOptions::default();
        Self { tol: o.tol, max_iter: o.max_iter, max_cuts: o.max_cuts }
    }
}

impl OracleSection {
    pub fn options(&self) -> OracleOptions {
        OracleOptions { tol: self.tol, max_iter: self.max_iter, max_cuts: self.max_cuts }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringSection {
    /// K-Means++ restarts of the base clustering.
    pub n_init: usize,
    /// Mini-batch size; absent runs full Lloyd iterations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mini_batch: Option<usize>,
}

impl Default for ClusteringSection {
    fn default() -> Self {
        let o = KMeansOptions::default();
        Self { n_init: o.n_init, mini_batch: o.mini_batch }
    }
}

impl ClusteringSection {
    pub fn options(&self) -> KMeansOptions {
        KMeansOptions { n_init: self.n_init, mini_batch: self.mini_batch }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CitBenchSection {
    pub n_init: usize,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "bench_dims")]
    pub dims: [usize; 2],
}

fn bench_dims() -> [usize; 2] {
    [64, 64]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Increments (1-based) at which fields and labels are dumped.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rve: Option<RveSection>,
    /// Keyed by phase id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub materials: BTreeMap<String, PhaseMaterial>,
    /// Base cluster count per phase id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub clusters: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loading: Option<LoadingSection>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptivity: Option<AdaptivityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fracture: Option<FractureCriterion>,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub clustering: ClusteringSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cit_bench: Option<CitBenchSection>,
}

impl RunConfig {
    /// Minimal configuration of the given mode with every optional section
    /// at its default.
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            seed: 0,
            output: None,
            checkpoints: Vec::new(),
            rve: None,
            materials: BTreeMap::new(),
            clusters: BTreeMap::new(),
            loading: None,
            solver: SolverConfig::default(),
            adaptivity: None,
            fracture: None,
            oracle: OracleSection::default(),
            clustering: ClusteringSection::default(),
            cit_bench: None,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// Hex SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Materials keyed by phase.
    pub fn phase_materials(&self) -> Result<BTreeMap<PhaseId, PhaseMaterial>> {
        self.materials.iter().map(|(k, m)| Ok((phase_key("materials", k)?, *m))).collect()
    }

    /// Cluster counts keyed by phase.
    pub fn phase_clusters(&self) -> Result<BTreeMap<PhaseId, usize>> {
        self.clusters.iter().map(|(k, n)| Ok((phase_key("clusters", k)?, *n))).collect()
    }

    pub fn loading_path(&self) -> Result<LoadingPath> {
        self.loading.as_ref().ok_or_else(|| missing(self.mode, "loading"))?.path()
    }

    /// Checks mode-required sections and value ranges. `text` is the source
    /// the configuration was parsed from, used to report line numbers.
    pub fn validate(&self, text: Option<&str>) -> Result<()> {
        let line = |section: &str, key: &str| text.and_then(|t| locate(t, section, key));
        let range = |section: &str, key: &str, message: String| CliError::Range {
            field: if section.is_empty() { key.to_string() } else { format!("{section}.{key}") },
            line: line(section, key),
            message,
        };
        let required: &[&str] = match self.mode {
            Mode::Sca => &["rve", "materials", "clusters", "loading"],
            Mode::Asca => &["rve", "materials", "clusters", "loading", "adaptivity"],
            Mode::Oracle => &["rve", "materials", "loading"],
            Mode::CitBench => &["cit_bench"],
        };
        for section in required {
            let present = match *section {
                "rve" => self.rve.is_some(),
                "materials" => !self.materials.is_empty(),
                "clusters" => !self.clusters.is_empty(),
                "loading" => self.loading.is_some(),
                "adaptivity" => self.adaptivity.is_some(),
                _ => self.cit_bench.is_some(),
            };
            if !present {
                return Err(missing(self.mode, section));
            }
        }
        if let Some(rve) = &self.rve {
            if rve.file.is_some() == rve.generator.is_some() {
                return Err(range("rve", "file", "exactly one of `file` and `generator` must be given".into()));
            }
            if let Some(g) = &rve.generator {
                g.validate()?;
            }
        }
        for (k, m) in &self.materials {
            phase_key("materials", k)?;
            m.validate().map_err(|e| range("materials", k, e.to_string()))?;
        }
        for (k, n) in &self.clusters {
            let phase = phase_key("clusters", k)?;
            if *n == 0 {
                return Err(range("clusters", k, "cluster count must be at least 1".into()));
            }
            if !self.materials.is_empty() && !self.materials.contains_key(k) {
                return Err(CliError::UnknownPhase { phase: phase.0, line: line("clusters", k) });
            }
        }
        if let Some(l) = &self.loading {
            if l.increments == 0 {
                return Err(range("loading", "increments", "at least one increment is required".into()));
            }
            if l.total.iter().any(|v| !v.is_finite()) {
                return Err(range("loading", "total", "components must be finite".into()));
            }
        }
        if matches!(self.mode, Mode::Sca | Mode::Asca | Mode::Oracle) {
            let n = self.loading.as_ref().map_or(0, |l| l.increments);
            if let Some(c) = self.checkpoints.iter().find(|&&c| c == 0 || c > n) {
                return Err(range("", "checkpoints", format!("checkpoint {c} outside 1..={n}")));
            }
        }
        self.solver.validate().map_err(|e| section_error("solver", SOLVER_KEYS, e, &line))?;
        if let Some(a) = &self.adaptivity {
            a.validate().map_err(|e| section_error("adaptivity", ADAPTIVITY_KEYS, e, &line))?;
        }
        if let Some(f) = &self.fracture {
            f.validate().map_err(|e| section_error("fracture", FRACTURE_KEYS, e, &line))?;
            if !self.materials.is_empty() && !self.materials.contains_key(&f.phase.0.to_string()) {
                return Err(CliError::UnknownPhase { phase: f.phase.0, line: line("fracture", "phase") });
            }
        }
        if !(self.oracle.tol > 0.0) || self.oracle.max_iter == 0 {
            return Err(range("oracle", "tol", "tolerance and iteration cap must be positive".into()));
        }
        if self.clustering.n_init == 0 {
            return Err(range("clustering", "n_init", "at least one restart is required".into()));
        }
        if let Some(b) = &self.cit_bench {
            if b.n_init < 2 {
                return Err(range("cit_bench", "n_init", "at least two initial clusters are required".into()));
            }
            if !(b.alpha > 0.0 && b.alpha <= 1.0) {
                return Err(range("cit_bench", "alpha", format!("{} is outside (0, 1]", b.alpha)));
            }
            if !(b.beta > 0.0) {
                return Err(range("cit_bench", "beta", format!("{} must be positive", b.beta)));
            }
        }
        Ok(())
    }
}

const SOLVER_KEYS: &[&str] = &["newton_tol", "newton_max_iter", "sc_tol", "sc_max_iter", "max_cuts"];
const FRACTURE_KEYS: &[&str] = &["volume_fraction_threshold", "acc_p_threshold", "phase"];
const ADAPTIVITY_KEYS: &[&str] = &[
    "feature",
    "trigger_ratio",
    "child_volume_fraction",
    "split_factor",
    "split_amplitude",
    "magnitude_exponent",
    "theta_low",
    "frequency",
    "max_consecutive_steps",
    "cluster_budget",
    "min_feature_value",
    "max_level_gap",
    "max_level",
    "min_voxels_per_cluster",
    "scan_frequency",
    "repeat_increment",
    "adaptive_phases",
    "rewind_trigger",
    "rewind",
];

/// Maps a library validation error to the first section key it names.
fn section_error(
    section: &str,
    keys: &[&str],
    e: crom_core::Error,
    line: &dyn Fn(&str, &str) -> Option<usize>,
) -> CliError {
    let message = e.to_string();
    let mut sorted = keys.to_vec();
    sorted.sort_by_key(|k| std::cmp::Reverse(k.len()));
    let key = sorted.into_iter().find(|k| message.contains(k));
    CliError::Range {
        field: key.map_or(section.to_string(), |k| format!("{section}.{k}")),
        line: key.and_then(|k| line(section, k)),
        message,
    }
}

fn missing(mode: Mode, section: &str) -> CliError {
    CliError::MissingSection { mode: mode.to_string(), section: section.to_string() }
}

fn phase_key(section: &str, key: &str) -> Result<PhaseId> {
    key.parse::<u32>().map(PhaseId).map_err(|_| CliError::Range {
        field: format!("{section}.{key}"),
        line: None,
        message: "table keys must be non-negative integer phase ids".into(),
    })
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// 1-based line of `key` inside table `section` (`""` for the root table).
pub fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_start_matches('[').split(']').next().unwrap_or("").trim().to_string();
            continue;
        }
        if current != section {
            continue;
        }
        if let Some(rest) = line.strip_prefix(key).or_else(|| line.strip_prefix(&format!("\"{key}\""))) {
            if rest.trim_start().starts_with('=') {
                return Some(i + 1);
            }
        }
    }
    None
}

/// Parses and validates configuration text.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<RunConfig> {
    let cfg: RunConfig =
        toml::from_str(text).map_err(|e| CliError::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
    cfg.validate(Some(text))?;
    Ok(cfg)
}

/// Reads, parses and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_config_str(&text, path)
}

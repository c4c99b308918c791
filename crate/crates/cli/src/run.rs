//! Mode pipelines and artifact writing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crom_core::cit::{benchmark_cit_update, write_matrix};
use crom_core::materials::PhaseMaterial;
use crom_core::offline::{build_offline, compute_features, grid_voigt_reference};
use crom_core::oracle::{solve_full_field, FieldSnapshot};
use crom_core::simulation::{run_simulation, SimulationConfig};
use crom_core::spectral::VoxelGrid;
use crom_core::tensor::{components, SQRT2};
use crom_core::PhaseId;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, Mode, RunConfig};
use crate::error::{io_err, CliError, Result};
use crate::io::{format_history, format_jsonl, format_labels, header_line, FieldDump, HistoryRow};
use crate::rve::{generate_rve, load_rve};

pub const HISTORY_FILE: &str = "history.csv";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CIT_FILE: &str = "cit.bin";
pub const CIT_BENCH_FILE: &str = "cit_bench.csv";
pub const FIELDS_DIR: &str = "fields";
pub const LABELS_DIR: &str = "labels";
/// Fields dumped at every checkpoint with their component counts.
pub const FIELD_NAMES: [(&str, usize); 4] = [("acc_p", 1), ("plastic_work", 1), ("strain", 3), ("stress", 4)];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub increments: usize,
    pub toughness: Option<f64>,
    pub fracture_increment: Option<usize>,
    pub final_clusters: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    header: &'a str,
    config_hash: &'a str,
    seed: u64,
    mode: String,
    status: &'static str,
    partial: bool,
    error: Option<String>,
    crom_version: &'static str,
    grid_hash: Option<String>,
    summary: Option<&'a RunSummary>,
    /// SHA-256 of every written artifact, keyed by relative path.
    files: &'a BTreeMap<String, String>,
    config: String,
}

/// Output directory writer recording a hash per file.
struct Artifacts {
    root: PathBuf,
    header: String,
    files: BTreeMap<String, String>,
    grid_hash: Option<String>,
}

impl Artifacts {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
        self.files.insert(rel.to_string(), hex(&Sha256::digest(bytes)));
        Ok(())
    }

    fn fields(&mut self, grid: &VoxelGrid, increment: usize, snap: &FieldSnapshot) -> Result<()> {
        for (name, n_components) in FIELD_NAMES {
            let data: Vec<f64> = match name {
                "acc_p" => snap.acc_p.clone(),
                "plastic_work" => snap.plastic_work.clone(),
                "strain" => snap.strain.iter().flat_map(components).collect(),
                _ => snap.stress.iter().flat_map(stress_components).collect(),
            };
            let dump = FieldDump {
                header: self.header.clone(),
                name: name.to_string(),
                dims: grid.dims().to_vec(),
                increment,
                components: n_components,
                data,
            };
            self.write(&format!("{FIELDS_DIR}/{}", FieldDump::file_name(name, increment)), &dump.to_bytes())?;
        }
        Ok(())
    }
}

/// Builds the grid of the `[rve]` section; relative file paths resolve
/// against `base`.
pub fn build_grid(cfg: &RunConfig, base: &Path) -> Result<VoxelGrid> {
    let rve = cfg.rve.as_ref().ok_or_else(|| CliError::MissingSection {
        mode: cfg.mode.to_string(),
        section: "rve".into(),
    })?;
    match (&rve.file, &rve.generator) {
        (Some(file), None) => load_rve(&base.join(file)),
        (None, Some(g)) => Ok(generate_rve(g)?.grid),
        _ => Err(CliError::Range {
            field: "rve.file".into(),
            line: None,
            message: "exactly one of `file` and `generator` must be given".into(),
        }),
    }
}

fn check_phases(grid: &VoxelGrid, materials: &BTreeMap<PhaseId, PhaseMaterial>) -> Result<()> {
    match grid.phases().into_iter().find(|p| !materials.contains_key(p)) {
        Some(p) => Err(CliError::UnknownPhase { phase: p.0, line: None }),
        None => Ok(()),
    }
}

fn stress_components(s: &crom_core::tensor::Sym2Ps) -> [f64; 4] {
    [s[0], s[1], s[2], s[3] / SQRT2]
}

fn execute(cfg: &RunConfig, base: &Path, art: &mut Artifacts) -> Result<RunSummary> {
    if cfg.mode == Mode::CitBench {
        let b = cfg.cit_bench.as_ref().ok_or_else(|| CliError::MissingSection {
            mode: cfg.mode.to_string(),
            section: "cit_bench".into(),
        })?;
        let grid = VoxelGrid::uniform(b.dims.to_vec(), vec![1.0, 1.0], PhaseId(0))?;
        let report = benchmark_cit_update(&grid, b.n_init, b.alpha, b.beta, cfg.seed)?;
        let text = format!("{}\n{}\n{}\n", art.header, CIT_BENCH_COLUMNS, cit_bench_row(&report));
        art.write(CIT_BENCH_FILE, text.as_bytes())?;
        return Ok(RunSummary { increments: 0, toughness: None, fracture_increment: None, final_clusters: None });
    }
    let grid = build_grid(cfg, base)?;
    art.grid_hash = Some(hex(&grid.hash()));
    let materials = cfg.phase_materials()?;
    check_phases(&grid, &materials)?;
    let path = cfg.loading_path()?;
    let dims = grid.dims().to_vec();
    if cfg.mode == Mode::Oracle {
        let reference = grid_voigt_reference(&grid, &materials)?;
        let sol = solve_full_field(
            &grid,
            &materials,
            &path,
            &reference,
            cfg.oracle.options(),
            &cfg.checkpoints,
            cfg.fracture.as_ref(),
        )?;
        let rows: Vec<HistoryRow> = sol
            .history
            .iter()
            .enumerate()
            .map(|(k, r)| HistoryRow {
                increment: k + 1,
                strain: components(&r.strain),
                stress: stress_components(&r.stress),
                n_clusters: grid.n_voxels(),
                ref_lambda: reference.lambda,
                ref_mu: reference.mu,
                fractured: r.fractured,
                newton_iterations: r.iterations,
                sc_iterations: 0,
            })
            .collect();
        art.write(HISTORY_FILE, format_history(&art.header, &rows).as_bytes())?;
        for (m, snap) in &sol.checkpoints {
            art.fields(&grid, *m, snap)?;
        }
        let empty: [(); 0] = [];
        art.write(EVENTS_FILE, format_jsonl(&art.header, &empty)?.as_bytes())?;
        return Ok(RunSummary {
            increments: rows.len(),
            toughness: Some(sol.toughness),
            fracture_increment: sol.fracture_increment,
            final_clusters: Some(grid.n_voxels()),
        });
    }
    let clusters = cfg.phase_clusters()?;
    let features = compute_features(&grid, &materials, cfg.oracle.options())?;
    let offline = build_offline(&grid, &features, &clusters, cfg.clustering.options(), cfg.seed)?;
    let sim = SimulationConfig {
        solver: cfg.solver,
        adaptivity: if cfg.mode == Mode::Asca { cfg.adaptivity.clone() } else { None },
        fracture: cfg.fracture,
        checkpoints: cfg.checkpoints.clone(),
        reference: None,
        seed: cfg.seed,
    };
    let res = run_simulation(&grid, &materials, offline, &features, &path, &sim)?;
    let rows: Vec<HistoryRow> = res
        .history
        .iter()
        .map(|r| HistoryRow {
            increment: r.increment,
            strain: components(&r.strain),
            stress: stress_components(&r.stress),
            n_clusters: r.n_clusters,
            ref_lambda: r.reference.lambda,
            ref_mu: r.reference.mu,
            fractured: r.fractured,
            newton_iterations: r.newton_iterations,
            sc_iterations: r.sc_iterations,
        })
        .collect();
    art.write(HISTORY_FILE, format_history(&art.header, &rows).as_bytes())?;
    for (m, snap) in &res.checkpoints {
        art.fields(&grid, *m, snap)?;
    }
    for (m, labels) in &res.cluster_labels {
        let ids: Vec<u32> = labels.iter().map(|c| c.0).collect();
        let text = format_labels(&art.header, &dims, *m, &ids);
        art.write(&format!("{LABELS_DIR}/labels_{m:06}.txt"), text.as_bytes())?;
    }
    art.write(EVENTS_FILE, format_jsonl(&art.header, &res.events)?.as_bytes())?;
    let mut cit = format!("{}\n", art.header).into_bytes();
    write_matrix(&mut cit, &res.cit, &grid, &res.map)?;
    art.write(CIT_FILE, &cit)?;
    Ok(RunSummary {
        increments: rows.len(),
        toughness: Some(res.toughness),
        fracture_increment: res.fracture_increment,
        final_clusters: Some(res.map.n_clusters()),
    })
}

pub const CIT_BENCH_COLUMNS: &str = "n_init,alpha,beta,n_old,n_new,n_total,standard_full,standard_symmetry,\
proposed_full,proposed_symmetry,proposed_retained,time_standard_s,time_proposed_s,speedup,max_difference";

pub fn cit_bench_row(r: &crom_core::cit::CitBenchReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{:.6e},{:.6e},{:.4},{:.3e}",
        r.n_init,
        r.alpha,
        r.beta,
        r.n_old,
        r.n_new,
        r.n_total,
        r.standard.full,
        r.standard.symmetry,
        r.proposed.full,
        r.proposed.symmetry,
        r.proposed.retained,
        r.time_standard.as_secs_f64(),
        r.time_proposed.as_secs_f64(),
        r.speedup(),
        r.max_difference
    )
}

/// Executes the configured pipeline into `out`. The manifest is written in
/// every case and flags incomplete output on failure.
pub fn run(cfg: &RunConfig, base: &Path, out: &Path) -> Result<RunSummary> {
    cfg.validate(None)?;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let hash = cfg.hash();
    let mut art = Artifacts {
        root: out.to_path_buf(),
        header: header_line(&hash, cfg.seed),
        files: BTreeMap::new(),
        grid_hash: None,
    };
    let result = execute(cfg, base, &mut art);
    let header = art.header.clone();
    let manifest = Manifest {
        header: &header,
        config_hash: &hash,
        seed: cfg.seed,
        mode: cfg.mode.to_string(),
        status: if result.is_ok() { "complete" } else { "failed" },
        partial: result.is_err(),
        error: result.as_ref().err().map(|e| e.to_string()),
        crom_version: env!("CARGO_PKG_VERSION"),
        grid_hash: art.grid_hash.clone(),
        summary: result.as_ref().ok(),
        files: &art.files,
        config: cfg.to_toml(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    let path = out.join(MANIFEST_FILE);
    std::fs::write(&path, json + "\n").map_err(io_err(&path))?;
    result
}

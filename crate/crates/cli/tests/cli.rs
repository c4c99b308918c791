use std::path::{Path, PathBuf};

use crom_cli::compare::compare;
use crom_cli::config::{locate, parse_config_str, Mode, RunConfig};
use crom_cli::io::{read_history, FieldDump};
use crom_cli::rve::{generate_rve, parse_rve, GeneratorSpec, PARTICLE_PHASE};
use crom_cli::run::{run, FIELDS_DIR, HISTORY_FILE, MANIFEST_FILE};
use crom_cli::CliError;
use crom_core::PhaseId;

const ELASTIC_SCA: &str = r#"
mode = "sca"

[rve]
file = "rve.txt"

[materials.0]
young = 10.0
poisson = 0.3
model = { kind = "elastic" }

[materials.1]
young = 1.0
poisson = 0.2
model = { kind = "elastic" }

[clusters]
0 = 2
1 = 1

[loading]
total = [1e-3, 0.0, 0.0]
increments = 1
"#;

const BENCHMARK: &str = r#"
mode = "asca"
seed = 7
checkpoints = [50, 100, 150, 200]

[rve.generator]
kind = "two_particle"
dims = [80, 80]
radius = 12.0

[materials.0]
young = 100.0
poisson = 0.3
model = { kind = "von_mises", yield_stress = 0.5, hardening_coefficient = 0.2, hardening_exponent = 0.4 }

[materials.1]
young = 1.0
poisson = 0.19
model = { kind = "elastic" }

[clusters]
0 = 16
1 = 4

[loading]
total = [5e-2, 0.0, 0.0]
increments = 200

[adaptivity]
trigger_ratio = 0.1
child_volume_fraction = 0.25
cluster_budget = 68
adaptive_phases = [0]
rewind = true
rewind_trigger = "start"

[fracture]
phase = 0
volume_fraction_threshold = 0.005
acc_p_threshold = 0.25
"#;

fn origin() -> &'static Path {
    Path::new("test.toml")
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = parse_config_str(ELASTIC_SCA, origin()).unwrap();
    assert_eq!(cfg.mode, Mode::Sca);
    assert_eq!(cfg.seed, 0);
    assert_eq!(cfg.solver, crom_core::solver::SolverConfig::default());
    assert_eq!(cfg.clustering.n_init, 10);
    assert!(cfg.adaptivity.is_none());
    assert_eq!(cfg.phase_clusters().unwrap()[&PhaseId(0)], 2);
}

#[test]
fn out_of_range_trigger_ratio_names_field_and_line() {
    let text = BENCHMARK.replace("trigger_ratio = 0.1", "trigger_ratio = 1.5");
    let err = parse_config_str(&text, origin()).unwrap_err();
    let line = locate(&text, "adaptivity", "trigger_ratio");
    match &err {
        CliError::Range { field, line: l, .. } => {
            assert_eq!(field, "adaptivity.trigger_ratio");
            assert_eq!(*l, line);
            assert!(l.is_some());
        }
        other => panic!("unexpected error {other}"),
    }
    assert!(err.to_string().contains("trigger_ratio"));
}

#[test]
fn unknown_key_is_rejected_with_line() {
    let text = ELASTIC_SCA.replace("increments = 1", "increments = 1\nramp = true");
    let err = parse_config_str(&text, origin()).unwrap_err();
    assert!(matches!(err, CliError::Parse { .. }));
    let msg = err.to_string();
    assert!(msg.contains("ramp") && msg.contains("line"), "{msg}");
}

#[test]
fn missing_section_is_reported() {
    let text = ELASTIC_SCA.replace("[clusters]\n0 = 2\n1 = 1\n", "");
    match parse_config_str(&text, origin()).unwrap_err() {
        CliError::MissingSection { section, .. } => assert_eq!(section, "clusters"),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn benchmark_config_round_trips() {
    let cfg = parse_config_str(BENCHMARK, origin()).unwrap();
    assert_eq!(cfg.loading.as_ref().unwrap().increments, 200);
    let again = parse_config_str(&cfg.to_toml(), origin()).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(cfg.to_toml(), again.to_toml());
    assert_eq!(cfg.hash(), again.hash());
}

#[test]
fn rve_file_parses_labels() {
    let grid = parse_rve("# two by two\n2 2 1.0 1.0\n0 0\n1 1\n", origin()).unwrap();
    assert_eq!(grid.dims(), &[2, 2]);
    assert_eq!(grid.phases(), vec![PhaseId(0), PhaseId(1)]);
    let err = parse_rve("2 2 1 1\n0 0 1\n", origin()).unwrap_err();
    assert!(err.to_string().contains("expected 4 labels"));
}

#[test]
fn two_particle_generator_places_two_discs_on_axis() {
    let spec = GeneratorSpec::TwoParticle { dims: [80, 80], lengths: [1.0, 1.0], radius: 12.0, gap: None };
    let rve = generate_rve(&spec).unwrap();
    let g = &rve.grid;
    assert_eq!(rve.n_particles, 2);
    // disc centres at (40 ± 22, 40)
    for i in [18, 62] {
        assert_eq!(g.phase(i * 80 + 40), PARTICLE_PHASE);
    }
    assert_eq!(g.phase(40 * 80 + 40), PhaseId(0));
    assert_eq!(g.phase(0), PhaseId(0));
    let area = std::f64::consts::PI * 144.0 * 2.0 / 6400.0;
    assert!((rve.volume_fraction - area).abs() < 0.01);
    // mirror symmetry about the grid centre along axis 0
    for v in 0..6400 {
        let (i, j) = (v / 80, v % 80);
        assert_eq!(g.phase(v), g.phase((79 - i) * 80 + j));
    }
}

#[test]
fn multi_particle_generator_reaches_fraction() {
    let spec = GeneratorSpec::MultiParticle {
        dims: [400, 400],
        lengths: [1.0, 1.0],
        radius: 10.0,
        volume_fraction: 0.30,
        seed: 3,
    };
    let rve = generate_rve(&spec).unwrap();
    assert!((0.28..=0.32).contains(&rve.volume_fraction), "{}", rve.volume_fraction);
    let again = generate_rve(&spec).unwrap();
    assert_eq!(rve.grid.labels(), again.grid.labels());
}

fn write_rve_file(dir: &Path, text: &str) {
    std::fs::write(dir.join("rve.txt"), text).unwrap();
}

#[test]
fn oracle_homogeneous_elastic_gives_hooke_stress() {
    let tmp = tempfile::tempdir().unwrap();
    write_rve_file(tmp.path(), "4 4 1 1\n0 0 0 0\n0 0 0 0\n0 0 0 0\n0 0 0 0\n");
    let text = ELASTIC_SCA.replace("mode = \"sca\"", "mode = \"oracle\"").replace(
        "[materials.1]\nyoung = 1.0\npoisson = 0.2\nmodel = { kind = \"elastic\" }\n",
        "",
    );
    let text = text.replace("[clusters]\n0 = 2\n1 = 1\n", "");
    let cfg = parse_config_str(&text, origin()).unwrap();
    let out = tmp.path().join("out");
    run(&cfg, tmp.path(), &out).unwrap();
    let (header, rows) = read_history(&out.join(HISTORY_FILE)).unwrap();
    assert!(header.starts_with("# crom config_hash="));
    assert_eq!(rows.len(), 1);
    let (e, nu) = (10.0, 0.3);
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    let eps = 1e-3;
    let expect = [(lambda + 2.0 * mu) * eps, lambda * eps, lambda * eps, 0.0];
    for (s, x) in rows[0].stress.iter().zip(expect) {
        assert!((s - x).abs() <= 1e-12 * expect[0], "{s} vs {x}");
    }
}

fn tiny_benchmark(mode: &str, adaptivity: &str, dir: &Path) -> (RunConfig, PathBuf) {
    let text = format!(
        r#"
mode = "{mode}"
seed = 11
checkpoints = [4, 8]

[rve.generator]
kind = "two_particle"
dims = [16, 16]
radius = 3.0

[materials.0]
young = 100.0
poisson = 0.3
model = {{ kind = "von_mises", yield_stress = 0.5, hardening_coefficient = 0.2, hardening_exponent = 0.4 }}

[materials.1]
young = 1.0
poisson = 0.19
model = {{ kind = "elastic" }}

[clusters]
0 = 4
1 = 2

[loading]
total = [5e-2, 0.0, 0.0]
increments = 8

[fracture]
phase = 0
volume_fraction_threshold = 0.02
acc_p_threshold = 0.05
{adaptivity}
"#
    );
    let cfg = parse_config_str(&text, origin()).unwrap();
    let out = dir.join(format!("{mode}-{}", adaptivity.len()));
    (cfg, out)
}

#[test]
fn sca_run_reports_fracture_and_toughness() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, out) = tiny_benchmark("sca", "", tmp.path());
    let summary = run(&cfg, tmp.path(), &out).unwrap();
    assert!(summary.fracture_increment.is_some());
    assert!(summary.toughness.unwrap() > 0.0);
    let (_, rows) = read_history(&out.join(HISTORY_FILE)).unwrap();
    assert!(rows.iter().any(|r| r.fractured));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["partial"], false);
    assert_eq!(manifest["seed"], 11);
}

#[test]
fn asca_without_trigger_matches_sca_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let (sca, out_s) = tiny_benchmark("sca", "", tmp.path());
    let (asca, out_a) =
        tiny_benchmark("asca", "\n[adaptivity]\ntrigger_ratio = 1.0\nadaptive_phases = [0]\n", tmp.path());
    run(&sca, tmp.path(), &out_s).unwrap();
    run(&asca, tmp.path(), &out_a).unwrap();
    let body = |p: PathBuf| {
        let b = std::fs::read(p).unwrap();
        let nl = b.iter().position(|&c| c == b'\n').unwrap();
        b[nl + 1..].to_vec()
    };
    let mut files = vec![PathBuf::from(HISTORY_FILE), PathBuf::from("cit.bin")];
    for e in std::fs::read_dir(out_s.join(FIELDS_DIR)).unwrap() {
        files.push(Path::new(FIELDS_DIR).join(e.unwrap().file_name()));
    }
    for e in std::fs::read_dir(out_s.join("labels")).unwrap() {
        files.push(Path::new("labels").join(e.unwrap().file_name()));
    }
    assert!(files.len() > 4);
    for f in files {
        assert_eq!(body(out_s.join(&f)), body(out_a.join(&f)), "{}", f.display());
    }
}

#[test]
fn field_dump_round_trip_is_lossless() {
    let dump = FieldDump {
        header: "# crom config_hash=00 seed=1".into(),
        name: "stress".into(),
        dims: vec![3, 2],
        increment: 12,
        components: 2,
        data: (0..12).map(|k| (k as f64).sin() * 1e-7 + f64::EPSILON * k as f64).collect(),
    };
    let back = FieldDump::from_bytes(&dump.to_bytes(), origin()).unwrap();
    assert_eq!(dump, back);
    assert!(dump.data.iter().zip(&back.data).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn compare_run_with_itself_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, out) = tiny_benchmark("sca", "", tmp.path());
    run(&cfg, tmp.path(), &out).unwrap();
    let report = compare(&[out.clone(), out.clone()]).unwrap();
    assert_eq!(report.checkpoints, vec![4, 8]);
    let r = &report.runs[0];
    assert_eq!(r.toughness_error, 0.0);
    assert!(r.stress_errors.iter().all(|(_, e)| *e == 0.0));
    assert_eq!(r.rmse.len(), 4);
    assert!(r.rmse.iter().all(|(_, _, e)| *e == 0.0));
    assert!(report.to_csv().lines().count() > 5);
    assert!(report.to_text().contains("ranking"));
}

#[test]
fn failed_run_flags_partial_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(ELASTIC_SCA, origin()).unwrap();
    let out = tmp.path().join("out");
    // rve.txt is absent
    assert!(run(&cfg, tmp.path(), &out).is_err());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["status"], "failed");
    assert_eq!(manifest["partial"], true);
}

#[test]
fn unknown_phase_in_grid_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    write_rve_file(tmp.path(), "2 2 1 1\n0 2\n1 0\n");
    let cfg = parse_config_str(ELASTIC_SCA, origin()).unwrap();
    match run(&cfg, tmp.path(), &tmp.path().join("out")).unwrap_err() {
        CliError::UnknownPhase { phase, .. } => assert_eq!(phase, 2),
        other => panic!("unexpected error {other}"),
    }
}

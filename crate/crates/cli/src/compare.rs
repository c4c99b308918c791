//! Error metrics of run directories against a reference run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crom_core::solver::compute_toughness;
use serde::Serialize;

use crate::error::{io_err, CliError, Result};
use crate::io::{read_history, FieldDump, HistoryRow};
use crate::run::{FIELDS_DIR, HISTORY_FILE};

/// Scalar fields compared by RMSE.
pub const RMSE_FIELDS: [&str; 2] = ["acc_p", "plastic_work"];
const STRESS_NAMES: [&str; 4] = ["sig_11", "sig_22", "sig_33", "sig_12"];

/// History and checkpoint fields of one output directory.
#[derive(Debug, Clone)]
pub struct RunData {
    pub dir: PathBuf,
    pub history: Vec<HistoryRow>,
    pub dims: Option<Vec<usize>>,
    /// `(field, increment) -> values`.
    pub fields: BTreeMap<(String, usize), Vec<f64>>,
}

impl RunData {
    pub fn load(dir: &Path) -> Result<Self> {
        let (_, history) = read_history(&dir.join(HISTORY_FILE))?;
        let mut fields = BTreeMap::new();
        let mut dims = None;
        let fdir = dir.join(FIELDS_DIR);
        if fdir.is_dir() {
            let mut names: Vec<PathBuf> =
                std::fs::read_dir(&fdir).map_err(io_err(&fdir))?.filter_map(|e| e.ok().map(|e| e.path())).collect();
            names.sort();
            for path in names {
                let stem = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
                if !RMSE_FIELDS.iter().any(|f| stem.starts_with(&format!("{f}_"))) {
                    continue;
                }
                let dump = FieldDump::read(&path)?;
                if dims.get_or_insert_with(|| dump.dims.clone()) != &dump.dims {
                    return Err(CliError::Format { path, message: "field dimensions differ within one run".into() });
                }
                fields.insert((dump.name, dump.increment), dump.data);
            }
        }
        Ok(Self { dir: dir.to_path_buf(), history, dims, fields })
    }

    /// Toughness from the `(eps_11, sig_11)` curve up to the first
    /// fractured increment.
    pub fn toughness(&self) -> f64 {
        let points: Vec<(f64, f64)> = self.history.iter().map(|r| (r.strain[0], r.stress[0])).collect();
        let fracture = self.history.iter().position(|r| r.fractured).map(|k| k + 1);
        compute_toughness(&points, fracture)
    }

    pub fn checkpoints(&self) -> BTreeSet<usize> {
        self.fields.keys().filter(|(f, _)| f == RMSE_FIELDS[0]).map(|(_, m)| *m).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunComparison {
    pub dir: PathBuf,
    pub toughness: f64,
    pub toughness_error: f64,
    /// Relative L2 error over the shared increments per stress component.
    pub stress_errors: Vec<(String, f64)>,
    /// `(field, increment, rmse)`.
    pub rmse: Vec<(String, usize, f64)>,
}

impl RunComparison {
    pub fn rmse_of(&self, field: &str, increment: usize) -> Option<f64> {
        self.rmse.iter().find(|(f, m, _)| f == field && *m == increment).map(|x| x.2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub reference: PathBuf,
    pub reference_toughness: f64,
    pub checkpoints: Vec<usize>,
    pub notes: Vec<String>,
    pub runs: Vec<RunComparison>,
}

/// `|a - b| / |b|`, zero when both vanish.
fn relative(diff: f64, reference: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff / reference.abs()
    }
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (sum / a.len().max(1) as f64).sqrt()
}

/// Compares every directory against the last one.
pub fn compare(dirs: &[PathBuf]) -> Result<CompareReport> {
    if dirs.len() < 2 {
        return Err(CliError::Incompatible("at least two run directories are required".into()));
    }
    let runs = dirs.iter().map(|d| RunData::load(d)).collect::<Result<Vec<_>>>()?;
    let (reference, others) = runs.split_last().expect("two or more runs");
    let mut notes = Vec::new();
    let mut shared = reference.checkpoints();
    for r in others {
        if let (Some(a), Some(b)) = (&r.dims, &reference.dims) {
            if a != b {
                return Err(CliError::Incompatible(format!(
                    "{} has grid {a:?}, reference has {b:?}",
                    r.dir.display()
                )));
            }
        }
        let own = r.checkpoints();
        if own != reference.checkpoints() {
            notes.push(format!(
                "checkpoints of {} differ from the reference; using the intersection",
                r.dir.display()
            ));
        }
        shared = shared.intersection(&own).copied().collect();
    }
    if !notes.is_empty() {
        notes.push(format!("shared checkpoints: {shared:?}"));
    }
    let t_ref = reference.toughness();
    let mut out = Vec::with_capacity(others.len());
    for r in others {
        let n = r.history.len().min(reference.history.len());
        if n < r.history.len().max(reference.history.len()) {
            notes.push(format!("{}: comparing the first {n} increments", r.dir.display()));
        }
        let stress_errors = STRESS_NAMES
            .iter()
            .enumerate()
            .map(|(c, name)| {
                let (mut d2, mut r2) = (0.0, 0.0);
                for (a, b) in r.history[..n].iter().zip(&reference.history[..n]) {
                    d2 += (a.stress[c] - b.stress[c]).powi(2);
                    r2 += b.stress[c].powi(2);
                }
                (name.to_string(), relative(d2.sqrt(), r2.sqrt()))
            })
            .collect();
        let mut errors = Vec::new();
        for &m in &shared {
            for f in RMSE_FIELDS {
                let key = (f.to_string(), m);
                if let (Some(a), Some(b)) = (r.fields.get(&key), reference.fields.get(&key)) {
                    errors.push((f.to_string(), m, rmse(a, b)));
                }
            }
        }
        let t = r.toughness();
        out.push(RunComparison {
            dir: r.dir.clone(),
            toughness: t,
            toughness_error: relative((t - t_ref).abs(), t_ref),
            stress_errors,
            rmse: errors,
        });
    }
    Ok(CompareReport {
        reference: reference.dir.clone(),
        reference_toughness: t_ref,
        checkpoints: shared.into_iter().collect(),
        notes,
        runs: out,
    })
}

impl CompareReport {
    /// Long-format CSV: `run,metric,increment,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("run,metric,increment,value\n");
        let _ = writeln!(s, "{},toughness,,{:.16e}", self.reference.display(), self.reference_toughness);
        for r in &self.runs {
            let d = r.dir.display();
            let _ = writeln!(s, "{d},toughness,,{:.16e}", r.toughness);
            let _ = writeln!(s, "{d},toughness_rel_error,,{:.16e}", r.toughness_error);
            for (name, e) in &r.stress_errors {
                let _ = writeln!(s, "{d},{name}_rel_error,,{e:.16e}");
            }
            for (f, m, e) in &r.rmse {
                let _ = writeln!(s, "{d},rmse_{f},{m},{e:.16e}");
            }
        }
        s
    }

    /// Aligned tables, with runs ranked by the final acc_p RMSE.
    pub fn to_text(&self) -> String {
        let mut s = format!("reference: {} (toughness {:.6e})\n", self.reference.display(), self.reference_toughness);
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(s, "\n{:<40} {:>12} {:>12} {:>12}", "run", "toughness", "rel.err", "sig_11 err");
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{:<40} {:>12.5e} {:>11.3}% {:>11.3}%",
                r.dir.display(),
                r.toughness,
                100.0 * r.toughness_error,
                100.0 * r.stress_errors[0].1
            );
        }
        for f in RMSE_FIELDS {
            let _ = write!(s, "\nRMSE {f}\n{:<40}", "run");
            for m in &self.checkpoints {
                let _ = write!(s, " {:>12}", format!("inc {m}"));
            }
            s.push('\n');
            for r in &self.runs {
                let _ = write!(s, "{:<40}", r.dir.display());
                for m in &self.checkpoints {
                    match r.rmse_of(f, *m) {
                        Some(e) => {
                            let _ = write!(s, " {e:>12.5e}");
                        }
                        None => {
                            let _ = write!(s, " {:>12}", "-");
                        }
                    }
                }
                s.push('\n');
            }
        }
        if let Some(last) = self.checkpoints.last() {
            let mut ranked: Vec<&RunComparison> = self.runs.iter().collect();
            ranked.sort_by(|a, b| {
                let ka = a.rmse_of(RMSE_FIELDS[0], *last).unwrap_or(f64::INFINITY);
                let kb = b.rmse_of(RMSE_FIELDS[0], *last).unwrap_or(f64::INFINITY);
                ka.total_cmp(&kb)
            });
            let _ = writeln!(s, "\nranking by RMSE acc_p at increment {last}:");
            for (k, r) in ranked.iter().enumerate() {
                let _ = writeln!(s, "{:>3}. {}", k + 1, r.dir.display());
            }
        }
        s
    }
}

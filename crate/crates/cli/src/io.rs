//! On-disk artifacts: history CSV, field and label dumps, event log and
//! manifest. Every file starts with the header line of [`header_line`].

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{io_err, CliError, Result};

pub const HISTORY_COLUMNS: [&str; 14] = [
    "increment",
    "eps_11",
    "eps_22",
    "eps_12",
    "sig_11",
    "sig_22",
    "sig_33",
    "sig_12",
    "n_clusters",
    "ref_lambda",
    "ref_mu",
    "fractured",
    "newton_iterations",
    "sc_iterations",
];

pub fn header_line(config_hash: &str, seed: u64) -> String {
    format!("# crom config_hash={config_hash} seed={seed}")
}

/// One row of the homogenized history; tensor components, not Mandel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub increment: usize,
    pub strain: [f64; 3],
    pub stress: [f64; 4],
    pub n_clusters: usize,
    pub ref_lambda: f64,
    pub ref_mu: f64,
    pub fractured: bool,
    pub newton_iterations: usize,
    pub sc_iterations: usize,
}

/// Float text with 17 significant digits; parses back to the same bits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_history(header: &str, rows: &[HistoryRow]) -> String {
    let mut s = format!("{header}\n{}\n", HISTORY_COLUMNS.join(","));
    for r in rows {
        let floats: Vec<String> = r.strain.iter().chain(&r.stress).map(|&x| num(x)).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.increment,
            floats.join(","),
            r.n_clusters,
            num(r.ref_lambda),
            num(r.ref_mu),
            u8::from(r.fractured),
            r.newton_iterations,
            r.sc_iterations,
        );
    }
    s
}

pub fn write_history(path: &Path, header: &str, rows: &[HistoryRow]) -> Result<()> {
    std::fs::write(path, format_history(header, rows)).map_err(io_err(path))
}

/// Header line and rows of a history CSV.
pub fn read_history(path: &Path) -> Result<(String, Vec<HistoryRow>)> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |message: String| CliError::Format { path: path.to_path_buf(), message };
    let mut lines = text.lines();
    let header = lines.next().filter(|h| h.starts_with('#')).ok_or_else(|| bad("missing header line".into()))?;
    if lines.next() != Some(HISTORY_COLUMNS.join(",").as_str()) {
        return Err(bad("unexpected column names".into()));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != HISTORY_COLUMNS.len() {
            return Err(bad(format!("row {} has {} fields", k + 1, f.len())));
        }
        let float = |i: usize| f[i].parse::<f64>().map_err(|_| bad(format!("row {}: bad number `{}`", k + 1, f[i])));
        let int = |i: usize| f[i].parse::<usize>().map_err(|_| bad(format!("row {}: bad integer `{}`", k + 1, f[i])));
        rows.push(HistoryRow {
            increment: int(0)?,
            strain: [float(1)?, float(2)?, float(3)?],
            stress: [float(4)?, float(5)?, float(6)?, float(7)?],
            n_clusters: int(8)?,
            ref_lambda: float(9)?,
            ref_mu: float(10)?,
            fractured: int(11)? != 0,
            newton_iterations: int(12)?,
            sc_iterations: int(13)?,
        });
    }
    Ok((header.to_string(), rows))
}

/// Per-voxel field with `components` values per voxel, voxel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub header: String,
    pub name: String,
    pub dims: Vec<usize>,
    pub increment: usize,
    pub components: usize,
    pub data: Vec<f64>,
}

impl FieldDump {
    pub fn file_name(name: &str, increment: usize) -> String {
        format!("{name}_{increment:06}.bin")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let mut out = format!(
            "{}\nfield {} dims {} increment {} components {}\n",
            self.header,
            self.name,
            dims.join(" "),
            self.increment,
            self.components
        )
        .into_bytes();
        out.reserve(8 * self.data.len());
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let bad = |message: &str| CliError::Format { path: origin.to_path_buf(), message: message.into() };
        let mut split = bytes.splitn(3, |&b| b == b'\n');
        let header = split.next().ok_or_else(|| bad("missing header"))?;
        let meta = split.next().ok_or_else(|| bad("missing field description"))?;
        let payload = split.next().unwrap_or(&[]);
        let header = std::str::from_utf8(header).map_err(|_| bad("header is not UTF-8"))?.to_string();
        let meta = std::str::from_utf8(meta).map_err(|_| bad("field description is not UTF-8"))?;
        let t: Vec<&str> = meta.split_whitespace().collect();
        let pos = |key: &str| t.iter().position(|&x| x == key).ok_or_else(|| bad("incomplete field description"));
        let (f, d, i, c) = (pos("field")?, pos("dims")?, pos("increment")?, pos("components")?);
        if !(f + 1 < t.len() && d < i && i + 1 < t.len() && c + 1 < t.len()) {
            return Err(bad("incomplete field description"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad("bad integer in field description"));
        let dims = t[d + 1..i].iter().map(|s| int(s)).collect::<Result<Vec<_>>>()?;
        let increment = int(t[i + 1])?;
        let components = int(t[c + 1])?;
        let n = dims.iter().product::<usize>() * components;
        if payload.len() != 8 * n {
            return Err(bad("payload length does not match the dimensions"));
        }
        let data = payload.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        Ok(Self { header, name: t[f + 1].to_string(), dims, increment, components, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        Self::from_bytes(&bytes, path)
    }
}

/// Cluster label dump: header, description line, one grid row per line.
pub fn format_labels(header: &str, dims: &[usize], increment: usize, labels: &[u32]) -> String {
    let d: Vec<String> = dims.iter().map(|x| x.to_string()).collect();
    let mut s = format!("{header}\nlabels dims {} increment {increment}\n", d.join(" "));
    let row = dims.last().copied().unwrap_or(1).max(1);
    for chunk in labels.chunks(row) {
        let line: Vec<String> = chunk.iter().map(|l| l.to_string()).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

/// Reads the labels of a dump written by [`format_labels`].
pub fn read_labels(path: &Path) -> Result<Vec<u32>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |message: String| CliError::Format { path: path.to_path_buf(), message };
    text.lines()
        .skip(2)
        .flat_map(str::split_whitespace)
        .map(|t| t.parse::<u32>().map_err(|_| bad(format!("bad label `{t}`"))))
        .collect()
}

/// JSON lines after the header line.
pub fn format_jsonl<T: serde::Serialize>(header: &str, items: &[T]) -> Result<String> {
    let mut s = format!("{header}\n");
    for item in items {
        s.push_str(&serde_json::to_string(item)?);
        s.push('\n');
    }
    Ok(s)
}

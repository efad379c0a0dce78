//! CSV tables and the JSON run summary.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::settings::Settings;

pub enum Cell {
    Str(String),
    Int(u64),
    Num(f64),
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Str(s)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Str(x.to_string())
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

/// 17 significant digits: enough to round-trip any double.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                match c {
                    Cell::Str(x) => s.push_str(x),
                    Cell::Int(x) => write!(s, "{x}").expect("write to String"),
                    Cell::Num(x) => s.push_str(&fmt_f64(*x)),
                }
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

/// What an experiment produced.
#[derive(Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub assertions: Vec<Assertion>,
    /// Extra experiment-specific data for the summary.
    pub extra: serde_json::Map<String, serde_json::Value>,
    /// Raw files (name, bytes) written next to the tables.
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    config: &'a Settings,
    seed: Option<u64>,
    wall_seconds: f64,
    catalog_checksum: String,
    outputs: Vec<String>,
    assertions: &'a [Assertion],
    all_passed: bool,
    #[serde(flatten)]
    extra: &'a serde_json::Map<String, serde_json::Value>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(bytes).with_context(|| format!("writing {}", path.display()))
}

/// Writes every table and file into `dir` plus `<experiment>.json`. Without
/// a directory the tables go to stdout and the summary is not written.
pub fn emit(experiment: &str, settings: &Settings, outcome: &Outcome, wall_seconds: f64, dir: Option<&Path>) -> Result<Vec<PathBuf>> {
    let Some(dir) = dir else {
        let mut stdout = std::io::stdout().lock();
        for t in &outcome.tables {
            stdout.write_all(t.to_csv().as_bytes())?;
        }
        return Ok(Vec::new());
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut paths = Vec::new();
    for t in &outcome.tables {
        let p = dir.join(format!("{}.csv", t.name));
        write_file(&p, t.to_csv().as_bytes())?;
        paths.push(p);
    }
    for (name, bytes) in &outcome.files {
        let p = dir.join(name);
        write_file(&p, bytes)?;
        paths.push(p);
    }
    let summary = Summary {
        experiment,
        config: settings,
        seed: settings.seed,
        wall_seconds,
        catalog_checksum: hfgi::catalog_checksum(),
        outputs: paths
            .iter()
            .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
            .collect(),
        assertions: &outcome.assertions,
        all_passed: outcome.all_passed(),
        extra: &outcome.extra,
    };
    let p = dir.join(format!("{experiment}.json"));
    write_file(&p, serde_json::to_string_pretty(&summary)?.as_bytes())?;
    paths.push(p);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2f64.sqrt() * 1e-300, -6.02e23] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new("x", &["scheme", "n", "v"]);
        t.push(vec!["BAB".into(), 3usize.into(), 0.5.into()]);
        assert_eq!(t.to_csv(), "scheme,n,v\nBAB,3,5.0000000000000000e-1\n");
    }
}

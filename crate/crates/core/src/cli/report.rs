//! Run summaries, CSV tables and plots on disk.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use super::svg::Plot;
use crate::error::{Error, Result};

/// A named CSV table; every cell is already formatted.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Format a float for CSV: shortest round-trip form, exponent notation for
/// very small or very large magnitudes.
pub fn num(x: f64) -> String {
    if x != 0.0 && x.is_finite() && (x.abs() < 1e-4 || x.abs() >= 1e15) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// One pass/fail check, also emitted as a row of `verdicts.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `le`: value ≤ threshold; `ge`: value ≥ threshold; `eq`: value == threshold.
    pub relation: &'static str,
    pub pass: bool,
}

impl Check {
    pub fn le(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            relation: "le",
            pass: value <= threshold,
        }
    }

    pub fn ge(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            relation: "ge",
            pass: value >= threshold,
        }
    }

    pub fn eq(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            relation: "eq",
            pass: value == threshold,
        }
    }
}

/// Everything an experiment hands to the writer.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub experiment: String,
    pub params: Value,
    pub knobs: Value,
    pub checks: Vec<Check>,
    pub metrics: Map<String, Value>,
    pub tables: Vec<Table>,
    pub plots: Vec<(String, Plot)>,
}

impl ExperimentResult {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Which artifacts to write besides the summary.
#[derive(Debug, Clone, Copy)]
pub struct Formats {
    pub csv: bool,
    pub svg: bool,
}

fn write(dir: &Path, name: &str, contents: &[u8], files: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    files.push(name.to_string());
    Ok(())
}

fn csv_bytes(t: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(vec![]);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(&t.header).map_err(io)?;
    for r in &t.rows {
        w.write_record(r).map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Write `summary.json`, the CSV tables and optional plots into `dir`.
///
/// With no results the summary records zero experiments.
pub fn emit_report(results: &[ExperimentResult], formats: Formats, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = vec![];
    let summary = match results {
        [] => json!({
            "experiment": Value::Null,
            "params": {},
            "knobs": {},
            "verdict": "PASS",
            "metrics": { "experiments": 0 },
            "files": [],
        }),
        [res] => {
            if formats.csv {
                let mut verdicts = Table::new("verdicts", &["check", "value", "threshold", "relation", "pass"]);
                for c in &res.checks {
                    verdicts.push(vec![
                        c.name.clone(),
                        num(c.value),
                        num(c.threshold),
                        c.relation.into(),
                        c.pass.to_string(),
                    ]);
                }
                write(dir, "verdicts.csv", &csv_bytes(&verdicts)?, &mut files)?;
                for t in &res.tables {
                    write(dir, &format!("{}.csv", t.name), &csv_bytes(t)?, &mut files)?;
                }
            }
            if formats.svg {
                for (name, p) in &res.plots {
                    write(dir, &format!("{name}.svg"), p.render().as_bytes(), &mut files)?;
                }
            }
            let mut metrics = res.metrics.clone();
            metrics.insert("checks".into(), serde_json::to_value(&res.checks).map_err(json_err)?);
            json!({
                "experiment": res.experiment,
                "params": res.params,
                "knobs": res.knobs,
                "verdict": if res.pass() { "PASS" } else { "FAIL" },
                "metrics": metrics,
                "files": files,
            })
        }
        _ => {
            return Err(Error::Config(
                "one experiment per invocation; got several results".into(),
            ))
        }
    };
    let text = serde_json::to_string_pretty(&summary).map_err(json_err)?;
    let mut all = vec![];
    write(dir, "summary.json", text.as_bytes(), &mut all)?;
    all.extend(files);
    Ok(all.into_iter().map(|f| dir.join(f)).collect())
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_results_give_empty_summary() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&[], Formats { csv: true, svg: true }, dir.path()).unwrap();
        assert_eq!(files.len(), 1);
        let v: Value = serde_json::from_str(&fs::read_to_string(&files[0]).unwrap()).unwrap();
        assert_eq!(v["metrics"]["experiments"], 0);
        for key in ["experiment", "params", "knobs", "verdict", "metrics", "files"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.0, -0.4, 1e-17, 3.25e20, std::f64::consts::PI] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(2.5e-8), "2.5e-8");
    }

    #[test]
    fn unwritable_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, "x").unwrap();
        assert!(emit_report(&[], Formats { csv: true, svg: false }, &file.join("sub")).is_err());
    }
}

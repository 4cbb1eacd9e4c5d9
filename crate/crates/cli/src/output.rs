//! CSV, summary and plot writers.

use std::fs;
use std::path::Path;

use riccati_geo::linalg::Mat;

use crate::error::{CliError, CliResult};

/// Shortest round-trip representation; empty for missing or non-finite values.
pub fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:e}"),
        _ => String::new(),
    }
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn write_matrix(path: &Path, m: &Mat) -> CliResult<()> {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("c{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> =
        m.row_iter().map(|row| row.iter().map(|v| fmt_value(Some(*v))).collect()).collect();
    write_csv(path, &header, &rows)
}

/// Header of filter-run files.
pub const FILTER_HEADER: [&str; 5] = ["t", "rmse", "rmse_projected", "trace_cov", "subspace_angle"];

/// Header of contraction series files.
pub const SERIES_HEADER: [&str; 5] = ["t", "distance", "grassmann_component", "cone_component", "bound"];

/// Ordered `key=value` lines; check results also echo `name: PASS|FAIL` to stdout.
#[derive(Debug, Default)]
pub struct Summary {
    lines: Vec<(String, String)>,
    failed: bool,
}

impl Summary {
    pub fn value(&mut self, key: impl Into<String>, value: impl ToString) {
        self.lines.push((key.into(), value.to_string()));
    }

    pub fn number(&mut self, key: impl Into<String>, value: f64) {
        self.lines.push((key.into(), fmt_value(Some(value))));
    }

    pub fn check(&mut self, name: &str, passed: bool) {
        let verdict = if passed { "PASS" } else { "FAIL" };
        println!("{name}: {verdict}");
        self.failed |= !passed;
        self.lines.push((name.to_string(), verdict.to_string()));
    }

    pub fn all_passed(&self) -> bool {
        !self.failed
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text: String = self.lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::table::read_csv;
use super::Output;
use crate::error::{Error, Result};

/// Relative tolerance per output kind; files of unknown kind use `default`.
#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub per_output: BTreeMap<Output, f64>,
    pub default: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let per_output = BTreeMap::from([
            (Output::Eigenvalues, 1e-9),
            (Output::Parity, 1e-9),
            (Output::P2Table, 1e-8),
            (Output::SpectrumQrt, 1e-6),
            (Output::SpectrumSaa, 1e-6),
        ]);
        Tolerances {
            per_output,
            default: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn for_file(&self, name: &str) -> f64 {
        Output::from_file_name(name)
            .and_then(|o| self.per_output.get(&o).copied())
            .unwrap_or(self.default)
    }

    /// Parses `output=value`.
    pub fn set_from_str(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::config("tolerance", format!("expected `output=value`, got `{spec}`")))?;
        let tol: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("tolerance.{key}"), format!("`{value}` is not a number")))?;
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(Error::config(format!("tolerance.{key}"), "must be finite and >= 0"));
        }
        let key = key.trim();
        if key == "default" {
            self.default = tol;
            return Ok(());
        }
        let out = Output::ALL
            .into_iter()
            .find(|o| o.name() == key)
            .ok_or_else(|| Error::config(format!("tolerance.{key}"), "unknown output kind"))?;
        self.per_output.insert(out, tol);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum FileStatus {
    Pass { max_relative_error: f64 },
    Fail { reason: String },
    Missing,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileReport {
    /// Relative to both directories.
    pub path: PathBuf,
    pub tolerance: f64,
    pub status: FileStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub files: Vec<FileReport>,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        !self.files.is_empty() && self.files.iter().all(|f| matches!(f.status, FileStatus::Pass { .. }))
    }

    pub fn missing(&self) -> Vec<&Path> {
        self.files
            .iter()
            .filter(|f| f.status == FileStatus::Missing)
            .map(|f| f.path.as_path())
            .collect()
    }
}

/// Compares every CSV under `golden` with its counterpart under `run`.
///
/// Numeric columns pass when `max |a − b| / max |a|` over the column is
/// within the tolerance of the file's output kind; other cells must match
/// exactly.
pub fn compare_goldens(run: &Path, golden: &Path, tol: &Tolerances) -> Result<CompareReport> {
    for dir in [run, golden] {
        if !dir.is_dir() {
            return Err(Error::config("compare", format!("{} is not a directory", dir.display())));
        }
    }
    let mut files = Vec::new();
    collect_csv(golden, golden, &mut files)?;
    files.sort();
    let reports = files
        .into_iter()
        .map(|rel| {
            let name = rel.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let tolerance = tol.for_file(name);
            let candidate = run.join(&rel);
            let status = if !candidate.is_file() {
                FileStatus::Missing
            } else {
                match compare_file(&candidate, &golden.join(&rel), tolerance) {
                    Ok(s) => s,
                    Err(e) => FileStatus::Fail { reason: e.to_string() },
                }
            };
            FileReport {
                path: rel,
                tolerance,
                status,
            }
        })
        .collect();
    Ok(CompareReport { files: reports })
}

fn collect_csv(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_csv(root, &path, out)?;
        } else if path.extension().is_some_and(|e| e == "csv") {
            out.push(path.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}

fn numeric(s: &str) -> Option<f64> {
    if s.contains(['.', 'e', 'E']) || s.eq_ignore_ascii_case("nan") || s.contains("inf") {
        s.parse().ok()
    } else {
        None
    }
}

fn compare_file(candidate: &Path, golden: &Path, tolerance: f64) -> Result<FileStatus> {
    let (gh, grows) = read_csv(golden)?;
    let (ch, crows) = read_csv(candidate)?;
    if gh != ch {
        return Ok(FileStatus::Fail {
            reason: format!("columns differ: {gh:?} vs {ch:?}"),
        });
    }
    if grows.len() != crows.len() {
        return Ok(FileStatus::Fail {
            reason: format!("{} rows vs {} golden", crows.len(), grows.len()),
        });
    }
    let ncol = gh.len();
    let mut scale = vec![0.0_f64; ncol];
    let mut diff = vec![0.0_f64; ncol];
    for (r, (g, c)) in grows.iter().zip(&crows).enumerate() {
        for k in 0..ncol {
            match (numeric(&g[k]), numeric(&c[k])) {
                (Some(a), Some(b)) => {
                    scale[k] = scale[k].max(a.abs());
                    let d = (a - b).abs();
                    diff[k] = diff[k].max(if d.is_nan() { f64::INFINITY } else { d });
                }
                _ if g[k] == c[k] => {}
                _ => {
                    return Ok(FileStatus::Fail {
                        reason: format!("row {r}, column `{}`: `{}` vs golden `{}`", gh[k], c[k], g[k]),
                    })
                }
            }
        }
    }
    let mut worst = 0.0_f64;
    let mut worst_col = 0;
    for k in 0..ncol {
        let rel = if scale[k] > 0.0 { diff[k] / scale[k] } else { diff[k] };
        if rel > worst {
            worst = rel;
            worst_col = k;
        }
    }
    if worst <= tolerance {
        Ok(FileStatus::Pass {
            max_relative_error: worst,
        })
    } else {
        Ok(FileStatus::Fail {
            reason: format!("column `{}`: relative error {worst:.3e} > {tolerance:.1e}", gh[worst_col]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::{Cell, Table};

    fn write(dir: &Path, name: &str, xs: &[f64]) {
        let mut t = Table::new(&["k", "x"]);
        for (i, x) in xs.iter().enumerate() {
            t.push(vec![Cell::Int(i as i64), Cell::Float(*x)]);
        }
        t.write_csv(&dir.join(name)).unwrap();
    }

    #[test]
    fn identical_directories_pass() {
        let a = tempfile::tempdir().unwrap();
        write(a.path(), "v__eigenvalues.csv", &[0.0, 1.0]);
        let r = compare_goldens(a.path(), a.path(), &Tolerances::default()).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn tolerance_and_missing_files() {
        let run = tempfile::tempdir().unwrap();
        let golden = tempfile::tempdir().unwrap();
        write(golden.path(), "v__spectrum_qrt.csv", &[1.0, 2.0]);
        write(run.path(), "v__spectrum_qrt.csv", &[1.0, 2.0 + 1e-7]);
        write(golden.path(), "v__eigenvalues.csv", &[1.0, 2.0]);
        write(run.path(), "v__eigenvalues.csv", &[1.0, 2.0 + 1e-7]);
        write(golden.path(), "sub/v__parity.csv", &[1.0]);
        let r = compare_goldens(run.path(), golden.path(), &Tolerances::default()).unwrap();
        assert!(!r.passed());
        let by = |n: &str| r.files.iter().find(|f| f.path == Path::new(n)).unwrap().status.clone();
        assert!(matches!(by("v__spectrum_qrt.csv"), FileStatus::Pass { .. }));
        assert!(matches!(by("v__eigenvalues.csv"), FileStatus::Fail { .. }));
        assert_eq!(r.missing(), vec![Path::new("sub/v__parity.csv")]);

        let mut loose = Tolerances::default();
        loose.set_from_str("eigenvalues=1e-6").unwrap();
        let r = compare_goldens(run.path(), golden.path(), &loose).unwrap();
        assert!(matches!(r.files[1].status, FileStatus::Pass { .. }));
        assert!(loose.set_from_str("bogus=1").is_err());
        assert!(loose.set_from_str("eigenvalues").is_err());
    }

    #[test]
    fn integer_columns_must_match() {
        let run = tempfile::tempdir().unwrap();
        let golden = tempfile::tempdir().unwrap();
        let mut t = Table::new(&["k"]);
        t.push(vec![Cell::Int(1)]);
        t.write_csv(&golden.path().join("a.csv")).unwrap();
        let mut u = Table::new(&["k"]);
        u.push(vec![Cell::Int(2)]);
        u.write_csv(&run.path().join("a.csv")).unwrap();
        let r = compare_goldens(run.path(), golden.path(), &Tolerances::default()).unwrap();
        assert!(matches!(r.files[0].status, FileStatus::Fail { .. }));
    }
}

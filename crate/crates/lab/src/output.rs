//! Tables, artifact files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::LabResult;

/// Locale-independent decimal rendering of a float.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v == 0.0 {
        "0".into()
    } else {
        format!("{v:e}")
    }
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), num)
}

/// A CSV table held in memory until the run succeeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Self { name: name.into(), headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self) -> LabResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }
}

/// One pass/fail flag of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, bound: f64, pass: bool) -> Self {
        Self { name: name.into(), value, bound, pass }
    }

    /// `value <= bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, bound, value <= bound)
    }

    /// `value >= bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, bound, value >= bound)
    }
}

/// Everything a command produces.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    /// Extra artifacts `(file name, contents)`, such as charts.
    pub files: Vec<(String, String)>,
    pub lines: Vec<String>,
}

impl Outcome {
    /// Appends `other`; tables with the same name are concatenated.
    pub fn merge(&mut self, other: Outcome) {
        for t in other.tables {
            match self.tables.iter_mut().find(|x| x.name == t.name) {
                Some(existing) => {
                    debug_assert_eq!(existing.headers, t.headers);
                    existing.rows.extend(t.rows);
                }
                None => self.tables.push(t),
            }
        }
        self.checks.extend(other.checks);
        self.files.extend(other.files);
        self.lines.extend(other.lines);
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn checks_table(&self) -> Table {
        let mut t = Table::new("checks", &["check", "value", "bound", "pass"]);
        for c in &self.checks {
            t.push(vec![c.name.clone(), num(c.value), num(c.bound), c.pass.to_string()]);
        }
        t
    }
}

/// Output directory that forgets nothing it wrote, so a failed run can be undone.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    created_root: bool,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> LabResult<Self> {
        let created_root = !root.exists();
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), created_root, written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> LabResult<PathBuf> {
        let path = self.root.join(name);
        self.written.push(path.clone());
        fs::write(&path, bytes)?;
        Ok(path)
    }

    /// Removes every file written so far, and the directory if this run created it.
    pub fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_root {
            let _ = fs::remove_dir(&self.root);
        }
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

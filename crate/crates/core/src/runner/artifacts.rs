use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::mean_fields::ResidualReport;
use crate::torus::io::write_field;
use crate::torus::Field;

/// One acceptance verdict.
#[derive(Clone, Debug, Serialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Criterion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    /// `PASS name: detail` / `FAIL name: detail`.
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Collects a scenario's outputs, writing each one to disk immediately when
/// an output directory is set so a failed run still leaves what it produced.
#[derive(Debug)]
pub struct Sink {
    dir: Option<PathBuf>,
    hash: String,
    files: Vec<String>,
    reports: Vec<(String, ResidualReport)>,
    records: Map<String, Value>,
    criteria: Vec<Criterion>,
    notes: Vec<String>,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

impl Sink {
    pub fn in_memory(hash: &str) -> Self {
        Self {
            dir: None,
            hash: hash.to_string(),
            files: Vec::new(),
            reports: Vec::new(),
            records: Map::new(),
            criteria: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn on_disk(dir: &Path, hash: &str) -> Result<Self> {
        for sub in ["", "reports", "fields"] {
            let d = dir.join(sub);
            fs::create_dir_all(&d).map_err(|e| io_err(&d, e))?;
        }
        let mut s = Self::in_memory(hash);
        s.dir = Some(dir.to_path_buf());
        Ok(s)
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn create(&mut self, rel: &str) -> Result<Option<BufWriter<File>>> {
        let Some(dir) = &self.dir else {
            return Ok(None);
        };
        let path = dir.join(rel);
        let f = File::create(&path).map_err(|e| io_err(&path, e))?;
        self.files.push(rel.to_string());
        Ok(Some(BufWriter::new(f)))
    }

    pub fn report(&mut self, name: &str, mut report: ResidualReport) -> Result<()> {
        report.config = Some(self.hash.clone());
        if let Some(mut w) = self.create(&format!("reports/{name}.txt"))? {
            report.write_text(&mut w)?;
            w.flush()?;
        }
        self.reports.push((name.to_string(), report));
        Ok(())
    }

    /// A snapshot series as concatenated dump blocks.
    pub fn fields<F: Field>(&mut self, name: &str, kind: &str, series: &[(f64, &F)]) -> Result<()> {
        let hash = self.hash.clone();
        if let Some(mut w) = self.create(&format!("fields/{name}.txt"))? {
            for (t, f) in series {
                write_field(&mut w, *f, *t, Some(kind), Some(&hash))?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn record(&mut self, key: &str, value: impl Serialize) {
        self.records
            .insert(key.to_string(), serde_json::to_value(value).expect("record serializes"));
    }

    pub fn criterion(&mut self, c: Criterion) {
        self.criteria.push(c);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn criteria(&self) -> &[Criterion] {
        &self.criteria
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn reports(&self) -> &[(String, ResidualReport)] {
        &self.reports
    }

    pub fn records(&self) -> &Map<String, Value> {
        &self.records
    }

    pub fn report_named(&self, name: &str) -> Option<&ResidualReport> {
        self.reports.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Writes `records.json`, `summary.txt` and `manifest.json`.
    pub fn finish(&mut self, manifest: &Value, failure: Option<&Error>) -> Result<()> {
        let Some(dir) = self.dir.clone() else {
            return Ok(());
        };
        let mut records = self.records.clone();
        records.insert("config_hash".into(), Value::String(self.hash.clone()));
        if let Some(e) = failure {
            records.insert("failure".into(), Value::String(e.to_string()));
        }
        let path = dir.join("records.json");
        fs::write(&path, serde_json::to_string_pretty(&records)? + "\n").map_err(|e| io_err(&path, e))?;
        self.files.push("records.json".into());

        let path = dir.join("summary.txt");
        fs::write(&path, self.summary_text(manifest, failure)).map_err(|e| io_err(&path, e))?;
        self.files.push("summary.txt".into());

        let mut m = manifest.clone();
        if let Value::Object(obj) = &mut m {
            obj.insert("config_hash".into(), Value::String(self.hash.clone()));
            obj.insert("files".into(), serde_json::to_value(&self.files)?);
            obj.insert("criteria".into(), serde_json::to_value(&self.criteria)?);
            obj.insert(
                "status".into(),
                Value::String(match failure {
                    Some(_) => "failed".into(),
                    None if self.criteria.iter().all(|c| c.passed) => "passed".into(),
                    None => "acceptance-failure".into(),
                }),
            );
            if let Some(e) = failure {
                obj.insert("failure".into(), Value::String(e.to_string()));
            }
        }
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&m)? + "\n").map_err(|e| io_err(&path, e))?;
        Ok(())
    }

    pub fn summary_text(&self, manifest: &Value, failure: Option<&Error>) -> String {
        let mut s = String::new();
        let scenario = manifest.get("scenario").and_then(Value::as_str).unwrap_or("?");
        s.push_str(&format!("meanflow summary; scenario={scenario}; config={}\n", self.hash));
        if let Some(Value::Object(cfg)) = manifest.get("config") {
            for key in ["grid", "horizon", "dt", "sigma", "nu", "paths", "seed"] {
                if let Some(v) = cfg.get(key) {
                    s.push_str(&format!("  {key} = {v}\n"));
                }
            }
        }
        s.push('\n');
        for c in &self.criteria {
            s.push_str(&c.line());
            s.push('\n');
        }
        if !self.notes.is_empty() {
            s.push('\n');
            for n in &self.notes {
                s.push_str(&format!("note: {n}\n"));
            }
        }
        if let Some(e) = failure {
            s.push_str(&format!("\nFAILED: {e}\n"));
        }
        s
    }
}

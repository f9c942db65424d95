//! Artifact bundles: a staging directory that is renamed into place on
//! success and removed on failure. Every file starts with a header block.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const UNITS: &str = "hbar=1, energies in hbar*omega0, times in 1/omega0";
pub const MANIFEST_VERSION: u32 = 1;

/// Output directory under construction.
pub struct RunDir {
    staging: PathBuf,
    target: PathBuf,
    hash: String,
    seed: u64,
    files: Vec<String>,
    finished: bool,
}

impl RunDir {
    /// Stage `target`; an existing target is replaced only on success.
    pub fn create(target: &Path, config: &ExperimentConfig) -> Result<Self, CliError> {
        let name = target.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        let staging = target.with_file_name(format!("{name}.partial"));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        Ok(Self {
            staging,
            target: target.to_path_buf(),
            hash: config.hash(),
            seed: config.seed,
            files: Vec::new(),
            finished: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.staging
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn register(&mut self, name: &str) -> Result<PathBuf, CliError> {
        let path = self.staging.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.files.push(name.to_string());
        Ok(path)
    }

    fn header_lines(&self) -> [String; 3] {
        [
            format!("# config_hash={}", self.hash),
            format!("# seed={}", self.seed),
            format!("# units: {UNITS}"),
        ]
    }

    /// CSV with a `#`-prefixed header block.
    pub fn csv(&mut self, name: &str, columns: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
        let path = self.register(name)?;
        let mut out = BufWriter::new(File::create(path)?);
        for line in self.header_lines() {
            writeln!(out, "{line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(columns)?;
        for row in rows {
            w.write_record(row.iter().map(|v| format_float(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON object with a `header` entry prepended.
    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let body = serde_json::to_value(value)?;
        let mut obj = serde_json::Map::new();
        obj.insert("header".into(), json!({ "config_hash": self.hash, "seed": self.seed, "units": UNITS }));
        match body {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("data".into(), other);
            }
        }
        self.write_text(name, &(serde_json::to_string_pretty(&Value::Object(obj))? + "\n"))
    }

    /// SVG with the header block as an XML comment.
    pub fn svg(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let header = self.header_lines().map(|l| l.trim_start_matches("# ").to_string()).join("; ");
        let text = match body.find('\n') {
            Some(i) => format!("{}\n<!-- {header} -->{}", &body[..i], &body[i..]),
            None => body.to_string(),
        };
        self.write_text(name, &text)
    }

    /// Raw file whose header the caller writes (operator dumps).
    pub fn raw(&mut self, name: &str, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.register(name)?;
        let mut out = BufWriter::new(File::create(path)?);
        for line in self.header_lines() {
            writeln!(out, "{line}")?;
        }
        write(&mut out)?;
        out.flush()?;
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.register(name)?;
        fs::write(path, text)?;
        Ok(())
    }

    /// Write the manifest and move the bundle into place.
    pub fn finish(mut self, config: &ExperimentConfig, summary: Value) -> Result<PathBuf, CliError> {
        self.json("config.json", config)?;
        let mut files = self.files.clone();
        files.push("manifest.json".into());
        let manifest = json!({
            "manifest_version": MANIFEST_VERSION,
            "experiment": config.experiment.name(),
            "code_version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.hash,
            "config": config,
            "files": files,
            "summary": summary,
        });
        self.json("manifest.json", &manifest)?;
        if self.target.exists() {
            fs::remove_dir_all(&self.target)?;
        }
        fs::rename(&self.staging, &self.target)?;
        self.finished = true;
        Ok(self.target.clone())
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        if !self.finished {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

/// Shortest round-tripping representation, so outputs are byte-stable.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        "nan".into()
    }
}

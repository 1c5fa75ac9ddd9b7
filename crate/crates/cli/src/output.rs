//! Output directory bookkeeping. Every file goes through [`OutputDir`] so the
//! manifest, written last, lists all of them.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use invasion_core::io::Table;
use serde::Serialize;

use crate::config::ExperimentConfig;

pub const MANIFEST: &str = "manifest.toml";
pub const ERROR_RECORD: &str = "error.toml";

#[derive(Debug, Serialize)]
pub struct RunStatus {
    pub name: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    wall_clock_seconds: f64,
    files: &'a [String],
    runs: &'a [RunStatus],
    config: &'a ExperimentConfig,
}

#[derive(Debug, Serialize)]
struct ErrorRecord<'a> {
    command: &'a str,
    error: String,
    chain: Vec<String>,
    partial_files: &'a [String],
}

pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
    pub runs: Vec<RunStatus>,
    started: Instant,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        // a stale manifest would claim completion of this run
        for stale in [MANIFEST, ERROR_RECORD] {
            let p = root.join(stale);
            if p.exists() {
                std::fs::remove_file(&p)?;
            }
        }
        Ok(Self { root: root.to_path_buf(), files: Vec::new(), runs: Vec::new(), started: Instant::now() })
    }

    fn register(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.root.join(name)
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        let path = self.register(name);
        table.write(&path).with_context(|| format!("writing {}", path.display()))
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.register(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
    }

    pub fn record(&mut self, name: impl Into<String>, outcome: std::result::Result<(), String>) {
        let name = name.into();
        self.runs.push(match outcome {
            Ok(()) => RunStatus { name, ok: true, error: None },
            Err(e) => RunStatus { name, ok: false, error: Some(e) },
        });
    }

    pub fn finish(self, command: &str, config: &ExperimentConfig) -> Result<()> {
        let m = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            files: &self.files,
            runs: &self.runs,
            config,
        };
        let body = toml::to_string_pretty(&m).context("serialising manifest")?;
        std::fs::write(self.root.join(MANIFEST), body).context("writing manifest")
    }

    pub fn fail(self, command: &str, err: &anyhow::Error) -> Result<()> {
        let rec = ErrorRecord {
            command,
            error: err.to_string(),
            chain: err.chain().skip(1).map(|e| e.to_string()).collect(),
            partial_files: &self.files,
        };
        std::fs::write(self.root.join(ERROR_RECORD), toml::to_string_pretty(&rec)?).context("writing error record")
    }
}

/// A layout descriptor so any plotting tool can redraw a figure.
#[derive(Debug, Default, Serialize)]
pub struct Layout {
    pub figure: String,
    pub title: String,
    pub panels: Vec<Panel>,
}

#[derive(Debug, Default, Serialize)]
pub struct Panel {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub log_x: bool,
    pub series: Vec<Series>,
}

#[derive(Debug, Serialize)]
pub struct Series {
    pub label: String,
    pub file: String,
    pub x: String,
    pub y: String,
    pub style: &'static str,
}

impl Series {
    pub fn new(label: impl Into<String>, file: &str, x: &str, y: &str, style: &'static str) -> Self {
        Self { label: label.into(), file: file.into(), x: x.into(), y: y.into(), style }
    }
}

impl Layout {
    pub fn write(&self, out: &mut OutputDir) -> Result<()> {
        out.text("layout.toml", &toml::to_string_pretty(self)?)
    }
}

//! Output directory with hashed CSV tables, SVG plots and a `run.json` record.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::svg::{render, Plot};
use crate::CliError;

pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    files: Vec<String>,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    config_sha256: &'a str,
    config: &'a ExperimentConfig,
    files: &'a [String],
    notes: &'a [String],
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// Shortest round-trip form, so reruns are byte-identical.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

impl Artifacts {
    pub fn create(dir: &Path, config: &ExperimentConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(io(dir))?;
        Ok(Artifacts { dir: dir.to_path_buf(), hash: config.sha256(), files: Vec::new() })
    }

    /// Writes `name` with a `# config_sha256=...` first line.
    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.dir.join(name);
        let mut buf = format!("# config_sha256={}\n", self.hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let fail = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
            w.write_record(header).map_err(fail)?;
            for row in rows {
                w.write_record(&row).map_err(fail)?;
            }
            w.flush().map_err(io(&path))?;
        }
        fs::write(&path, buf).map_err(io(&path))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn svg(&mut self, name: &str, plot: &Plot) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let body = render(plot).replacen("<svg ", &format!("<!-- config_sha256={} -->\n<svg ", self.hash), 1);
        fs::write(&path, body).map_err(io(&path))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn finish(self, command: &str, config: &ExperimentConfig, notes: &[String]) -> Result<PathBuf, CliError> {
        let mut clean = config.clone();
        clean.out_dir = None;
        let record = RunRecord { command, config_sha256: &self.hash, config: &clean, files: &self.files, notes };
        let path = self.dir.join("run.json");
        let text = serde_json::to_string_pretty(&record).expect("record serialises") + "\n";
        fs::write(&path, text).map_err(io(&path))?;
        Ok(self.dir)
    }
}

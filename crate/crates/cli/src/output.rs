//! CSV files with a provenance comment line.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "JUMPDUAL_OUTPUT_DIR";

/// SHA-256 of the canonical TOML form, after command-line overrides.
pub fn config_hash(cfg: &RunConfig) -> String {
    Sha256::digest(cfg.to_toml().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Config field, then the environment, then the working directory.
pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Fixed 17-significant-digit rendering; empty for `None`.
pub fn num(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn header(&self) -> String {
        format!(
            "# jumpdual {} config_sha256={} seed={}",
            self.command, self.config_sha256, self.seed
        )
    }
}

/// A CSV file whose first line is the provenance comment. Footnotes are
/// appended as comment lines after the data.
pub struct CsvFile {
    writer: csv::Writer<File>,
    footnotes: Vec<String>,
    path: PathBuf,
}

impl CsvFile {
    pub fn create(path: &Path, provenance: &Provenance, columns: &[&str]) -> io::Result<Self> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut file = File::create(path)?;
        writeln!(file, "{}", provenance.header())?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(columns)?;
        Ok(CsvFile {
            writer,
            footnotes: Vec::new(),
            path: path.to_path_buf(),
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> io::Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(io::Error::from)
    }

    pub fn footnote(&mut self, text: impl Into<String>) {
        self.footnotes.push(text.into());
    }

    pub fn finish(self) -> io::Result<PathBuf> {
        let mut file = self.writer.into_inner().map_err(|e| e.into_error())?;
        for note in &self.footnotes {
            writeln!(file, "# {note}")?;
        }
        file.flush()?;
        Ok(self.path)
    }
}

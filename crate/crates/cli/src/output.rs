use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ksfluid::config::OutputFormat;
use ksfluid::quadrature::{write_binary, write_csv, GridFunction};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

/// Output directory that remembers what was written, in order.
pub struct RunDir {
    root: PathBuf,
    formats: Vec<OutputFormat>,
    files: Vec<FileEntry>,
}

impl RunDir {
    pub fn create(root: &Path, formats: &[OutputFormat]) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Output(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            formats: formats.to_vec(),
            files: Vec::new(),
        })
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
        text.push(b'\n');
        self.write_bytes(name, &text)
    }

    /// Writes `stem.csv` and/or `stem.bin` according to the configured formats.
    pub fn write_grid(&mut self, stem: &str, f: &GridFunction) -> Result<(), CliError> {
        for fmt in self.formats.clone() {
            let mut buf = BufWriter::new(Vec::new());
            let ext = match fmt {
                OutputFormat::Csv => {
                    write_csv(f, &mut buf)?;
                    "csv"
                }
                OutputFormat::Binary => {
                    write_binary(f, &mut buf)?;
                    "bin"
                }
            };
            buf.flush().map_err(|e| CliError::Output(e.to_string()))?;
            let bytes = buf.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
            self.write_bytes(&format!("{stem}.{ext}"), &bytes)?;
        }
        Ok(())
    }

    pub fn write_csv_rows(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        let mut text = header.join(",");
        text.push('\n');
        for r in rows {
            let line: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }
}

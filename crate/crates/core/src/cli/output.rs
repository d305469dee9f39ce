//! Result files. Every CSV starts with a `# config_sha256=<hex>` line and
//! every JSON document carries a `config_checksum` field.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub struct OutputDir {
    dir: PathBuf,
    checksum: String,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: PathBuf, checksum: &str) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            checksum: checksum.to_string(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut out = BufWriter::new(File::create(self.dir.join(name))?);
        writeln!(out, "# config_sha256={}", self.checksum)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut doc = serde_json::to_value(value)?;
        match &mut doc {
            Value::Object(map) => {
                map.insert("config_checksum".into(), Value::from(self.checksum.clone()));
            }
            _ => {
                return Err(Error::Config(format!(
                    "{name}: only JSON objects can carry a checksum"
                )))
            }
        }
        let mut out = BufWriter::new(File::create(self.dir.join(name))?);
        serde_json::to_writer_pretty(&mut out, &doc)?;
        writeln!(out)?;
        out.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_roundtrip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 6.02e23, -0.0, 2.5] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}

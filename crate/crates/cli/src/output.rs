//! Atomic, byte-deterministic result files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct OutputDir {
    dir: PathBuf,
    config_sha256: String,
    seed: Option<u64>,
    command: String,
}

impl OutputDir {
    pub fn create(dir: PathBuf, config_bytes: &[u8], seed: Option<u64>, command: &str) -> anyhow::Result<Self> {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir,
            config_sha256: hex::encode(Sha256::digest(config_bytes)),
            seed,
            command: command.to_string(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn provenance(&self) -> Value {
        json!({
            "command": self.command,
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "version": VERSION,
        })
    }

    /// Writes `<name>.csv` through `fill` and its `<name>.csv.json` sidecar.
    pub fn csv(
        &self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> renewal_core::Result<()>,
    ) -> anyhow::Result<PathBuf> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        let file = format!("{name}.csv");
        let path = self.write(&file, &buf)?;
        self.write(&format!("{file}.json"), &pretty(&self.provenance())?)?;
        Ok(path)
    }

    /// Writes `summary.json`: provenance plus `results`.
    pub fn summary(&self, results: Value) -> anyhow::Result<Value> {
        let mut doc = self.provenance();
        doc["results"] = results;
        self.write("summary.json", &pretty(&doc)?)?;
        Ok(doc)
    }

    fn write(&self, file: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let target = self.dir.join(file);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .with_context(|| format!("creating temporary file in {}", self.dir.display()))?;
        tmp.write_all(bytes)?;
        tmp.persist(&target)
            .with_context(|| format!("writing {}", target.display()))?;
        Ok(target)
    }
}

fn pretty(v: &Value) -> anyhow::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

/// Plain CSV writer for tables the core crate has no writer for.
pub fn write_rows(buf: &mut Vec<u8>, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) {
    let mut line = |cells: &[String]| {
        buf.extend_from_slice(cells.join(",").as_bytes());
        buf.push(b'\n');
    };
    line(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    for r in rows {
        line(&r);
    }
}

/// JSON number, or `null` for non-finite values.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

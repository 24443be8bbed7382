use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// Writes result files into the output directory, each CSV led by a
/// `# config_hash=...` comment line.
pub struct Output {
    dir: PathBuf,
    hash: String,
    gnuplot: bool,
}

/// SHA-256 of the effective configuration serialized as JSON.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let json = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&json)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

impl Output {
    pub fn new(config: &ExperimentConfig, gnuplot: bool) -> Result<Self> {
        let dir = config.out_dir.clone();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            hash: config_hash(config)?,
            dir,
            gnuplot,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn csv<I>(&self, name: &str, header: &str, rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = String>,
    {
        let mut body = format!("# config_hash={}\n{header}\n", self.hash);
        for row in rows {
            body.push_str(&row);
            body.push('\n');
        }
        self.write(name, &body)
    }

    /// A CSV whose body (header included) is already rendered.
    pub fn csv_body(&self, name: &str, rendered: &str) -> Result<PathBuf> {
        self.write(name, &format!("# config_hash={}\n{rendered}", self.hash))
    }

    pub fn json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes `<stem>.gp` when gnuplot output is on.
    pub fn gnuplot(&self, stem: &str, script: &str) -> Result<Option<PathBuf>> {
        if !self.gnuplot {
            return Ok(None);
        }
        let body = format!(
            "# config_hash={}\nset datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\nset output '{stem}.png'\n{script}\n",
            self.hash
        );
        self.write(&format!("{stem}.gp"), &body).map(Some)
    }
}

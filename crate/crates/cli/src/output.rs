use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const TOOL: &str = "twolocal";

/// Wrapper written around every JSON output.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<D> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    pub seed: u64,
    pub stream: Option<u64>,
    pub data: D,
}

pub struct OutDir {
    root: PathBuf,
    command: String,
    config: Value,
    seed: u64,
}

impl OutDir {
    pub fn create(root: &Path, command: &str, config: Value, seed: u64) -> Result<Self> {
        fs::create_dir_all(root.join("results")).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), command: command.to_string(), config, seed })
    }

    pub fn result_path(&self, name: &str) -> PathBuf {
        self.root.join("results").join(name)
    }

    pub fn write_json<D: Serialize>(&self, name: &str, stream: Option<u64>, data: D) -> Result<PathBuf> {
        let env = Envelope {
            tool: TOOL.to_string(),
            version: twolocal::VERSION.to_string(),
            command: self.command.clone(),
            config: self.config.clone(),
            seed: self.seed,
            stream,
            data,
        };
        let path = self.result_path(name);
        let f = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        serde_json::to_writer_pretty(BufWriter::new(f), &env)?;
        Ok(path)
    }

    /// Opens a CSV file under `results/`.
    pub fn csv(&self, name: &str) -> Result<File> {
        let path = self.result_path(name);
        File::create(&path).with_context(|| format!("writing {}", path.display()))
    }

    /// `summary.csv` at the sweep root; the first lines echo the tool
    /// version, seed and config as comments.
    pub fn write_summary<R: Serialize>(&self, rows: &[R]) -> Result<PathBuf> {
        use std::io::Write;
        let path = self.root.join("summary.csv");
        let mut f = BufWriter::new(File::create(&path).with_context(|| format!("writing {}", path.display()))?);
        writeln!(f, "# {} {} {} seed={}", TOOL, twolocal::VERSION, self.command, self.seed)?;
        writeln!(f, "# config={}", serde_json::to_string(&self.config)?)?;
        let mut w = csv::Writer::from_writer(f);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

pub fn read_envelope<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<Envelope<D>> {
    let f = File::open(path).with_context(|| format!("missing input {}", path.display()))?;
    serde_json::from_reader(std::io::BufReader::new(f)).with_context(|| format!("corrupt input {}", path.display()))
}

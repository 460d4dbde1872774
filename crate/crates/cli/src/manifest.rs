use std::path::{Path, PathBuf};

use orthnewton::optimizer::OptimizerConfig;
use serde::Serialize;

/// Written next to every output so a run can be replayed.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<OptimizerConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<String>,
    pub inputs: Vec<PathBuf>,
    pub seeds: Vec<u64>,
    pub outputs: Vec<PathBuf>,
    pub prng: &'static str,
    pub version: &'static str,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            arguments: std::env::args().skip(1).collect(),
            config: None,
            cost: None,
            inputs: Vec::new(),
            seeds: Vec::new(),
            outputs: Vec::new(),
            prng: "ChaCha8 seeded from the 64-bit seed; stream 0 mixing, 1 sources, 2 initial matrix, 3 statistics",
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(path, text)
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

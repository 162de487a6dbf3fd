//! Run manifests: enough provenance to rerun a command and compare output
//! byte for byte.

use std::io::Read;
use std::path::Path;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::common::CliResult;

#[derive(serde::Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

/// Written as `manifest.json` next to every command's outputs. Reruns with
/// an equal manifest produce byte-identical numeric files.
#[derive(serde::Serialize)]
pub struct RunManifest {
    command: String,
    config: serde_json::Value,
    seed: u64,
    version: &'static str,
    inputs: Vec<InputDigest>,
    timing_secs: f64,
    #[serde(skip)]
    started: Instant,
}

impl RunManifest {
    pub fn start(command: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            inputs: Vec::new(),
            timing_secs: 0.0,
            started: Instant::now(),
        }
    }

    /// Records an input file and its content digest.
    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        let mut file = std::fs::File::open(path)?;
        let mut hasher = Sha256::new();
        let mut buf = [0u8; 1 << 16];
        loop {
            let n = file.read(&mut buf)?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
        }
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: format!("{:x}", hasher.finalize()),
        });
        Ok(())
    }

    /// Stamps the elapsed time and writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> CliResult<()> {
        self.timing_secs = self.started.elapsed().as_secs_f64();
        let path = crate::common::out_path(dir, "manifest.json")?;
        let json = serde_json::to_string_pretty(&self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

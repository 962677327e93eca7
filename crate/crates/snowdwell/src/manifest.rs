//! Run manifests: a JSON record written next to every output artifact.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Full command line; `snowdwell replay` runs it again.
    pub argv: Vec<String>,
    /// Resolved parameters after merging the config file and flags.
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, argv: Vec<String>, config: serde_json::Value) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            argv,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_s: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Writes `<output>.manifest.json` for every output.
    pub fn write_beside_outputs(&self) -> std::io::Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for out in &self.outputs {
            let path = manifest_path(Path::new(out));
            std::fs::write(&path, self.to_json())?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

//! JSON configuration shared by the CLI and the server.

use std::path::{Path, PathBuf};

use eventmap::thematic::{Ramp, Scheme, DEFAULT_CLASSES};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Store directory.
    pub store: PathBuf,
    /// County outline GeoJSON keyed by fips. Without it, centroid boxes are
    /// served.
    pub polygons: Option<PathBuf>,
    /// One stopword per line; the bundled English list when unset.
    pub stopwords: Option<PathBuf>,
    /// County gazetteer CSV; the bundled Kansas file when unset.
    pub gazetteer: Option<PathBuf>,
    pub defaults: Defaults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Defaults {
    pub k: usize,
    pub seed: u64,
    pub min_count: usize,
    pub classes: usize,
    pub scheme: Scheme,
    pub ramp: Ramp,
    pub threshold: f64,
    pub port: u16,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            k: 50,
            seed: 0,
            min_count: 1,
            classes: DEFAULT_CLASSES,
            scheme: Scheme::Quantile,
            ramp: Ramp::SequentialRed,
            threshold: 0.02,
            port: 8080,
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        Self { store: PathBuf::from("eventmap-store"), polygons: None, stopwords: None, gazetteer: None, defaults: Defaults::default() }
    }
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

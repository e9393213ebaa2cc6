//! Sidecar metadata written next to generated datasets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub d: usize,
    /// Training samples.
    pub n: usize,
    /// Number of classes; 2 for binary data.
    pub k: usize,
    pub rho_star: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub theta_star_norm: f64,
    pub seed: u64,
}

impl Metadata {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Schema { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data");
        s.push('\n');
        s
    }
}

//! Checkpoint container.
//!
//! A checkpoint is one file: a magic line, a TOML manifest, a separator line,
//! then every parameter as little-endian `f64` values, row-major, concatenated
//! in manifest order.
//!
//! ```text
//! stgraph-checkpoint v1
//! seed = 7
//! epoch = 12
//! ...
//! [[params]]
//! name = "enc.0.z.theta_n.0"
//! rows = 17
//! cols = 16
//! ...
//! %%params-f64-le%%
//! <binary>
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Scaler;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::numerics::Matrix;

const MAGIC: &str = "stgraph-checkpoint v1\n";
const SEPARATOR: &str = "\n%%params-f64-le%%\n";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub scaler: Scaler,
    pub seed: u64,
    pub epoch: usize,
    pub val_mae: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    seed: u64,
    epoch: usize,
    val_mae: f64,
    scaler: Scaler,
    model: ModelConfig,
    params: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    name: String,
    rows: usize,
    cols: usize,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let manifest = Manifest {
            seed: self.seed,
            epoch: self.epoch,
            val_mae: self.val_mae,
            scaler: self.scaler,
            model: self.config.clone(),
            params: self
                .params
                .names()
                .iter()
                .zip(self.params.values())
                .map(|(name, m)| Entry {
                    name: name.clone(),
                    rows: m.rows(),
                    cols: m.cols(),
                })
                .collect(),
        };
        let text = toml::to_string(&manifest)
            .map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
        let mut out = Vec::with_capacity(text.len() + 8 * self.params.scalar_count() + 64);
        out.extend_from_slice(MAGIC.as_bytes());
        out.extend_from_slice(text.trim_end().as_bytes());
        out.extend_from_slice(SEPARATOR.as_bytes());
        for m in self.params.values() {
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        let body = bytes
            .strip_prefix(MAGIC.as_bytes())
            .ok_or_else(|| bad("missing magic line"))?;
        let sep = find(body, SEPARATOR.as_bytes()).ok_or_else(|| bad("missing parameter separator"))?;
        let text = std::str::from_utf8(&body[..sep]).map_err(|_| bad("manifest is not UTF-8"))?;
        let blob = &body[sep + SEPARATOR.len()..];
        let manifest: Manifest =
            toml::from_str(text).map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;

        let mut params = ModelParams::zeros(&manifest.model)?;
        if manifest.params.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "manifest lists {} parameters, config implies {}",
                manifest.params.len(),
                params.len()
            )));
        }
        let expected: usize = manifest.params.iter().map(|e| e.rows * e.cols * 8).sum();
        if blob.len() != expected {
            return Err(Error::Checkpoint(format!(
                "parameter blob has {} bytes, manifest needs {expected}",
                blob.len()
            )));
        }
        let mut values = Vec::with_capacity(manifest.params.len());
        let mut offset = 0;
        for (entry, name) in manifest.params.iter().zip(params.names()) {
            if &entry.name != name {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}` where `{name}` was expected",
                    entry.name
                )));
            }
            let count = entry.rows * entry.cols;
            let data = blob[offset..offset + 8 * count]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            offset += 8 * count;
            values.push(Matrix::from_vec(entry.rows, entry.cols, data)?);
        }
        params.set_values(values)?;
        Ok(Checkpoint {
            config: manifest.model,
            params,
            scaler: manifest.scaler,
            seed: manifest.seed,
            epoch: manifest.epoch,
            val_mae: manifest.val_mae,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

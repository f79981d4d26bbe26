//! Run configuration file.
//!
//! ```toml
//! [model]
//! k = 3
//! hidden = 16
//! rnn_layers = 1
//! mixing = "attention"
//!
//! [train]
//! epochs = 200
//! seed = 7
//!
//! [data]
//! train = 0.7
//! val = 0.1
//!
//! [paths]
//! readings = "data/readings.csv"
//! ids = "data/ids.txt"
//! distances = "data/distances.csv"
//! ```
//!
//! Every section and key is optional; unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Splits, SYNTH_PERIOD};
use crate::error::{Error, Result};
use crate::graphs::DEFAULT_KAPPA;
use crate::model::ModelConfig;
use crate::training::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub paths: Paths,
    pub synth: SynthConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: f64,
    pub val: f64,
    /// Gaussian-kernel sparsity threshold.
    pub kappa: f64,
    /// Historical-average period in steps.
    pub ha_period: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        let s = Splits::default();
        Self {
            train: s.train,
            val: s.val,
            kappa: DEFAULT_KAPPA,
            ha_period: SYNTH_PERIOD,
        }
    }
}

impl DataConfig {
    pub fn splits(&self) -> Splits {
        Splits {
            train: self.train,
            val: self.val,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub readings: Option<PathBuf>,
    pub ids: Option<PathBuf>,
    pub distances: Option<PathBuf>,
}

/// Synthetic network and series parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub nodes: usize,
    /// Short road links in the generated network.
    pub edges: usize,
    pub steps: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            nodes: 10,
            edges: 20,
            steps: 569,
            noise: 0.05,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.data.splits().validate()?;
        if !(self.data.kappa > 0.0 && self.data.kappa <= 1.0) {
            return Err(Error::Config("data.kappa must lie in (0, 1]".into()));
        }
        if self.data.ha_period == 0 {
            return Err(Error::Config("data.ha_period must be at least 1".into()));
        }
        if self.synth.nodes == 0 || self.synth.steps == 0 {
            return Err(Error::Config("synth.nodes and synth.steps must be at least 1".into()));
        }
        if !(self.synth.noise >= 0.0 && self.synth.noise.is_finite()) {
            return Err(Error::Config("synth.noise must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::EdgeVariant;
    use crate::model::RangeMixing;

    #[test]
    fn partial_file_fills_defaults() {
        let c = RunConfig::from_toml(
            "[model]\nk = 2\nmixing = \"last-hop\"\nedge_variant = \"line-graph\"\n[train]\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(c.model.k, 2);
        assert_eq!(c.model.mixing, RangeMixing::LastHop);
        assert_eq!(c.model.edge_variant, EdgeVariant::LineGraph);
        assert_eq!(c.train.seed, 9);
        assert_eq!(c.train.epochs, 100);
        assert_eq!(c.data, DataConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[model]\nkk = 2\n").is_err());
        assert!(RunConfig::from_toml("[modle]\nk = 2\n").is_err());
        assert!(RunConfig::from_toml("[train]\nlr_decay = 2.0\n").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let mut c = RunConfig::default();
        c.paths.readings = Some("r.csv".into());
        c.train.base_lr = 0.003;
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}

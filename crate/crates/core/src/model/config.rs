use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::EdgeVariant;

/// How the per-hop representations are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangeMixing {
    /// Softmax attention over hops with a learned range context vector.
    #[default]
    Attention,
    /// Concatenate all hops and project back to the hidden width.
    Concat,
    /// Use only the deepest hop.
    LastHop,
}

impl RangeMixing {
    pub const ALL: [RangeMixing; 3] = [RangeMixing::Attention, RangeMixing::Concat, RangeMixing::LastHop];

    pub fn name(self) -> &'static str {
        match self {
            RangeMixing::Attention => "attention",
            RangeMixing::Concat => "concat",
            RangeMixing::LastHop => "last-hop",
        }
    }
}

impl fmt::Display for RangeMixing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RangeMixing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RangeMixing::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown range mixing `{s}`")))
    }
}

/// Structural hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Maximum hop of the bicomponent convolution.
    pub k: usize,
    pub hidden: usize,
    pub rnn_layers: usize,
    pub input_dim: usize,
    pub horizon: usize,
    pub history: usize,
    pub edge_variant: EdgeVariant,
    pub mixing: RangeMixing,
    pub attention_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            k: 3,
            hidden: 64,
            rnn_layers: 2,
            input_dim: 1,
            horizon: 12,
            history: 12,
            edge_variant: EdgeVariant::InteractionPatterns,
            mixing: RangeMixing::Attention,
            attention_dim: 64,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.k, "k"),
            (self.hidden, "hidden"),
            (self.rnn_layers, "rnn_layers"),
            (self.input_dim, "input_dim"),
            (self.horizon, "horizon"),
            (self.history, "history"),
            (self.attention_dim, "attention_dim"),
        ];
        match checks.iter().find(|(v, _)| *v == 0) {
            Some((_, name)) => Err(Error::Config(format!("model.{name} must be at least 1"))),
            None => Ok(()),
        }
    }

    /// Label used in ablation reports.
    pub fn variant_label(&self) -> String {
        format!("{}/{}", self.edge_variant, self.mixing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let c = ModelConfig::default();
        assert_eq!((c.k, c.hidden, c.rnn_layers, c.horizon, c.history), (3, 64, 2, 12, 12));
        c.validate().unwrap();
        let bad = ModelConfig { k: 0, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = toml::from_str::<ModelConfig>("k = 2\nbogus = 1\n");
        assert!(err.is_err());
        let ok: ModelConfig = toml::from_str("k = 2\nmixing = \"last-hop\"\nedge_variant = \"line-graph\"\n").unwrap();
        assert_eq!(ok.mixing, RangeMixing::LastHop);
        assert_eq!(ok.edge_variant, EdgeVariant::LineGraph);
        assert_eq!(ok.hidden, 64);
    }
}

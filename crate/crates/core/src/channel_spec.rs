//! Channel description documents (TOML).
//!
//! ```toml
//! kind = "independent"   # or "cooperative", "custom"
//! n = 2
//! alpha_l = 1.0          # Hz
//! alpha_h = 10.0         # Hz
//! beta = 20.0            # Hz
//!
//! # kind = "custom" takes explicit total rates instead:
//! # up_h = [20.0, 10.0]  # a_{k,H}, k = 0..n-1
//! # up_l = [2.0, 1.0]    # a_{k,L}
//! # down = [20.0, 40.0]  # b_k, k = 1..n
//!
//! [optimizer]            # optional, see OptimizerConfig
//! grid_points = 21
//! ```

use serde::{Deserialize, Serialize};

use crate::capacity::OptimizerConfig;
use crate::channel::{BirthDeathChannel, ChannelKind, ReceptorKinetics};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<ChannelKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub up_h: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub up_l: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub down: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
}

impl ChannelSpec {
    /// Parses a document; errors carry the line and column of the bad field.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("malformed channel spec: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("channel specs always serialize")
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind.unwrap_or(ChannelKind::Independent)
    }

    pub fn kinetics(&self) -> Result<ReceptorKinetics> {
        match (self.alpha_l, self.alpha_h, self.beta) {
            (Some(lo), Some(hi), Some(beta)) => ReceptorKinetics::new(lo, hi, beta),
            _ => Err(Error::Config(format!(
                "{} channels need alpha_l, alpha_h and beta",
                self.kind()
            ))),
        }
    }

    pub fn build(&self) -> Result<BirthDeathChannel> {
        match self.kind() {
            ChannelKind::Custom => {
                let (up_h, up_l, down) = match (&self.up_h, &self.up_l, &self.down) {
                    (Some(h), Some(l), Some(d)) => (h.clone(), l.clone(), d.clone()),
                    _ => {
                        return Err(Error::Config(
                            "custom channels need up_h, up_l and down rate vectors".into(),
                        ))
                    }
                };
                if let Some(n) = self.n.filter(|&n| n != up_h.len()) {
                    return Err(Error::Config(format!(
                        "n = {n} does not match {} rates in up_h",
                        up_h.len()
                    )));
                }
                BirthDeathChannel::custom(up_h, up_l, down)
            }
            kind => {
                if self.up_h.is_some() || self.up_l.is_some() || self.down.is_some() {
                    return Err(Error::Config(format!(
                        "explicit rate vectors are only allowed for kind = \"custom\", not {kind}"
                    )));
                }
                let n = self.n.ok_or_else(|| Error::Config(format!("{kind} channels need n")))?;
                let kin = self.kinetics()?;
                if kind == ChannelKind::Independent {
                    BirthDeathChannel::independent(n, kin)
                } else {
                    BirthDeathChannel::cooperative(n, kin)
                }
            }
        }
    }

    /// The spec that rebuilds `ch`.
    pub fn from_channel(ch: &BirthDeathChannel) -> Self {
        match (ch.kind(), ch.kinetics()) {
            (ChannelKind::Custom, _) | (_, None) => Self {
                kind: Some(ChannelKind::Custom),
                n: Some(ch.n()),
                up_h: Some(ch.up_high().to_vec()),
                up_l: Some(ch.up_low().to_vec()),
                down: Some(ch.down().to_vec()),
                ..Self::default()
            },
            (kind, Some(kin)) => Self {
                kind: Some(kind),
                n: Some(ch.n()),
                alpha_l: Some(kin.alpha_low()),
                alpha_h: Some(kin.alpha_high()),
                beta: Some(kin.beta()),
                ..Self::default()
            },
        }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        self.optimizer.clone().unwrap_or_default()
    }
}

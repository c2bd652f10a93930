use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node-vs-context comparison applied after cross attention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchOp {
    /// No matching; node embeddings pass through unchanged.
    None,
    Sub,
    Mul,
    SubMul,
}

/// Pooling from node embeddings to one graph vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggOp {
    #[serde(rename = "avg")]
    Average,
    Max,
    FcAvg,
    FcMax,
}

impl MatchOp {
    pub const ALL: [MatchOp; 4] = [MatchOp::None, MatchOp::Sub, MatchOp::Mul, MatchOp::SubMul];

    /// Output width multiplier relative to the encoder width.
    pub fn width_factor(self) -> usize {
        match self {
            MatchOp::SubMul => 2,
            _ => 1,
        }
    }
}

impl AggOp {
    pub const ALL: [AggOp; 4] = [AggOp::Average, AggOp::Max, AggOp::FcAvg, AggOp::FcMax];

    pub fn uses_fc(self) -> bool {
        matches!(self, AggOp::FcAvg | AggOp::FcMax)
    }
}

impl FromStr for MatchOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "no" => Ok(MatchOp::None),
            "sub" => Ok(MatchOp::Sub),
            "mul" => Ok(MatchOp::Mul),
            "submul" => Ok(MatchOp::SubMul),
            other => Err(Error::Argument(format!("unknown match op {other:?}"))),
        }
    }
}

impl FromStr for AggOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "avg" | "average" => Ok(AggOp::Average),
            "max" => Ok(AggOp::Max),
            "fcavg" => Ok(AggOp::FcAvg),
            "fcmax" => Ok(AggOp::FcMax),
            other => Err(Error::Argument(format!("unknown aggregation op {other:?}"))),
        }
    }
}

impl fmt::Display for MatchOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchOp::None => "none",
            MatchOp::Sub => "sub",
            MatchOp::Mul => "mul",
            MatchOp::SubMul => "submul",
        })
    }
}

impl fmt::Display for AggOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggOp::Average => "avg",
            AggOp::Max => "max",
            AggOp::FcAvg => "fcavg",
            AggOp::FcMax => "fcmax",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: usize,
    pub rgcn_dim: usize,
    pub match_op: MatchOp,
    pub agg_op: AggOp,
    pub agg_dim: usize,
    pub input_dim: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 1,
            rgcn_dim: 100,
            match_op: MatchOp::SubMul,
            agg_op: AggOp::FcMax,
            agg_dim: 100,
            input_dim: 300,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("layers", self.layers),
            ("rgcn_dim", self.rgcn_dim),
            ("agg_dim", self.agg_dim),
            ("input_dim", self.input_dim),
        ] {
            if v == 0 {
                return Err(Error::Argument(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// Width after matching (`d′`).
    pub fn matched_dim(&self) -> usize {
        self.rgcn_dim * self.match_op.width_factor()
    }

    /// Width of the pooled graph vector.
    pub fn output_dim(&self) -> usize {
        if self.agg_op.uses_fc() {
            self.agg_dim
        } else {
            self.matched_dim()
        }
    }

    /// `(fan_in, fan_out)` of RGCN layer `l`.
    pub fn layer_dims(&self, l: usize) -> (usize, usize) {
        let fan_in = if l == 0 { self.input_dim } else { self.rgcn_dim };
        (fan_in, self.rgcn_dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_widths() {
        let c = ModelConfig::default();
        assert_eq!((c.layers, c.rgcn_dim, c.agg_dim, c.input_dim), (1, 100, 100, 300));
        assert_eq!(c.matched_dim(), 200);
        let sub = ModelConfig { match_op: MatchOp::Sub, agg_op: AggOp::Max, ..c };
        assert_eq!((sub.matched_dim(), sub.output_dim()), (100, 100));
        assert!(ModelConfig { rgcn_dim: 0, ..ModelConfig::default() }.validate().is_err());
    }

    #[test]
    fn names_parse_and_serialize() {
        for op in MatchOp::ALL {
            assert_eq!(op.to_string().parse::<MatchOp>().unwrap(), op);
            assert_eq!(serde_json::to_string(&op).unwrap(), format!("\"{op}\""));
        }
        for op in AggOp::ALL {
            assert_eq!(op.to_string().parse::<AggOp>().unwrap(), op);
            assert_eq!(serde_json::to_string(&op).unwrap(), format!("\"{op}\""));
        }
        assert!("fcmin".parse::<AggOp>().is_err());
    }
}

use serde::{Deserialize, Serialize};

use crate::metapath::SamplingConfig;

/// Neighbor-set encoder used inside one metapath.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    /// Elementwise average.
    #[default]
    Mean,
    /// Softmax over `h_u . h_v` weights the neighbors.
    Weighted,
    /// Average, then a per-metapath `d x d` linear map and the nonlinearity.
    Nonlinear,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Sigmoid,
    Relu,
}

/// How per-metapath vectors become one node vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionMode {
    /// Query-vector attention over metapaths.
    #[default]
    MetapathAttention,
    /// Multi-head self-attention across the metapath rows, then row mean.
    MultiHead,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub encoder: EncoderKind,
    pub nonlinearity: Activation,
    pub fusion: FusionMode,
    pub heads: usize,
    pub seed: u64,
    pub sampling: SamplingConfig,
    /// Reuse the epoch-0 neighbor samples for every epoch.
    pub freeze_sampling: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 200,
            encoder: EncoderKind::Mean,
            nonlinearity: Activation::Sigmoid,
            fusion: FusionMode::MetapathAttention,
            heads: 8,
            seed: 0,
            sampling: SamplingConfig::default(),
            freeze_sampling: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.dim == 0 {
            return Err("embedding dimension must be positive".into());
        }
        if self.fusion == FusionMode::MultiHead {
            if self.heads == 0 {
                return Err("head count must be positive".into());
            }
            if self.dim % self.heads != 0 {
                return Err(format!(
                    "head count {} does not divide dimension {}",
                    self.heads, self.dim
                ));
            }
        }
        if self.sampling.n_instances == 0 || self.sampling.max_retries == 0 {
            return Err("sampling needs at least one instance and one attempt".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads.max(1)
    }
}

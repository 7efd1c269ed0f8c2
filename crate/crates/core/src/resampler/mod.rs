//! Token resamplers: reduce a clip's fused features to a fixed token count.
//!
//! [`perceiver`] holds learned latents that cross-attend to the input tokens;
//! [`pooling`] holds the MLP/conv + adaptive-average-pooling baselines.

pub mod perceiver;
pub mod pooling;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fusion::FeatureGrid;

pub use perceiver::{
    perceiver_backward, perceiver_forward, perceiver_forward_traced, PerceiverConfig, PerceiverGradients,
    PerceiverParams,
};
pub use pooling::{avgpool_mlp_resample, conv_avgpool_resample, ConvParams, MlpParams};

/// `rows x dim` real matrix. Rows are tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    data: Array2<f64>,
}

impl TokenMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        ensure(dim >= 1, "dim", || "must be >= 1".into())?;
        ensure(data.len() == rows * dim, "data", || {
            format!("length {} does not match {rows}x{dim}", data.len())
        })?;
        ensure(data.iter().all(|v| v.is_finite()), "data", || "contains non-finite values".into())?;
        let data = Array2::from_shape_vec((rows, dim), data).expect("shape checked");
        Ok(Self { data })
    }

    pub fn from_array(data: Array2<f64>) -> Result<Self> {
        let (rows, dim) = data.dim();
        Self::new(rows, dim, data.iter().copied().collect())
    }

    /// Flattens every `(t, y, x)` position of a grid into one token.
    pub fn from_grid(grid: &FeatureGrid) -> Self {
        let [t, h, w, c] = grid.dims();
        let data = Array2::from_shape_vec((t * h * w, c), grid.data().to_vec()).expect("grid dims");
        Self { data }
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }
    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }
    pub fn array(&self) -> &Array2<f64> {
        &self.data
    }
    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice().expect("standard layout")
    }
    pub fn row(&self, i: usize) -> &[f64] {
        &self.as_slice()[i * self.dim()..(i + 1) * self.dim()]
    }

    /// Stacks matrices with a shared `dim` vertically.
    pub fn vstack(parts: &[TokenMatrix]) -> Result<Self> {
        let dim = parts
            .first()
            .map(|p| p.dim())
            .ok_or_else(|| Error::validation("parts", "need at least one matrix"))?;
        let mut data = Vec::new();
        for (i, p) in parts.iter().enumerate() {
            ensure(p.dim() == dim, &format!("parts[{i}]"), || format!("dim {} != {dim}", p.dim()))?;
            data.extend_from_slice(p.as_slice());
        }
        Self::new(data.len() / dim, dim, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// All `T*H*W` tokens of a clip feed one resampler call.
    #[default]
    PerClip,
    /// Each frame's `H*W` tokens are resampled separately.
    PerFrame,
}

/// `clip_frames * tokens_per_frame` of the default sampling config (4 x 16).
fn default_latent_count() -> usize {
    64
}
fn default_model_dim() -> usize {
    64
}
fn default_heads() -> usize {
    4
}
fn default_layers() -> usize {
    1
}

/// Resampler choice as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResamplerSpec {
    Perceiver {
        #[serde(default = "default_latent_count")]
        latent_count: usize,
        #[serde(default = "default_model_dim")]
        model_dim: usize,
        #[serde(default = "default_heads")]
        heads: usize,
        #[serde(default = "default_layers")]
        layers: usize,
        #[serde(default)]
        granularity: Granularity,
    },
    MlpPool {
        tokens_per_frame: usize,
        hidden_dim: usize,
        out_dim: usize,
    },
    ConvPool {
        tokens_per_frame: usize,
        hidden_channels: usize,
        out_dim: usize,
    },
}

/// Builds seeded parameters for `spec` and resamples `grid`.
pub fn resample_grid(grid: &FeatureGrid, spec: &ResamplerSpec, seed: u64) -> Result<TokenMatrix> {
    let channels = grid.channels();
    match *spec {
        ResamplerSpec::Perceiver {
            latent_count,
            model_dim,
            heads,
            layers,
            granularity,
        } => {
            let config = PerceiverConfig {
                latent_count,
                input_dim: channels,
                model_dim,
                heads,
                layers,
                seed,
            };
            let params = PerceiverParams::init(&config)?;
            match granularity {
                Granularity::PerClip => perceiver_forward(&TokenMatrix::from_grid(grid), &params, &config),
                Granularity::PerFrame => {
                    let parts = (0..grid.frames())
                        .map(|t| perceiver_forward(&TokenMatrix::from_grid(&grid.frame(t)), &params, &config))
                        .collect::<Result<Vec<_>>>()?;
                    TokenMatrix::vstack(&parts)
                }
            }
        }
        ResamplerSpec::MlpPool {
            tokens_per_frame,
            hidden_dim,
            out_dim,
        } => {
            let params = MlpParams::init(channels, hidden_dim, out_dim, seed)?;
            avgpool_mlp_resample(grid, tokens_per_frame, &params)
        }
        ResamplerSpec::ConvPool {
            tokens_per_frame,
            hidden_channels,
            out_dim,
        } => {
            let params = ConvParams::init(channels, hidden_channels, out_dim, seed)?;
            conv_avgpool_resample(grid, tokens_per_frame, &params)
        }
    }
}

/// GELU, tanh approximation.
pub(crate) fn gelu(x: f64) -> f64 {
    const K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (K * (x + 0.044_715 * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    const K: f64 = 0.797_884_560_802_865_4;
    let th = (K * (x + 0.044_715 * x * x * x)).tanh();
    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * K * (1.0 + 3.0 * 0.044_715 * x * x)
}

//! Building blocks for studying video large multimodal models.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`sampler`] plans which frames are read, grouped into fixed-fps clips,
//!   and computes the fps/tps/tpf token budget.
//! - [`fusion`] builds clip feature grids from deterministic stub encoders,
//!   interpolates them to a common resolution and concatenates channels.
//! - [`atnsr`] reads and writes the on-disk feature grid format.
//! - [`resampler`] reduces fused features to a fixed token count
//!   (Perceiver cross-attention with analytic gradients, plus pooling baselines).
//! - [`integrator`] lays out video tokens, separators and timestamps in a prompt.
//! - [`benchcraft`] analyses benchmark redundancy and curates discriminative
//!   question sets.
//! - [`scalelab`] measures how design-decision rankings transfer across LLM sizes.

pub mod atnsr;
pub mod benchcraft;
pub mod error;
pub mod fixtures;
pub mod fusion;
pub mod integrator;
pub mod resampler;
pub mod sampler;
pub mod scalelab;
pub mod stats;

pub use error::{Error, Result};
pub use fusion::FeatureGrid;
pub use resampler::TokenMatrix;
pub use sampler::{SamplingConfig, SamplingMode, SamplingPlan, TokenBudget, VideoMeta};

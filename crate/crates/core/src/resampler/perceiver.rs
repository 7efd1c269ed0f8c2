//! Perceiver-style resampler: learned latents cross-attend to projected inputs.
//!
//! ```text
//! X  = F Wp
//! for each layer:
//!     L <- L + MHA(Q = L Wq, K = X Wk, V = X Wv) Wo
//!     L <- L + GELU(L W1 + b1) W2 + b2
//! ```
//!
//! Keys carry no positional encoding, so the output is a function of the
//! multiset of input rows. Rows are put into a canonical order before any
//! reduction, which makes that invariance exact in floating point.

use std::cmp::Ordering;

use ndarray::{s, Array1, Array2, Axis};
use rand::distr::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gelu, gelu_grad, TokenMatrix};
use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerceiverConfig {
    /// Output tokens per call.
    pub latent_count: usize,
    pub input_dim: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub seed: u64,
}

impl PerceiverConfig {
    /// One layer, four heads, width 64.
    pub fn new(latent_count: usize, input_dim: usize, seed: u64) -> Self {
        Self {
            latent_count,
            input_dim,
            model_dim: 64,
            heads: 4,
            layers: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("latent_count", self.latent_count),
            ("input_dim", self.input_dim),
            ("model_dim", self.model_dim),
            ("heads", self.heads),
            ("layers", self.layers),
        ] {
            ensure(v >= 1, name, || "must be >= 1".into())?;
        }
        ensure(self.model_dim.is_multiple_of(self.heads), "heads", || {
            format!("{} does not divide model_dim {}", self.heads, self.model_dim)
        })
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.heads
    }

    fn scale(&self) -> f64 {
        1.0 / (self.head_dim() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl LayerParams {
    fn zeros(d: usize) -> Self {
        Self {
            wq: Array2::zeros((d, d)),
            wk: Array2::zeros((d, d)),
            wv: Array2::zeros((d, d)),
            wo: Array2::zeros((d, d)),
            w1: Array2::zeros((d, 4 * d)),
            b1: Array1::zeros(4 * d),
            w2: Array2::zeros((4 * d, d)),
            b2: Array1::zeros(d),
        }
    }
}

/// Resampler weights. The same layout holds gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceiverParams {
    pub latents: Array2<f64>,
    pub input_proj: Array2<f64>,
    pub layers: Vec<LayerParams>,
}

fn uniform(rng: &mut ChaCha8Rng, shape: (usize, usize), fan_in: usize) -> Array2<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Array2::from_shape_simple_fn(shape, || rng.sample(dist))
}

impl PerceiverParams {
    /// Entries uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, drawn from `config.seed`.
    pub fn init(config: &PerceiverConfig) -> Result<Self> {
        config.validate()?;
        let d = config.model_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let latents = uniform(&mut rng, (config.latent_count, d), d);
        let input_proj = uniform(&mut rng, (config.input_dim, d), config.input_dim);
        let layers = (0..config.layers)
            .map(|_| LayerParams {
                wq: uniform(&mut rng, (d, d), d),
                wk: uniform(&mut rng, (d, d), d),
                wv: uniform(&mut rng, (d, d), d),
                wo: uniform(&mut rng, (d, d), d),
                w1: uniform(&mut rng, (d, 4 * d), d),
                b1: uniform(&mut rng, (1, 4 * d), d).remove_axis(Axis(0)),
                w2: uniform(&mut rng, (4 * d, d), 4 * d),
                b2: uniform(&mut rng, (1, d), 4 * d).remove_axis(Axis(0)),
            })
            .collect();
        Ok(Self {
            latents,
            input_proj,
            layers,
        })
    }

    fn zeros_like(config: &PerceiverConfig) -> Self {
        let d = config.model_dim;
        Self {
            latents: Array2::zeros((config.latent_count, d)),
            input_proj: Array2::zeros((config.input_dim, d)),
            layers: (0..config.layers).map(|_| LayerParams::zeros(d)).collect(),
        }
    }

    fn check_shapes(&self, config: &PerceiverConfig) -> Result<()> {
        let d = config.model_dim;
        ensure(self.latents.dim() == (config.latent_count, d), "params.latents", || {
            format!("shape {:?} does not match config", self.latents.dim())
        })?;
        ensure(self.input_proj.dim() == (config.input_dim, d), "params.input_proj", || {
            format!("shape {:?} does not match config", self.input_proj.dim())
        })?;
        ensure(self.layers.len() == config.layers, "params.layers", || {
            format!("{} layers, config has {}", self.layers.len(), config.layers)
        })?;
        let expected = LayerParams::zeros(d);
        for (i, l) in self.layers.iter().enumerate() {
            let ok = l.wq.dim() == expected.wq.dim()
                && l.wk.dim() == expected.wk.dim()
                && l.wv.dim() == expected.wv.dim()
                && l.wo.dim() == expected.wo.dim()
                && l.w1.dim() == expected.w1.dim()
                && l.b1.dim() == expected.b1.dim()
                && l.w2.dim() == expected.w2.dim()
                && l.b2.dim() == expected.b2.dim();
            ensure(ok, &format!("params.layers[{i}]"), || "shape does not match config".into())?;
        }
        Ok(())
    }

    /// Every parameter tensor as `(name, flat slice)`, in a fixed order.
    pub fn groups(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("latents".into(), self.latents.as_slice().unwrap()),
            ("input_proj".into(), self.input_proj.as_slice().unwrap()),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            for (name, a) in [
                ("wq", l.wq.as_slice().unwrap()),
                ("wk", l.wk.as_slice().unwrap()),
                ("wv", l.wv.as_slice().unwrap()),
                ("wo", l.wo.as_slice().unwrap()),
                ("w1", l.w1.as_slice().unwrap()),
                ("b1", l.b1.as_slice().unwrap()),
                ("w2", l.w2.as_slice().unwrap()),
                ("b2", l.b2.as_slice().unwrap()),
            ] {
                out.push((format!("layers[{i}].{name}"), a));
            }
        }
        out
    }

    pub fn groups_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("latents".into(), self.latents.as_slice_mut().unwrap()),
            ("input_proj".into(), self.input_proj.as_slice_mut().unwrap()),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            for (name, a) in [
                ("wq", l.wq.as_slice_mut().unwrap()),
                ("wk", l.wk.as_slice_mut().unwrap()),
                ("wv", l.wv.as_slice_mut().unwrap()),
                ("wo", l.wo.as_slice_mut().unwrap()),
                ("w1", l.w1.as_slice_mut().unwrap()),
                ("b1", l.b1.as_slice_mut().unwrap()),
                ("w2", l.w2.as_slice_mut().unwrap()),
                ("b2", l.b2.as_slice_mut().unwrap()),
            ] {
                out.push((format!("layers[{i}].{name}"), a));
            }
        }
        out
    }
}

struct LayerCache {
    latents_in: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Per head, `latent_count x rows`.
    attn: Vec<Array2<f64>>,
    mixed: Array2<f64>,
    latents_mid: Array2<f64>,
    pre_act: Array2<f64>,
    hidden: Array2<f64>,
}

/// Forward pass output with everything backward needs.
pub struct PerceiverTrace {
    order: Vec<usize>,
    sorted: Array2<f64>,
    projected: Array2<f64>,
    layers: Vec<LayerCache>,
    pub output: TokenMatrix,
}

impl PerceiverTrace {
    /// Attention maps as `[layer][head]`, each `latent_count x rows`.
    /// Columns follow the canonical row order, not the caller's order.
    pub fn attention_maps(&self) -> Vec<Vec<&Array2<f64>>> {
        self.layers.iter().map(|l| l.attn.iter().collect()).collect()
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn canonical_order(features: &TokenMatrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..features.rows()).collect();
    order.sort_by(|&i, &j| lexicographic(features.row(i), features.row(j)).then(i.cmp(&j)));
    order
}

fn softmax_rows(mut m: Array2<f64>) -> Array2<f64> {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    m
}

fn check_inputs(features: &TokenMatrix, params: &PerceiverParams, config: &PerceiverConfig) -> Result<()> {
    config.validate()?;
    params.check_shapes(config)?;
    ensure(features.rows() >= 1, "features", || "need at least one token".into())?;
    ensure(features.dim() == config.input_dim, "features", || {
        format!("dim {} does not match input_dim {}", features.dim(), config.input_dim)
    })
}

pub fn perceiver_forward_traced(
    features: &TokenMatrix,
    params: &PerceiverParams,
    config: &PerceiverConfig,
) -> Result<PerceiverTrace> {
    check_inputs(features, params, config)?;
    let order = canonical_order(features);
    let sorted = features.array().select(Axis(0), &order);
    let projected = sorted.dot(&params.input_proj);
    let hd = config.head_dim();
    let scale = config.scale();

    let mut latents = params.latents.clone();
    let mut caches = Vec::with_capacity(config.layers);
    for layer in &params.layers {
        let q = latents.dot(&layer.wq);
        let k = projected.dot(&layer.wk);
        let v = projected.dot(&layer.wv);
        let mut mixed = Array2::zeros(q.dim());
        let mut attn = Vec::with_capacity(config.heads);
        for h in 0..config.heads {
            let cols = s![.., h * hd..(h + 1) * hd];
            let scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            let a = softmax_rows(scores);
            mixed.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
            attn.push(a);
        }
        let latents_mid = &latents + &mixed.dot(&layer.wo);
        let pre_act = latents_mid.dot(&layer.w1) + &layer.b1;
        let hidden = pre_act.mapv(gelu);
        let out = &latents_mid + &(hidden.dot(&layer.w2) + &layer.b2);
        caches.push(LayerCache {
            latents_in: std::mem::replace(&mut latents, out),
            q,
            k,
            v,
            attn,
            mixed,
            latents_mid,
            pre_act,
            hidden,
        });
    }

    Ok(PerceiverTrace {
        order,
        sorted,
        projected,
        layers: caches,
        output: TokenMatrix::from_array(latents)?,
    })
}

/// Returns `latent_count x model_dim` tokens.
pub fn perceiver_forward(
    features: &TokenMatrix,
    params: &PerceiverParams,
    config: &PerceiverConfig,
) -> Result<TokenMatrix> {
    Ok(perceiver_forward_traced(features, params, config)?.output)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceiverGradients {
    pub params: PerceiverParams,
    /// Same row order as the caller's features.
    pub features: Array2<f64>,
}

/// Analytic gradients of `L = sum(upstream * output)`.
pub fn perceiver_backward(
    features: &TokenMatrix,
    params: &PerceiverParams,
    config: &PerceiverConfig,
    upstream: &Array2<f64>,
) -> Result<PerceiverGradients> {
    let trace = perceiver_forward_traced(features, params, config)?;
    ensure(upstream.dim() == (config.latent_count, config.model_dim), "upstream", || {
        format!(
            "shape {:?}, expected ({}, {})",
            upstream.dim(),
            config.latent_count,
            config.model_dim
        )
    })?;

    let hd = config.head_dim();
    let scale = config.scale();
    let mut grads = PerceiverParams::zeros_like(config);
    let mut d_projected = Array2::<f64>::zeros(trace.projected.dim());
    let mut d_lat = upstream.to_owned();

    for (idx, (layer, cache)) in params.layers.iter().zip(&trace.layers).enumerate().rev() {
        let g = &mut grads.layers[idx];

        // feed-forward block
        let d_out = &d_lat;
        g.w2 = cache.hidden.t().dot(d_out);
        g.b2 = d_out.sum_axis(Axis(0));
        let d_hidden = d_out.dot(&layer.w2.t());
        let d_pre = &d_hidden * &cache.pre_act.mapv(gelu_grad);
        g.w1 = cache.latents_mid.t().dot(&d_pre);
        g.b1 = d_pre.sum_axis(Axis(0));
        let d_mid = d_out + &d_pre.dot(&layer.w1.t());

        // attention block
        g.wo = cache.mixed.t().dot(&d_mid);
        let d_mixed = d_mid.dot(&layer.wo.t());
        let mut dq = Array2::<f64>::zeros(cache.q.dim());
        let mut dk = Array2::<f64>::zeros(cache.k.dim());
        let mut dv = Array2::<f64>::zeros(cache.v.dim());
        for (h, a) in cache.attn.iter().enumerate() {
            let cols = s![.., h * hd..(h + 1) * hd];
            let d_head = d_mixed.slice(cols);
            dv.slice_mut(cols).assign(&a.t().dot(&d_head));
            let d_attn = d_head.dot(&cache.v.slice(cols).t());
            let row_dot = (&d_attn * a).sum_axis(Axis(1)).insert_axis(Axis(1));
            let d_scores = a * &(&d_attn - &row_dot) * scale;
            dq.slice_mut(cols).assign(&d_scores.dot(&cache.k.slice(cols)));
            dk.slice_mut(cols).assign(&d_scores.t().dot(&cache.q.slice(cols)));
        }
        g.wq = cache.latents_in.t().dot(&dq);
        g.wk = trace.projected.t().dot(&dk);
        g.wv = trace.projected.t().dot(&dv);
        d_projected = d_projected + dk.dot(&layer.wk.t()) + dv.dot(&layer.wv.t());
        d_lat = d_mid + dq.dot(&layer.wq.t());
    }

    grads.latents = d_lat;
    grads.input_proj = trace.sorted.t().dot(&d_projected);
    let d_sorted = d_projected.dot(&params.input_proj.t());
    let mut d_features = Array2::<f64>::zeros(d_sorted.dim());
    for (sorted_row, &orig) in trace.order.iter().enumerate() {
        d_features.row_mut(orig).assign(&d_sorted.row(sorted_row));
    }
    Ok(PerceiverGradients {
        params: grads,
        features: d_features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (TokenMatrix, PerceiverParams, PerceiverConfig) {
        let config = PerceiverConfig {
            latent_count: 3,
            input_dim: 8,
            model_dim: 8,
            heads: 2,
            layers: 1,
            seed: 11,
        };
        let params = PerceiverParams::init(&config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = (0..5 * 8).map(|_| rng.random_range(-1.0..1.0)).collect();
        (TokenMatrix::new(5, 8, data).unwrap(), params, config)
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let config = PerceiverConfig::new(4, 6, 1);
        let a = PerceiverParams::init(&config).unwrap();
        assert_eq!(a, PerceiverParams::init(&config).unwrap());
        let b = PerceiverParams::init(&PerceiverConfig { seed: 2, ..config }).unwrap();
        assert_ne!(a, b);

        let d = config.model_dim as f64;
        let bound = |name: &str| -> f64 {
            if name == "input_proj" {
                1.0 / (config.input_dim as f64).sqrt()
            } else if name.ends_with("w2") || name.ends_with("b2") {
                1.0 / (4.0 * d).sqrt()
            } else {
                1.0 / d.sqrt()
            }
        };
        for (name, values) in a.groups() {
            let b = bound(&name);
            assert!(values.iter().all(|v| v.abs() <= b), "{name}");
        }
    }

    #[test]
    fn invalid_configs() {
        let mut config = PerceiverConfig::new(4, 6, 1);
        config.heads = 5;
        assert!(PerceiverParams::init(&config).is_err());
        config.heads = 4;
        config.latent_count = 0;
        assert!(PerceiverParams::init(&config).is_err());
    }

    #[test]
    fn output_shape_and_dim_mismatch() {
        let (x, p, c) = small();
        let out = perceiver_forward(&x, &p, &c).unwrap();
        assert_eq!((out.rows(), out.dim()), (3, 8));
        let wrong = TokenMatrix::new(2, 4, vec![0.0; 8]).unwrap();
        assert!(perceiver_forward(&wrong, &p, &c).is_err());
        let empty = TokenMatrix::new(0, 8, vec![]).unwrap();
        assert!(perceiver_forward(&empty, &p, &c).is_err());
    }

    #[test]
    fn identical_tokens_give_uniform_attention() {
        let (_, p, c) = small();
        let v: Vec<f64> = (0..8).map(|i| 0.1 * i as f64 - 0.3).collect();
        let x = TokenMatrix::new(6, 8, v.iter().cycle().take(48).copied().collect()).unwrap();
        let trace = perceiver_forward_traced(&x, &p, &c).unwrap();
        for a in trace.attention_maps().concat() {
            assert!(a.iter().all(|&w| (w - 1.0 / 6.0).abs() < 1e-15));
        }
        let proj = Array2::from_shape_vec((1, 8), v).unwrap().dot(&p.input_proj);
        let expected = proj.dot(&p.layers[0].wv).dot(&p.layers[0].wo);
        let mid = &trace.layers[0].latents_mid - &p.latents;
        for row in mid.rows() {
            for (a, b) in row.iter().zip(expected.row(0)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn permutation_invariance_is_bitwise() {
        let (x, p, c) = small();
        let out = perceiver_forward(&x, &p, &c).unwrap();
        let rev: Vec<usize> = (0..x.rows()).rev().collect();
        let shuffled = TokenMatrix::from_array(x.array().select(Axis(0), &rev)).unwrap();
        assert_eq!(perceiver_forward(&shuffled, &p, &c).unwrap(), out);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let (x, p, c) = small();
        let g = perceiver_backward(&x, &p, &c, &Array2::zeros((3, 8))).unwrap();
        assert!(g.features.iter().all(|&v| v == 0.0));
        for (name, values) in g.params.groups() {
            assert!(values.iter().all(|&v| v == 0.0), "{name}");
        }
        assert_eq!(g.params.layers.len(), c.layers);
        assert!(g.params.layers.get(c.layers).is_none());
        assert!(perceiver_backward(&x, &p, &c, &Array2::zeros((2, 8))).is_err());
    }

    #[test]
    fn feature_gradient_follows_caller_order() {
        let (x, p, c) = small();
        let up = Array2::from_shape_fn((3, 8), |(i, j)| (i as f64 - j as f64) * 0.1);
        let g = perceiver_backward(&x, &p, &c, &up).unwrap();
        let rev: Vec<usize> = (0..x.rows()).rev().collect();
        let shuffled = TokenMatrix::from_array(x.array().select(Axis(0), &rev)).unwrap();
        let gs = perceiver_backward(&shuffled, &p, &c, &up).unwrap();
        assert_eq!(gs.features, g.features.select(Axis(0), &rev));
    }

    fn loss(x: &TokenMatrix, p: &PerceiverParams, c: &PerceiverConfig, up: &Array2<f64>) -> f64 {
        let out = perceiver_forward(x, p, c).unwrap();
        (out.array() * up).sum()
    }

    fn rel_err(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
    }

    #[test]
    fn gradients_match_central_differences() {
        let (x, p, c) = small();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let up = Array2::from_shape_fn((3, 8), |_| rng.random_range(-1.0..1.0));
        let g = perceiver_backward(&x, &p, &c, &up).unwrap();
        let eps = 1e-5;
        let mut worst = 0.0f64;
        let analytic = g.params.groups();
        for (gi, (name, grad)) in analytic.iter().enumerate() {
            for i in 0..grad.len() {
                let mut plus = p.clone();
                plus.groups_mut()[gi].1[i] += eps;
                let mut minus = p.clone();
                minus.groups_mut()[gi].1[i] -= eps;
                let numeric = (loss(&x, &plus, &c, &up) - loss(&x, &minus, &c, &up)) / (2.0 * eps);
                let e = rel_err(grad[i], numeric);
                assert!(e < 1e-4, "{name}[{i}]: analytic {} numeric {numeric}", grad[i]);
                worst = worst.max(e);
            }
        }
        for r in 0..x.rows() {
            for j in 0..x.dim() {
                let bump = |d: f64| {
                    let mut a = x.array().clone();
                    a[[r, j]] += d;
                    loss(&TokenMatrix::from_array(a).unwrap(), &p, &c, &up)
                };
                let numeric = (bump(eps) - bump(-eps)) / (2.0 * eps);
                let e = rel_err(g.features[[r, j]], numeric);
                assert!(e < 1e-4, "features[{r},{j}]: analytic {} numeric {numeric}", g.features[[r, j]]);
            }
        }
        assert!(worst < 1e-4);
    }
}

//! Pooling baselines: a per-token 2-layer MLP or two 3x3 convolutions,
//! followed by adaptive average pooling to `h' x w'` per frame.

use rand::distr::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{gelu, TokenMatrix};
use crate::error::{ensure, Error, Result};
use crate::fusion::{pool_bin, FeatureGrid};

/// Factors `n` as `h' x w'` with `h'` the largest divisor not above `floor(sqrt(n))`.
/// Falls back to the transposed factorization when only that fits `height x width`.
pub fn pool_target(n: usize, height: usize, width: usize) -> Result<(usize, usize)> {
    ensure(n >= 1, "out_tokens_per_frame", || "must be >= 1".into())?;
    let mut h = (n as f64).sqrt().floor() as usize;
    while h * h > n {
        h -= 1;
    }
    while (h + 1) * (h + 1) <= n {
        h += 1;
    }
    while !n.is_multiple_of(h) {
        h -= 1;
    }
    let w = n / h;
    if h <= height && w <= width {
        Ok((h, w))
    } else if w <= height && h <= width {
        Ok((w, h))
    } else {
        Err(Error::validation(
            "out_tokens_per_frame",
            format!("{n} = {h}x{w} does not fit a {height}x{width} grid"),
        ))
    }
}

/// Mean over each `floor/ceil` bin, per frame and channel.
pub fn adaptive_avg_pool(grid: &FeatureGrid, out_h: usize, out_w: usize) -> Result<FeatureGrid> {
    ensure(out_h >= 1 && out_w >= 1, "pool target", || "must be >= 1".into())?;
    let (h, w) = (grid.height(), grid.width());
    let ys: Vec<_> = (0..out_h).map(|i| pool_bin(i, out_h, h)).collect();
    let xs: Vec<_> = (0..out_w).map(|i| pool_bin(i, out_w, w)).collect();
    FeatureGrid::from_fn(grid.frames(), out_h, out_w, grid.channels(), |t, y, x, c| {
        let ((y0, y1), (x0, x1)) = (ys[y], xs[x]);
        let mut sum = 0.0;
        for yy in y0..y1 {
            for xx in x0..x1 {
                sum += grid.get(t, yy, xx, c);
            }
        }
        sum / ((y1 - y0) * (x1 - x0)) as f64
    })
}

fn uniform_vec(rng: &mut ChaCha8Rng, len: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    (0..len).map(|_| rng.sample(dist)).collect()
}

/// `in -> hidden -> out` with GELU between. Weights are row-major `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpParams {
    pub fn init(in_dim: usize, hidden_dim: usize, out_dim: usize, seed: u64) -> Result<Self> {
        for (name, v) in [("in_dim", in_dim), ("hidden_dim", hidden_dim), ("out_dim", out_dim)] {
            ensure(v >= 1, name, || "must be >= 1".into())?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            in_dim,
            hidden_dim,
            out_dim,
            w1: uniform_vec(&mut rng, in_dim * hidden_dim, in_dim),
            b1: uniform_vec(&mut rng, hidden_dim, in_dim),
            w2: uniform_vec(&mut rng, hidden_dim * out_dim, hidden_dim),
            b2: uniform_vec(&mut rng, out_dim, hidden_dim),
        })
    }

    fn apply(&self, x: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        dense(x, &self.w1, &self.b1, hidden);
        hidden.iter_mut().for_each(|v| *v = gelu(*v));
        dense(hidden, &self.w2, &self.b2, out);
    }
}

fn dense(x: &[f64], w: &[f64], b: &[f64], out: &mut [f64]) {
    let n_out = b.len();
    out.copy_from_slice(b);
    for (i, &xi) in x.iter().enumerate() {
        let row = &w[i * n_out..(i + 1) * n_out];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
}

fn grid_to_tokens(grid: FeatureGrid) -> Result<TokenMatrix> {
    let [t, h, w, c] = grid.dims();
    TokenMatrix::new(t * h * w, c, grid.into_data())
}

/// MLP on every token, then adaptive average pooling. Rows = `T * h' * w'`.
pub fn avgpool_mlp_resample(grid: &FeatureGrid, out_tokens_per_frame: usize, mlp: &MlpParams) -> Result<TokenMatrix> {
    ensure(grid.channels() == mlp.in_dim, "mlp", || {
        format!("in_dim {} does not match {} channels", mlp.in_dim, grid.channels())
    })?;
    let (ph, pw) = pool_target(out_tokens_per_frame, grid.height(), grid.width())?;
    let [t, h, w, _] = grid.dims();
    let mut hidden = vec![0.0; mlp.hidden_dim];
    let mut data = vec![0.0; t * h * w * mlp.out_dim];
    for (p, out) in data.chunks_exact_mut(mlp.out_dim).enumerate() {
        let (tt, rest) = (p / (h * w), p % (h * w));
        mlp.apply(grid.pixel(tt, rest / w, rest % w), &mut hidden, out);
    }
    let mapped = FeatureGrid::new(t, h, w, mlp.out_dim, data)?;
    grid_to_tokens(adaptive_avg_pool(&mapped, ph, pw)?)
}

/// Two 3x3 convolutions. Kernels are `[ky][kx][in][out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub in_channels: usize,
    pub hidden_channels: usize,
    pub out_channels: usize,
    pub k1: Vec<f64>,
    pub b1: Vec<f64>,
    pub k2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl ConvParams {
    pub fn init(in_channels: usize, hidden_channels: usize, out_channels: usize, seed: u64) -> Result<Self> {
        for (name, v) in [
            ("in_channels", in_channels),
            ("hidden_channels", hidden_channels),
            ("out_channels", out_channels),
        ] {
            ensure(v >= 1, name, || "must be >= 1".into())?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f1, f2) = (9 * in_channels, 9 * hidden_channels);
        Ok(Self {
            in_channels,
            hidden_channels,
            out_channels,
            k1: uniform_vec(&mut rng, f1 * hidden_channels, f1),
            b1: uniform_vec(&mut rng, hidden_channels, f1),
            k2: uniform_vec(&mut rng, f2 * out_channels, f2),
            b2: uniform_vec(&mut rng, out_channels, f2),
        })
    }
}

/// Same-size 3x3 convolution per frame with edge-replicated borders.
fn conv3x3(grid: &FeatureGrid, kernel: &[f64], bias: &[f64]) -> Result<FeatureGrid> {
    let [t_n, h, w, cin] = grid.dims();
    let cout = bias.len();
    let mut data = vec![0.0; t_n * h * w * cout];
    for t in 0..t_n {
        for y in 0..h {
            for x in 0..w {
                let o = ((t * h + y) * w + x) * cout;
                let out = &mut data[o..o + cout];
                out.copy_from_slice(bias);
                for ky in 0..3 {
                    let yy = (y + ky).saturating_sub(1).min(h - 1);
                    for kx in 0..3 {
                        let xx = (x + kx).saturating_sub(1).min(w - 1);
                        let px = grid.pixel(t, yy, xx);
                        let base = (ky * 3 + kx) * cin * cout;
                        for (ci, &v) in px.iter().enumerate() {
                            let row = &kernel[base + ci * cout..base + (ci + 1) * cout];
                            for (acc, &k) in out.iter_mut().zip(row) {
                                *acc += v * k;
                            }
                        }
                    }
                }
            }
        }
    }
    FeatureGrid::new(t_n, h, w, cout, data)
}

/// conv -> GELU -> conv, then adaptive average pooling. Rows = `T * h' * w'`.
pub fn conv_avgpool_resample(grid: &FeatureGrid, out_tokens_per_frame: usize, conv: &ConvParams) -> Result<TokenMatrix> {
    ensure(grid.channels() == conv.in_channels, "conv", || {
        format!("in_channels {} does not match {} channels", conv.in_channels, grid.channels())
    })?;
    let (ph, pw) = pool_target(out_tokens_per_frame, grid.height(), grid.width())?;
    let first = conv3x3(grid, &conv.k1, &conv.b1)?;
    let [t, h, w, c] = first.dims();
    let activated = FeatureGrid::new(t, h, w, c, first.into_data().into_iter().map(gelu).collect())?;
    let second = conv3x3(&activated, &conv.k2, &conv.b2)?;
    grid_to_tokens(adaptive_avg_pool(&second, ph, pw)?)
}

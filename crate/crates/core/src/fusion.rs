//! Clip feature grids, stub encoders, spatial interpolation and channel fusion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Dense `frames x height x width x channels` grid, row-major with channels fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    frames: usize,
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(frames: usize, height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        for (name, v) in [("frames", frames), ("height", height), ("width", width), ("channels", channels)] {
            ensure(v >= 1, name, || "must be >= 1".into())?;
        }
        let expected = frames * height * width * channels;
        ensure(data.len() == expected, "data", || {
            format!("length {} does not match {frames}x{height}x{width}x{channels}", data.len())
        })?;
        ensure(data.iter().all(|v| v.is_finite()), "data", || "contains non-finite values".into())?;
        Ok(Self {
            frames,
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(frames: usize, height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(frames, height, width, channels, vec![value; frames * height * width * channels])
    }

    pub fn from_fn(
        frames: usize,
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(frames * height * width * channels);
        for t in 0..frames {
            for y in 0..height {
                for x in 0..width {
                    for c in 0..channels {
                        data.push(f(t, y, x, c));
                    }
                }
            }
        }
        Self::new(frames, height, width, channels, data)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn dims(&self) -> [usize; 4] {
        [self.frames, self.height, self.width, self.channels]
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, t: usize, y: usize, x: usize, c: usize) -> usize {
        ((t * self.height + y) * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, t: usize, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.offset(t, y, x, c)]
    }

    /// The channel vector at one spatial position.
    pub fn pixel(&self, t: usize, y: usize, x: usize) -> &[f64] {
        let o = self.offset(t, y, x, 0);
        &self.data[o..o + self.channels]
    }

    /// A single frame as a one-frame grid.
    pub fn frame(&self, t: usize) -> FeatureGrid {
        let n = self.height * self.width * self.channels;
        FeatureGrid {
            frames: 1,
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data[t * n..(t + 1) * n].to_vec(),
        }
    }
}

/// Replicates a single image `n` times into a clip.
pub fn duplicate_image_to_clip(image: &FeatureGrid, n: usize) -> Result<FeatureGrid> {
    ensure(n >= 1, "n", || "clip length must be >= 1".into())?;
    ensure(image.frames == 1, "image", || format!("expected one frame, got {}", image.frames))?;
    let mut data = Vec::with_capacity(image.data.len() * n);
    for _ in 0..n {
        data.extend_from_slice(&image.data);
    }
    FeatureGrid::new(n, image.height, image.width, image.channels, data)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub name: String,
    pub clip_frames: usize,
    pub out_height: usize,
    pub out_width: usize,
    pub out_channels: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Each output frame depends only on the matching input frame (image encoders).
    FrameLocal,
    /// Output frames blend patch statistics across the whole clip (video encoders).
    TemporalMixing,
}

/// Deterministic stand-in for a pretrained vision encoder.
///
/// Every output value is `tanh(gain_c * m + bias_c + tilt_c * (y/H' + x/W'))`,
/// where `m` is the mean of the input patch that maps onto cell `(y, x)`.
/// In temporal mode `m` is a distance-weighted blend over frames plus a
/// per-frame phase, so identical frames can still yield distinct outputs.
#[derive(Debug, Clone)]
pub struct StubEncoder {
    spec: EncoderSpec,
    kind: EncoderKind,
    gain: Vec<f64>,
    bias: Vec<f64>,
    tilt: Vec<f64>,
    phase: Vec<f64>,
}

impl StubEncoder {
    pub fn new(spec: EncoderSpec, kind: EncoderKind) -> Result<Self> {
        for (name, v) in [
            ("clip_frames", spec.clip_frames),
            ("out_height", spec.out_height),
            ("out_width", spec.out_width),
            ("out_channels", spec.out_channels),
        ] {
            ensure(v >= 1, name, || "must be >= 1".into())?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let c = spec.out_channels;
        let gain = (0..c).map(|_| rng.random_range(0.5..2.0)).collect();
        let bias = (0..c).map(|_| rng.random_range(-1.0..1.0)).collect();
        let tilt = (0..c).map(|_| rng.random_range(-1.0..1.0)).collect();
        let phase = (0..spec.clip_frames).map(|_| rng.random_range(-0.5..0.5)).collect();
        Ok(Self {
            spec,
            kind,
            gain,
            bias,
            tilt,
            phase,
        })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn kind(&self) -> EncoderKind {
        self.kind
    }

    pub fn encode(&self, clip: &FeatureGrid) -> Result<FeatureGrid> {
        ensure(clip.frames == self.spec.clip_frames, "clip", || {
            format!(
                "encoder {} consumes {} frames, got {}",
                self.spec.name, self.spec.clip_frames, clip.frames
            )
        })?;
        let (oh, ow) = (self.spec.out_height, self.spec.out_width);
        let t_n = clip.frames;

        // patch means per (frame, cell)
        let mut means = vec![0.0; t_n * oh * ow];
        for t in 0..t_n {
            for y in 0..oh {
                let (y0, y1) = pool_bin(y, oh, clip.height);
                for x in 0..ow {
                    let (x0, x1) = pool_bin(x, ow, clip.width);
                    let mut sum = 0.0;
                    for yy in y0..y1 {
                        for xx in x0..x1 {
                            sum += clip.pixel(t, yy, xx).iter().sum::<f64>();
                        }
                    }
                    let count = ((y1 - y0) * (x1 - x0) * clip.channels) as f64;
                    means[(t * oh + y) * ow + x] = sum / count;
                }
            }
        }

        let moment = |t: usize, cell: usize| -> f64 {
            match self.kind {
                EncoderKind::FrameLocal => means[t * oh * ow + cell],
                EncoderKind::TemporalMixing => {
                    let (mut acc, mut wsum) = (0.0, 0.0);
                    for s in 0..t_n {
                        let w = 1.0 / (1.0 + t.abs_diff(s) as f64);
                        acc += w * means[s * oh * ow + cell];
                        wsum += w;
                    }
                    acc / wsum + self.phase[t]
                }
            }
        };

        FeatureGrid::from_fn(t_n, oh, ow, self.spec.out_channels, |t, y, x, c| {
            let m = moment(t, y * ow + x);
            let pos = y as f64 / oh as f64 + x as f64 / ow as f64;
            (self.gain[c] * m + self.bias[c] + self.tilt[c] * pos).tanh()
        })
    }
}

/// Alias matching the pipeline vocabulary.
pub fn stub_encode(encoder: &StubEncoder, clip: &FeatureGrid) -> Result<FeatureGrid> {
    encoder.encode(clip)
}

/// Adaptive-pooling bin `[floor(i*n/out), ceil((i+1)*n/out))`.
pub(crate) fn pool_bin(i: usize, out: usize, n: usize) -> (usize, usize) {
    let start = i * n / out;
    let end = ((i + 1) * n).div_ceil(out);
    (start, end.max(start + 1))
}

/// Align-corners source coordinate for output index `i`.
fn source_coord(i: usize, out: usize, src: usize) -> (usize, usize, f64) {
    if out == 1 || src == 1 {
        return (0, 0, 0.0);
    }
    let pos = (i * (src - 1)) as f64 / (out - 1) as f64;
    let lo = (pos.floor() as usize).min(src - 1);
    let hi = (lo + 1).min(src - 1);
    (lo, hi, pos - lo as f64)
}

#[inline]
fn lerp(a: f64, b: f64, f: f64) -> f64 {
    if f == 0.0 {
        a
    } else {
        a + (b - a) * f
    }
}

/// Bilinear resize of every frame and channel, align-corners convention.
pub fn interpolate_grid(g: &FeatureGrid, target_h: usize, target_w: usize) -> Result<FeatureGrid> {
    ensure(target_h >= 1, "target_h", || "must be >= 1".into())?;
    ensure(target_w >= 1, "target_w", || "must be >= 1".into())?;
    if target_h == g.height && target_w == g.width {
        return Ok(g.clone());
    }
    let ys: Vec<_> = (0..target_h).map(|i| source_coord(i, target_h, g.height)).collect();
    let xs: Vec<_> = (0..target_w).map(|i| source_coord(i, target_w, g.width)).collect();
    FeatureGrid::from_fn(g.frames, target_h, target_w, g.channels, |t, y, x, c| {
        let (y0, y1, fy) = ys[y];
        let (x0, x1, fx) = xs[x];
        let top = lerp(g.get(t, y0, x0, c), g.get(t, y0, x1, c), fx);
        let bottom = lerp(g.get(t, y1, x0, c), g.get(t, y1, x1, c), fx);
        lerp(top, bottom, fy)
    })
}

/// Stacks grids along channels in input order. All grids must share `T x H x W`.
pub fn concat_channels(grids: &[FeatureGrid]) -> Result<FeatureGrid> {
    let first = grids
        .first()
        .ok_or_else(|| Error::validation("grids", "need at least one grid"))?;
    for (i, g) in grids.iter().enumerate().skip(1) {
        ensure(
            g.frames == first.frames && g.height == first.height && g.width == first.width,
            &format!("grids[{i}]"),
            || {
                format!(
                    "shape {}x{}x{} differs from grids[0] {}x{}x{}",
                    g.frames, g.height, g.width, first.frames, first.height, first.width
                )
            },
        )?;
    }
    let channels: usize = grids.iter().map(|g| g.channels).sum();
    let positions = first.frames * first.height * first.width;
    let mut data = Vec::with_capacity(positions * channels);
    for p in 0..positions {
        for g in grids {
            data.extend_from_slice(&g.data[p * g.channels..(p + 1) * g.channels]);
        }
    }
    FeatureGrid::new(first.frames, first.height, first.width, channels, data)
}

/// Interpolates every grid to the elementwise-max spatial size, then concatenates.
pub fn fuse(grids: &[FeatureGrid]) -> Result<FeatureGrid> {
    ensure(!grids.is_empty(), "grids", || "need at least one grid".into())?;
    let h = grids.iter().map(|g| g.height).max().unwrap_or(1);
    let w = grids.iter().map(|g| g.width).max().unwrap_or(1);
    let resized = grids
        .iter()
        .map(|g| interpolate_grid(g, h, w))
        .collect::<Result<Vec<_>>>()?;
    concat_channels(&resized)
}

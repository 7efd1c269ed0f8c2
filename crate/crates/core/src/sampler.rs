//! Frame and clip planning plus the fps/tps/tpf token-budget algebra.
//!
//! Two sampling modes are supported. `FpsClips` reads clips of `clip_frames`
//! frames at a constant `target_fps`; clips are laid end to end from t = 0
//! until `max_clips` would be exceeded, after which exactly `max_clips` clips
//! are spread evenly over the video (first clip at 0, last clip ending at the
//! final second). `UniformFrames` picks `K` frames at bin centres over the
//! whole video, so `K = 1` is the centre frame.

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub duration_s: f64,
    pub native_fps: f64,
    pub frame_count: u64,
}

impl VideoMeta {
    pub fn new(duration_s: f64, native_fps: f64, frame_count: u64) -> Result<Self> {
        let meta = Self {
            duration_s,
            native_fps,
            frame_count,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.duration_s.is_finite() && self.duration_s > 0.0,
            "duration_s",
            || format!("must be > 0, got {}", self.duration_s),
        )?;
        ensure(
            self.native_fps.is_finite() && self.native_fps > 0.0,
            "native_fps",
            || format!("must be > 0, got {}", self.native_fps),
        )?;
        ensure(self.frame_count >= 1, "frame_count", || "must be >= 1".into())?;
        let expected = self.duration_s * self.native_fps;
        ensure(
            (self.frame_count as f64 - expected).abs() <= 1.0 + 1e-9,
            "frame_count",
            || {
                format!(
                    "{} is inconsistent with duration_s * native_fps = {expected}",
                    self.frame_count
                )
            },
        )
    }

    /// Duration of one native frame, used as the end-of-video tolerance.
    pub fn frame_period(&self) -> f64 {
        1.0 / self.native_fps
    }

    fn index_at(&self, t: f64) -> u64 {
        let idx = (t * self.native_fps).round();
        if idx <= 0.0 {
            0
        } else {
            (idx as u64).min(self.frame_count - 1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SamplingMode {
    FpsClips {
        target_fps: f64,
        clip_frames: u32,
        max_clips: u32,
    },
    UniformFrames {
        uniform_frames: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    #[serde(flatten)]
    pub mode: SamplingMode,
    pub tokens_per_frame: u32,
}

impl SamplingConfig {
    pub fn fps_clips(target_fps: f64, clip_frames: u32, max_clips: u32, tokens_per_frame: u32) -> Self {
        Self {
            mode: SamplingMode::FpsClips {
                target_fps,
                clip_frames,
                max_clips,
            },
            tokens_per_frame,
        }
    }

    pub fn uniform(frames: u32, tokens_per_frame: u32) -> Self {
        Self {
            mode: SamplingMode::UniformFrames {
                uniform_frames: frames,
            },
            tokens_per_frame,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.tokens_per_frame >= 1, "tokens_per_frame", || {
            "must be >= 1".into()
        })?;
        match self.mode {
            SamplingMode::FpsClips {
                target_fps,
                clip_frames,
                max_clips,
            } => {
                ensure(target_fps.is_finite() && target_fps > 0.0, "target_fps", || {
                    format!("must be > 0, got {target_fps}")
                })?;
                ensure(clip_frames >= 1, "clip_frames", || "must be >= 1".into())?;
                ensure(max_clips >= 1, "max_clips", || "must be >= 1".into())
            }
            SamplingMode::UniformFrames { uniform_frames } => {
                ensure(uniform_frames >= 1, "uniform_frames", || "must be >= 1".into())
            }
        }
    }

    /// Frames per clip in this mode (`K` for the uniform pseudo-clip).
    pub fn frames_per_clip(&self) -> u32 {
        match self.mode {
            SamplingMode::FpsClips { clip_frames, .. } => clip_frames,
            SamplingMode::UniformFrames { uniform_frames } => uniform_frames,
        }
    }
}

impl Default for SamplingConfig {
    /// fps 2, 4-frame clips, 25 clips, 16 tokens per frame.
    fn default() -> Self {
        Self::fps_clips(2.0, 4, 25, 16)
    }
}

fn six_digits<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    let raw = RawValue::from_string(format!("{v:.6}")).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub index: u32,
    #[serde(serialize_with = "six_digits")]
    pub start_s: f64,
    #[serde(serialize_with = "six_digits")]
    pub end_s: f64,
    pub frame_indices: Vec<u64>,
    pub start_label: String,
    pub end_label: String,
}

impl ClipSpec {
    fn new(index: u32, start_s: f64, end_s: f64, frame_indices: Vec<u64>) -> Result<Self> {
        Ok(Self {
            index,
            start_s,
            end_s,
            frame_indices,
            start_label: format_timestamp(start_s)?,
            end_label: format_timestamp(end_s)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanFlag {
    /// The video is shorter than one clip; frame times past the end were clamped.
    ShortVideo,
    /// More uniform frames were requested than exist; duplicates were dropped.
    FramesDeduplicated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub meta: VideoMeta,
    pub config: SamplingConfig,
    pub clips: Vec<ClipSpec>,
    pub raw_token_count: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<PlanFlag>,
}

impl SamplingPlan {
    fn assemble(meta: VideoMeta, config: SamplingConfig, clips: Vec<ClipSpec>, flags: Vec<PlanFlag>) -> Self {
        let frames: u64 = clips.iter().map(|c| c.frame_indices.len() as u64).sum();
        Self {
            meta,
            config,
            raw_token_count: frames * config.tokens_per_frame as u64,
            clips,
            flags,
        }
    }

    /// Checks every structural invariant; used after deserialising a plan.
    pub fn validate(&self) -> Result<()> {
        self.meta.validate()?;
        self.config.validate()?;
        ensure(!self.clips.is_empty(), "clips", || "plan has no clips".into())?;
        let eps = self.meta.frame_period() + 1e-9;
        let mut prev_end = f64::NEG_INFINITY;
        let fps_mode = matches!(self.config.mode, SamplingMode::FpsClips { .. });
        for (i, clip) in self.clips.iter().enumerate() {
            let field = format!("clips[{i}]");
            ensure(clip.index as usize == i, &field, || format!("index {} out of order", clip.index))?;
            ensure(
                clip.start_s >= 0.0 && clip.start_s < clip.end_s && clip.end_s <= self.meta.duration_s + eps,
                &field,
                || format!("span [{}, {}) outside the video", clip.start_s, clip.end_s),
            )?;
            if fps_mode {
                ensure(clip.start_s >= prev_end - 1e-9, &field, || "overlaps previous clip".into())?;
            }
            prev_end = clip.end_s;
            ensure(
                clip.frame_indices.windows(2).all(|w| w[0] <= w[1]),
                &field,
                || "frame indices decrease".into(),
            )?;
            ensure(
                clip.frame_indices.iter().all(|&f| f < self.meta.frame_count),
                &field,
                || "frame index beyond frame_count".into(),
            )?;
        }
        let frames: u64 = self.clips.iter().map(|c| c.frame_indices.len() as u64).sum();
        ensure(
            self.raw_token_count == frames * self.config.tokens_per_frame as u64,
            "raw_token_count",
            || "does not equal frames * tokens_per_frame".into(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(s)?;
        plan.validate()?;
        Ok(plan)
    }
}

/// Dispatches on the configured mode.
pub fn plan(meta: VideoMeta, config: SamplingConfig) -> Result<SamplingPlan> {
    match config.mode {
        SamplingMode::FpsClips { .. } => plan_fps_clips(meta, config),
        SamplingMode::UniformFrames { uniform_frames } => {
            plan_uniform(meta, uniform_frames, config.tokens_per_frame)
        }
    }
}

/// Number of whole clips of length `clip_s` that fit in the video.
fn whole_clips(duration_s: f64, clip_s: f64) -> u64 {
    ((duration_s / clip_s) + 1e-9).floor() as u64
}

pub fn plan_fps_clips(meta: VideoMeta, config: SamplingConfig) -> Result<SamplingPlan> {
    meta.validate()?;
    config.validate()?;
    let SamplingMode::FpsClips {
        target_fps,
        clip_frames,
        max_clips,
    } = config.mode
    else {
        return Err(Error::validation("mode", "plan_fps_clips needs fps_clips mode"));
    };

    let clip_s = clip_frames as f64 / target_fps;
    let frames_from = |start: f64| -> Vec<u64> {
        (0..clip_frames)
            .map(|j| meta.index_at(start + j as f64 / target_fps))
            .collect()
    };

    if meta.duration_s < clip_s - 1e-9 {
        let clip = ClipSpec::new(0, 0.0, meta.duration_s, frames_from(0.0))?;
        return Ok(SamplingPlan::assemble(meta, config, vec![clip], vec![PlanFlag::ShortVideo]));
    }

    let n_full = whole_clips(meta.duration_s, clip_s);
    let starts: Vec<f64> = if n_full <= max_clips as u64 {
        (0..n_full.max(1)).map(|i| i as f64 * clip_s).collect()
    } else if max_clips == 1 {
        vec![(meta.duration_s - clip_s) / 2.0]
    } else {
        let step = (meta.duration_s - clip_s) / (max_clips - 1) as f64;
        (0..max_clips).map(|i| i as f64 * step).collect()
    };

    let clips = starts
        .into_iter()
        .enumerate()
        .map(|(i, start)| ClipSpec::new(i as u32, start, start + clip_s, frames_from(start)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SamplingPlan::assemble(meta, config, clips, Vec::new()))
}

/// One pseudo-clip of `frames` bin-centre indices `floor((i + 1/2) * F / K)`.
pub fn plan_uniform(meta: VideoMeta, frames: u32, tokens_per_frame: u32) -> Result<SamplingPlan> {
    meta.validate()?;
    let config = SamplingConfig::uniform(frames, tokens_per_frame);
    config.validate()?;

    let k = frames as u64;
    let f = meta.frame_count;
    let mut indices: Vec<u64> = (0..k).map(|i| ((2 * i + 1) * f) / (2 * k)).collect();
    let mut flags = Vec::new();
    if k > f {
        indices.dedup();
        flags.push(PlanFlag::FramesDeduplicated);
    }
    let clip = ClipSpec::new(0, 0.0, meta.duration_s, indices)?;
    Ok(SamplingPlan::assemble(meta, config, vec![clip], flags))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenBudget {
    pub fps: f64,
    pub tpf: u32,
    pub tps: f64,
    pub tokens_per_clip: u64,
    pub total_raw_tokens: u64,
}

/// In uniform mode the effective fps is `K / duration`.
pub fn token_budget(plan: &SamplingPlan) -> Result<TokenBudget> {
    plan.validate()?;
    let tpf = plan.config.tokens_per_frame;
    let fps = match plan.config.mode {
        SamplingMode::FpsClips { target_fps, .. } => target_fps,
        SamplingMode::UniformFrames { .. } => plan.clips[0].frame_indices.len() as f64 / plan.meta.duration_s,
    };
    Ok(TokenBudget {
        fps,
        tpf,
        tps: fps * tpf as f64,
        tokens_per_clip: plan.config.frames_per_clip() as u64 * tpf as u64,
        total_raw_tokens: plan.raw_token_count,
    })
}

/// Renders seconds as `MM:SS`. Minutes are not wrapped into hours.
pub fn format_timestamp(t: f64) -> Result<String> {
    ensure(t.is_finite() && t >= 0.0, "timestamp", || {
        format!("must be a non-negative number of seconds, got {t}")
    })?;
    let whole = t.floor() as u64;
    Ok(format!("{:02}:{:02}", whole / 60, whole % 60))
}

//! Prompt layouts for mixing clip tokens into the text sequence.
//!
//! Per clip, each strategy emits:
//!
//! | strategy        | pieces                                                        |
//! |-----------------|---------------------------------------------------------------|
//! | `Direct`        | `<vid_token>*n`                                               |
//! | `SepTokens`     | `<vid_start><vid_token>*n<vid_end>`                           |
//! | `Timestamp`     | `clip from MM:SS-MM:SS:<vid_token>*n`                         |
//! | `TimestampSep`  | `clip from MM:SS-MM:SS:<vid_start><vid_token>*n<vid_end>`     |
//!
//! Clips are concatenated with no separator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::sampler::{format_timestamp, SamplingPlan};

pub const VID_TOKEN: &str = "<vid_token>";
pub const VID_START: &str = "<vid_start>";
pub const VID_END: &str = "<vid_end>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationStrategy {
    Direct,
    SepTokens,
    Timestamp,
    TimestampSep,
}

impl IntegrationStrategy {
    pub const ALL: [IntegrationStrategy; 4] = [
        IntegrationStrategy::Direct,
        IntegrationStrategy::SepTokens,
        IntegrationStrategy::Timestamp,
        IntegrationStrategy::TimestampSep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IntegrationStrategy::Direct => "direct",
            IntegrationStrategy::SepTokens => "sep_tokens",
            IntegrationStrategy::Timestamp => "timestamp",
            IntegrationStrategy::TimestampSep => "timestamp_sep",
        }
    }

    fn separators(self) -> bool {
        matches!(self, IntegrationStrategy::SepTokens | IntegrationStrategy::TimestampSep)
    }

    fn timestamps(self) -> bool {
        matches!(self, IntegrationStrategy::Timestamp | IntegrationStrategy::TimestampSep)
    }
}

impl fmt::Display for IntegrationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntegrationStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "direct" => Ok(IntegrationStrategy::Direct),
            "sep" | "sep_tokens" => Ok(IntegrationStrategy::SepTokens),
            "timestamp" => Ok(IntegrationStrategy::Timestamp),
            "timestamp_sep" => Ok(IntegrationStrategy::TimestampSep),
            _ => Err(Error::validation(
                "strategy",
                format!("unknown strategy {s:?}; expected direct, sep_tokens, timestamp or timestamp_sep"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialToken {
    VidStart,
    VidEnd,
}

impl SpecialToken {
    pub fn placeholder(self) -> &'static str {
        match self {
            SpecialToken::VidStart => VID_START,
            SpecialToken::VidEnd => VID_END,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PromptPiece {
    Text { text: String },
    VideoTokens { clip_index: u32, count: u32 },
    Special { name: SpecialToken },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub pieces: Vec<PromptPiece>,
    pub text: String,
}

fn timestamp_prefix(start_s: f64, end_s: f64) -> Result<String> {
    Ok(format!("clip from {}-{}:", format_timestamp(start_s)?, format_timestamp(end_s)?))
}

pub fn render(plan: &SamplingPlan, strategy: IntegrationStrategy, tokens_per_clip: u32) -> Result<RenderedPrompt> {
    ensure(tokens_per_clip >= 1, "tokens_per_clip", || "must be >= 1".into())?;
    ensure(!plan.clips.is_empty(), "plan", || "has no clips".into())?;
    let mut pieces = Vec::with_capacity(plan.clips.len() * 4);
    for clip in &plan.clips {
        if strategy.timestamps() {
            pieces.push(PromptPiece::Text {
                text: timestamp_prefix(clip.start_s, clip.end_s)?,
            });
        }
        if strategy.separators() {
            pieces.push(PromptPiece::Special {
                name: SpecialToken::VidStart,
            });
        }
        pieces.push(PromptPiece::VideoTokens {
            clip_index: clip.index,
            count: tokens_per_clip,
        });
        if strategy.separators() {
            pieces.push(PromptPiece::Special {
                name: SpecialToken::VidEnd,
            });
        }
    }
    let text = flatten(&pieces);
    Ok(RenderedPrompt { pieces, text })
}

pub fn flatten(pieces: &[PromptPiece]) -> String {
    let mut out = String::new();
    for piece in pieces {
        match piece {
            PromptPiece::Text { text } => out.push_str(text),
            PromptPiece::VideoTokens { count, .. } => {
                for _ in 0..*count {
                    out.push_str(VID_TOKEN);
                }
            }
            PromptPiece::Special { name } => out.push_str(name.placeholder()),
        }
    }
    out
}

/// Recovers the piece list from a flat template. Runs of `<vid_token>` are
/// split into consecutive clips of `tokens_per_clip` each.
pub fn parse(flat: &str, tokens_per_clip: u32) -> Result<Vec<PromptPiece>> {
    ensure(tokens_per_clip >= 1, "tokens_per_clip", || "must be >= 1".into())?;
    let mut pieces = Vec::new();
    let mut text = String::new();
    let mut run = 0u32;
    let mut clip = 0u32;
    let mut rest = flat;

    let flush_text = |text: &mut String, pieces: &mut Vec<PromptPiece>| {
        if !text.is_empty() {
            pieces.push(PromptPiece::Text {
                text: std::mem::take(text),
            });
        }
    };
    let flush_run = |run: &mut u32, clip: &mut u32, pieces: &mut Vec<PromptPiece>| -> Result<()> {
        if *run == 0 {
            return Ok(());
        }
        ensure((*run).is_multiple_of(tokens_per_clip), "template", || {
            format!("run of {run} video tokens is not a multiple of {tokens_per_clip}")
        })?;
        for _ in 0..*run / tokens_per_clip {
            pieces.push(PromptPiece::VideoTokens {
                clip_index: *clip,
                count: tokens_per_clip,
            });
            *clip += 1;
        }
        *run = 0;
        Ok(())
    };

    while !rest.is_empty() {
        if let Some(r) = rest.strip_prefix(VID_TOKEN) {
            flush_text(&mut text, &mut pieces);
            run += 1;
            rest = r;
            continue;
        }
        let special = [SpecialToken::VidStart, SpecialToken::VidEnd]
            .into_iter()
            .find(|s| rest.starts_with(s.placeholder()));
        if let Some(name) = special {
            flush_text(&mut text, &mut pieces);
            flush_run(&mut run, &mut clip, &mut pieces)?;
            pieces.push(PromptPiece::Special { name });
            rest = &rest[name.placeholder().len()..];
            continue;
        }
        flush_run(&mut run, &mut clip, &mut pieces)?;
        let ch = rest.chars().next().expect("non-empty");
        text.push(ch);
        rest = &rest[ch.len_utf8()..];
    }
    flush_text(&mut text, &mut pieces);
    flush_run(&mut run, &mut clip, &mut pieces)?;
    Ok(pieces)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub video: u64,
    pub special: u64,
    pub text_pieces: u64,
    pub text_chars: u64,
}

pub fn count_tokens(pieces: &[PromptPiece]) -> TokenCounts {
    pieces.iter().fold(TokenCounts::default(), |mut acc, p| {
        match p {
            PromptPiece::Text { text } => {
                acc.text_pieces += 1;
                acc.text_chars += text.chars().count() as u64;
            }
            PromptPiece::VideoTokens { count, .. } => acc.video += *count as u64,
            PromptPiece::Special { .. } => acc.special += 1,
        }
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{plan_fps_clips, SamplingConfig, VideoMeta};

    fn plan(duration: f64) -> SamplingPlan {
        let meta = VideoMeta::new(duration, 30.0, (duration * 30.0) as u64).unwrap();
        plan_fps_clips(meta, SamplingConfig::fps_clips(2.0, 4, 25, 16)).unwrap()
    }

    #[test]
    fn single_clip_formats() {
        let p = plan(2.0);
        assert_eq!(
            render(&p, IntegrationStrategy::Timestamp, 2).unwrap().text,
            "clip from 00:00-00:02:<vid_token><vid_token>"
        );
        assert_eq!(render(&p, IntegrationStrategy::Direct, 1).unwrap().text, "<vid_token>");
    }

    #[test]
    fn two_clips_with_separators() {
        let p = plan(4.0);
        assert_eq!(
            render(&p, IntegrationStrategy::SepTokens, 1).unwrap().text,
            "<vid_start><vid_token><vid_end><vid_start><vid_token><vid_end>"
        );
    }

    #[test]
    fn counts() {
        let p = plan(6.0);
        let direct = render(&p, IntegrationStrategy::Direct, 32).unwrap();
        assert_eq!(
            count_tokens(&direct.pieces),
            TokenCounts {
                video: 96,
                ..Default::default()
            }
        );
        let sep = render(&p, IntegrationStrategy::SepTokens, 32).unwrap();
        assert_eq!(count_tokens(&sep.pieces).special, 6);
        assert_eq!(count_tokens(&[]), TokenCounts::default());
    }

    #[test]
    fn zero_tokens_rejected() {
        assert!(render(&plan(2.0), IntegrationStrategy::Direct, 0).is_err());
    }

    #[test]
    fn parse_inverts_render() {
        let p = plan(9.0);
        for s in IntegrationStrategy::ALL {
            for tpc in [1, 3] {
                let r = render(&p, s, tpc).unwrap();
                assert_eq!(parse(&r.text, tpc).unwrap(), r.pieces, "{s}");
            }
        }
        assert!(parse("<vid_token><vid_token>", 3).is_err());
    }

    #[test]
    fn strategy_names() {
        for s in IntegrationStrategy::ALL {
            assert_eq!(s.name().parse::<IntegrationStrategy>().unwrap(), s);
        }
        assert_eq!("timestamp-sep".parse::<IntegrationStrategy>().unwrap(), IntegrationStrategy::TimestampSep);
        assert!("nope".parse::<IntegrationStrategy>().is_err());
    }
}

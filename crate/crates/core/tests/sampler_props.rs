use apollokit::integrator::{count_tokens, render, IntegrationStrategy, PromptPiece};
use apollokit::sampler::{format_timestamp, plan, plan_fps_clips, plan_uniform, token_budget};
use apollokit::{SamplingConfig, SamplingPlan, VideoMeta};
use proptest::prelude::*;

fn meta_strategy() -> impl Strategy<Value = VideoMeta> {
    (0.1f64..7200.0, prop::sample::select(vec![23.976, 24.0, 25.0, 30.0, 60.0])).prop_map(|(d, fps)| {
        VideoMeta::new(d, fps, ((d * fps).round() as u64).max(1)).unwrap()
    })
}

fn fps_config() -> impl Strategy<Value = SamplingConfig> {
    (0.25f64..8.0, 1u32..=32, 1u32..=64, 1u32..=64)
        .prop_map(|(fps, n, max, tpf)| SamplingConfig::fps_clips(fps, n, max, tpf))
}

fn fps_plan() -> impl Strategy<Value = SamplingPlan> {
    (meta_strategy(), fps_config()).prop_map(|(m, c)| plan_fps_clips(m, c).unwrap())
}

proptest! {
    #[test]
    fn clips_are_ordered_and_contained(p in fps_plan()) {
        prop_assert!(p.validate().is_ok());
        for w in p.clips.windows(2) {
            prop_assert!(w[0].start_s <= w[1].start_s);
            prop_assert!(w[0].end_s <= w[1].start_s + 1e-9, "overlap {} > {}", w[0].end_s, w[1].start_s);
        }
        for c in &p.clips {
            prop_assert!(c.frame_indices.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(c.frame_indices.iter().all(|&i| i < p.meta.frame_count));
        }
        let frames: u64 = p.clips.iter().map(|c| c.frame_indices.len() as u64).sum();
        prop_assert_eq!(p.raw_token_count, frames * p.config.tokens_per_frame as u64);
    }

    #[test]
    fn budget_identity(p in fps_plan()) {
        let b = token_budget(&p).unwrap();
        prop_assert_eq!(b.tps, b.fps * b.tpf as f64);
        prop_assert_eq!(b.total_raw_tokens, p.clips.len() as u64 * b.tokens_per_clip);
    }

    #[test]
    fn json_round_trip(p in fps_plan()) {
        let json = p.to_json().unwrap();
        let back = SamplingPlan::from_json(&json).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), json);
        prop_assert_eq!(back.clips.len(), p.clips.len());
    }

    #[test]
    fn uniform_indices_in_range(m in meta_strategy(), k in 1u32..500, tpf in 1u32..32) {
        let p = plan_uniform(m, k, tpf).unwrap();
        let idx = &p.clips[0].frame_indices;
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(idx.iter().all(|&i| i < m.frame_count));
        prop_assert_eq!(idx.len() as u64, (k as u64).min(m.frame_count));
    }

    #[test]
    fn render_conserves_tokens_and_timestamps(p in fps_plan(), tpc in 1u32..64, s in 0usize..4) {
        let strategy = IntegrationStrategy::ALL[s];
        let r = render(&p, strategy, tpc).unwrap();
        prop_assert_eq!(count_tokens(&r.pieces).video, p.clips.len() as u64 * tpc as u64);
        let prefixes: Vec<&String> = r.pieces.iter().filter_map(|x| match x {
            PromptPiece::Text { text } => Some(text),
            _ => None,
        }).collect();
        if matches!(strategy, IntegrationStrategy::Timestamp | IntegrationStrategy::TimestampSep) {
            prop_assert_eq!(prefixes.len(), p.clips.len());
            for (c, t) in p.clips.iter().zip(prefixes) {
                let want = format!(
                    "clip from {}-{}:",
                    format_timestamp(c.start_s).unwrap(),
                    format_timestamp(c.end_s).unwrap()
                );
                prop_assert_eq!(t, &want);
            }
        } else {
            prop_assert!(prefixes.is_empty());
        }
    }
}

#[test]
fn uniform_single_frame_is_centre() {
    for f in [2u64, 10, 300, 9000] {
        let m = VideoMeta::new(f as f64 / 30.0, 30.0, f).unwrap();
        let p = plan(m, SamplingConfig::uniform(1, 16)).unwrap();
        assert_eq!(p.clips[0].frame_indices, [f / 2]);
    }
}

#[test]
fn spec_examples() {
    let p = plan_fps_clips(VideoMeta::new(300.0, 30.0, 9000).unwrap(), SamplingConfig::default()).unwrap();
    assert_eq!(p.clips.len(), 25);
    assert_eq!(p.clips[0].start_s, 0.0);
    assert!((p.clips[24].start_s - 298.0).abs() < 1e-9);
    assert_eq!(p.clips[24].start_label, "04:58");
    let u = plan_uniform(VideoMeta::new(10.0, 30.0, 300).unwrap(), 3, 16).unwrap();
    assert_eq!(u.clips[0].frame_indices, [50, 150, 250]);
    assert_eq!(format_timestamp(3900.0).unwrap(), "65:00");
}

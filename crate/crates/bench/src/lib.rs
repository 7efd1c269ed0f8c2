//! Seeded input generators shared by the benchmarks.

use apollokit::benchcraft::{EvalRecord, Modality};
use apollokit::scalelab::{RunMatrix, RunRow};
use apollokit::{FeatureGrid, TokenMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn grid(frames: usize, height: usize, width: usize, channels: usize, seed: u64) -> FeatureGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..frames * height * width * channels).map(|_| rng.random_range(-1.0..1.0)).collect();
    FeatureGrid::new(frames, height, width, channels, data).expect("sizes are consistent")
}

pub fn tokens(rows: usize, dim: usize, seed: u64) -> TokenMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TokenMatrix::new(rows, dim, (0..rows * dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .expect("sizes are consistent")
}

/// `questions x models x 3` records with random correctness.
pub fn eval_records(questions: usize, models: usize, seed: u64) -> Vec<EvalRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(questions * models * 3);
    for q in 0..questions {
        for m in 0..models {
            for modality in Modality::ALL {
                out.push(EvalRecord {
                    benchmark: "bench".into(),
                    question_id: format!("q{q:06}"),
                    category: "Perception".into(),
                    model: format!("model{m:02}"),
                    modality,
                    correct: rng.random_bool(0.4),
                });
            }
        }
    }
    out
}

/// Correlated scores for `variants` design variants at each size.
pub fn run_matrix(variants: u32, sizes: &[f64], seed: u64) -> RunMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f64> = (0..variants).map(|_| rng.random_range(30.0..60.0)).collect();
    let rows = sizes.iter().flat_map(|&size| {
        let noise: Vec<f64> = (0..variants).map(|_| rng.random_range(-2.0..2.0)).collect();
        base.iter().zip(noise).enumerate().map(move |(i, (b, n))| RunRow {
            variant_id: i as u32 + 1,
            llm_size_b: size,
            score: b + n + size,
            descriptor: None,
        }).collect::<Vec<_>>()
    });
    RunMatrix::from_rows(rows).expect("generated rows are valid")
}

//! Scaling consistency: do design decisions made on a small LLM transfer to a
//! larger one?
//!
//! Design variants are evaluated at several LLM sizes. High R² between the
//! scores at two sizes means the smaller size is a faithful proxy.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::stats::{least_squares_line, r_squared};

/// Sizes closer than this are treated as the same column.
const SIZE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignVariant {
    pub variant_id: u32,
    #[serde(default)]
    pub descriptor: String,
}

/// One CSV row: the average benchmark score of a variant at one LLM size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub variant_id: u32,
    pub llm_size_b: f64,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptor: Option<String>,
}

/// Variants × LLM sizes. Columns are kept sorted by size.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMatrix {
    variants: BTreeMap<u32, DesignVariant>,
    columns: Vec<(f64, BTreeMap<u32, f64>)>,
}

impl RunMatrix {
    pub fn from_rows(rows: impl IntoIterator<Item = RunRow>) -> Result<Self> {
        let mut m = RunMatrix {
            variants: BTreeMap::new(),
            columns: Vec::new(),
        };
        for (i, r) in rows.into_iter().enumerate() {
            let at = |f: &str| format!("rows[{i}].{f}");
            ensure(r.variant_id >= 1, &at("variant_id"), || "must be positive".into())?;
            ensure(r.llm_size_b.is_finite() && r.llm_size_b > 0.0, &at("llm_size_b"), || {
                format!("{} is not a positive size", r.llm_size_b)
            })?;
            ensure(r.score.is_finite(), &at("score"), || "must be finite".into())?;
            let v = m.variants.entry(r.variant_id).or_insert_with(|| DesignVariant {
                variant_id: r.variant_id,
                descriptor: String::new(),
            });
            if let Some(d) = r.descriptor.filter(|d| !d.is_empty()) {
                ensure(v.descriptor.is_empty() || v.descriptor == d, &at("descriptor"), || {
                    format!("variant {} already described as {:?}", r.variant_id, v.descriptor)
                })?;
                v.descriptor = d;
            }
            let col = match m.column_index(r.llm_size_b) {
                Some(c) => c,
                None => {
                    let pos = m.columns.partition_point(|(s, _)| *s < r.llm_size_b);
                    m.columns.insert(pos, (r.llm_size_b, BTreeMap::new()));
                    pos
                }
            };
            let prev = m.columns[col].1.insert(r.variant_id, r.score);
            ensure(prev.is_none(), &at("variant_id"), || {
                format!("variant {} appears twice at {}B", r.variant_id, r.llm_size_b)
            })?;
        }
        Ok(m)
    }

    pub fn from_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<RunRow>, _>>()?;
        Self::from_rows(rows)
    }

    pub fn variants(&self) -> impl Iterator<Item = &DesignVariant> {
        self.variants.values()
    }

    /// Sizes in ascending order.
    pub fn sizes(&self) -> Vec<f64> {
        self.columns.iter().map(|(s, _)| *s).collect()
    }

    pub fn score(&self, variant_id: u32, size: f64) -> Option<f64> {
        let c = self.column_index(size)?;
        self.columns[c].1.get(&variant_id).copied()
    }

    fn column_index(&self, size: f64) -> Option<usize> {
        self.columns.iter().position(|(s, _)| (s - size).abs() <= SIZE_EPS)
    }

    fn column(&self, size: f64) -> Result<&BTreeMap<u32, f64>> {
        self.column_index(size)
            .map(|c| &self.columns[c].1)
            .ok_or_else(|| Error::validation("size", format!("no column for {size}B")))
    }

    /// Paired scores over variants present in both columns, by variant id.
    pub fn shared(&self, size_a: f64, size_b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (a, b) = (self.column(size_a)?, self.column(size_b)?);
        Ok(a.iter().filter_map(|(id, &x)| b.get(id).map(|&y| (x, y))).unzip())
    }
}

/// R² between two size columns. `Ok(None)` when either column has zero variance.
pub fn pairwise_r2(matrix: &RunMatrix, size_a: f64, size_b: f64) -> Result<Option<f64>> {
    let (x, y) = matrix.shared(size_a, size_b)?;
    ensure(x.len() >= 3, "variants", || {
        format!("{size_a}B and {size_b}B share {} variants, need >= 3", x.len())
    })?;
    Ok(r_squared(&x, &y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub size: f64,
    pub r2: Option<f64>,
}

/// R² of every other size against `reference`, ascending by size.
pub fn r2_vs_size_curve(matrix: &RunMatrix, reference: f64) -> Result<Vec<CurvePoint>> {
    matrix.column(reference)?;
    let others: Vec<f64> = matrix
        .sizes()
        .into_iter()
        .filter(|s| (s - reference).abs() > SIZE_EPS)
        .collect();
    ensure(!others.is_empty(), "sizes", || "need at least one size besides the reference".into())?;
    others
        .into_iter()
        .map(|size| {
            Ok(CurvePoint {
                size,
                r2: pairwise_r2(matrix, size, reference)?,
            })
        })
        .collect()
}

/// R² for every pair of sizes that are both at least `min_proxy`, plotted at
/// the larger size of the pair, ascending by (larger, smaller).
///
/// This pools all proxy/target relationships rather than fixing a single
/// reference, so the extrapolated value reads as "how well does the next
/// size down predict a model this large".
pub fn transfer_curve(matrix: &RunMatrix, min_proxy: f64) -> Result<Vec<CurvePoint>> {
    let sizes: Vec<f64> = matrix.sizes().into_iter().filter(|&s| s >= min_proxy - SIZE_EPS).collect();
    ensure(sizes.len() >= 2, "min_proxy", || {
        format!("only {} sizes are >= {min_proxy}B", sizes.len())
    })?;
    let mut out = Vec::new();
    for (j, &big) in sizes.iter().enumerate() {
        for &small in &sizes[..j] {
            out.push(CurvePoint {
                size: big,
                r2: pairwise_r2(matrix, small, big)?,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub target_size: f64,
    pub predicted: f64,
}

impl LogLinearFit {
    /// Unclamped value of the fitted line.
    pub fn line(&self, size: f64) -> f64 {
        self.slope * size.log10() + self.intercept
    }
}

/// Least squares of R² against log10(size), evaluated at `target_size` and
/// clamped to [0, 1].
pub fn loglinear_fit_and_extrapolate(curve: &[CurvePoint], target_size: f64) -> Result<LogLinearFit> {
    ensure(target_size.is_finite() && target_size > 0.0, "target_size", || {
        format!("{target_size} is not a positive size")
    })?;
    let mut xs = Vec::with_capacity(curve.len());
    let mut ys = Vec::with_capacity(curve.len());
    for (i, p) in curve.iter().enumerate() {
        ensure(p.size.is_finite() && p.size > 0.0, &format!("curve[{i}].size"), || {
            format!("{} is not a positive size", p.size)
        })?;
        let r2 = p
            .r2
            .ok_or_else(|| Error::validation(format!("curve[{i}].r2"), "undefined (zero variance)"))?;
        xs.push(p.size.log10());
        ys.push(r2);
    }
    ensure(curve.len() >= 2, "curve", || format!("need >= 2 points, got {}", curve.len()))?;
    let (slope, intercept) = least_squares_line(&xs, &ys)
        .ok_or_else(|| Error::validation("curve", "all sizes are identical"))?;
    let fit = LogLinearFit {
        slope,
        intercept,
        target_size,
        predicted: 0.0,
    };
    Ok(LogLinearFit {
        predicted: fit.line(target_size).clamp(0.0, 1.0),
        ..fit
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRun {
    pub dataset_size: u64,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatasetPoint {
    pub dataset_size: u64,
    pub r2: Option<f64>,
}

/// R² of each run's per-variant scores against `reference`, ascending by
/// dataset size (ties keep input order).
pub fn dataset_size_curve(runs: &[DatasetRun], reference: &[f64]) -> Result<Vec<DatasetPoint>> {
    ensure(reference.len() >= 3, "reference", || {
        format!("need >= 3 variants, got {}", reference.len())
    })?;
    let mut out = runs
        .iter()
        .enumerate()
        .map(|(i, run)| {
            ensure(run.scores.len() == reference.len(), &format!("runs[{i}].scores"), || {
                format!("has {} variants, reference has {}", run.scores.len(), reference.len())
            })?;
            Ok(DatasetPoint {
                dataset_size: run.dataset_size,
                r2: r_squared(&run.scores, reference),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|p| p.dataset_size);
    Ok(out)
}

pub const MIXTURE_MODALITIES: [&str; 4] = ["text", "image", "multi_image", "video"];

/// Sample shares of a fine-tuning corpus, as fractions of one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureFractions {
    pub text: f64,
    pub image: f64,
    pub multi_image: f64,
    pub video: f64,
}

impl MixtureFractions {
    pub fn new(text: f64, image: f64, multi_image: f64, video: f64) -> Self {
        Self {
            text,
            image,
            multi_image,
            video,
        }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.text, self.image, self.multi_image, self.video]
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.to_array();
        for (name, f) in MIXTURE_MODALITIES.iter().zip(a) {
            ensure(f.is_finite() && (0.0..=1.0).contains(&f), &format!("fractions.{name}"), || {
                format!("{f} is outside [0, 1]")
            })?;
        }
        let sum: f64 = a.iter().sum();
        ensure((sum - 1.0).abs() <= 1e-9, "fractions", || format!("sum to {sum}, expected 1"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureCounts {
    pub text: u64,
    pub image: u64,
    pub multi_image: u64,
    pub video: u64,
}

impl MixtureCounts {
    pub fn to_array(self) -> [u64; 4] {
        [self.text, self.image, self.multi_image, self.video]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixturePlan {
    pub total: u64,
    pub fractions: MixtureFractions,
    pub counts: MixtureCounts,
}

/// Largest-remainder apportionment of `total` samples. Ties go to the
/// modality listed first (text, image, multi_image, video).
pub fn plan_data_mixture(total: u64, fractions: MixtureFractions) -> Result<MixturePlan> {
    ensure(total >= 1, "total", || "must be >= 1".into())?;
    fractions.validate()?;
    let quotas = fractions.to_array().map(|f| total as f64 * f);
    // the epsilon keeps 1000 × 0.15 = 149.99999999999997 from flooring to 149
    let mut counts = quotas.map(|q| (q + 1e-9).floor() as u64);
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - counts[a] as f64, quotas[b] - counts[b] as f64);
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    let [text, image, multi_image, video] = counts;
    Ok(MixturePlan {
        total,
        fractions,
        counts: MixtureCounts {
            text,
            image,
            multi_image,
            video,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(columns: &[(f64, &[f64])]) -> RunMatrix {
        let rows = columns.iter().flat_map(|&(size, scores)| {
            scores.iter().enumerate().map(move |(i, &score)| RunRow {
                variant_id: i as u32 + 1,
                llm_size_b: size,
                score,
                descriptor: None,
            })
        });
        RunMatrix::from_rows(rows).unwrap()
    }

    const A: [f64; 5] = [40.0, 42.5, 47.0, 51.0, 44.0];

    #[test]
    fn self_and_sign() {
        let neg: Vec<f64> = A.iter().map(|x| -x).collect();
        let m = matrix(&[(1.0, &A), (2.0, &neg)]);
        assert_eq!(pairwise_r2(&m, 1.0, 1.0).unwrap(), Some(1.0));
        assert!((pairwise_r2(&m, 1.0, 2.0).unwrap().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_is_undefined() {
        let m = matrix(&[(1.0, &A), (2.0, &[5.0; 5])]);
        assert_eq!(pairwise_r2(&m, 1.0, 2.0).unwrap(), None);
        let curve = r2_vs_size_curve(&m, 2.0).unwrap();
        assert_eq!(curve[0].r2, None);
        assert!(loglinear_fit_and_extrapolate(&curve, 10.0).is_err());
    }

    #[test]
    fn too_few_shared_variants() {
        let m = matrix(&[(1.0, &A[..2]), (2.0, &A)]);
        assert!(pairwise_r2(&m, 1.0, 2.0).is_err());
        assert!(pairwise_r2(&m, 1.0, 3.0).is_err());
    }

    #[test]
    fn matrix_validation() {
        let row = |id, size| RunRow {
            variant_id: id,
            llm_size_b: size,
            score: 1.0,
            descriptor: None,
        };
        assert!(RunMatrix::from_rows([row(1, 1.0), row(1, 1.0)]).is_err());
        assert!(RunMatrix::from_rows([row(0, 1.0)]).is_err());
        assert!(RunMatrix::from_rows([row(1, 0.0)]).is_err());
        let m = RunMatrix::from_rows([row(1, 7.0), row(1, 0.5), row(2, 4.0)]).unwrap();
        assert_eq!(m.sizes(), [0.5, 4.0, 7.0]);
    }

    #[test]
    fn one_point_curve_and_duplicate_reference() {
        let m = matrix(&[(1.0, &A), (7.0, &A)]);
        let c = r2_vs_size_curve(&m, 7.0).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].r2, pairwise_r2(&m, 1.0, 7.0).unwrap());
        assert!((c[0].r2.unwrap() - 1.0).abs() < 1e-12);
        let lone = matrix(&[(7.0, &A)]);
        assert!(r2_vs_size_curve(&lone, 7.0).is_err());
    }

    #[test]
    fn two_point_fit_is_exact() {
        let curve = [
            CurvePoint { size: 1.0, r2: Some(0.5) },
            CurvePoint { size: 10.0, r2: Some(0.8) },
        ];
        let f = loglinear_fit_and_extrapolate(&curve, 1.0).unwrap();
        assert!((f.predicted - 0.5).abs() < 1e-12);
        assert!((f.line(10.0) - 0.8).abs() < 1e-12);
        assert!((f.slope - 0.3).abs() < 1e-12);
        let big = loglinear_fit_and_extrapolate(&curve, 1e6).unwrap();
        assert_eq!(big.predicted, 1.0);
    }

    #[test]
    fn identical_sizes_rejected() {
        let curve = [
            CurvePoint { size: 3.0, r2: Some(0.5) },
            CurvePoint { size: 3.0, r2: Some(0.6) },
        ];
        assert!(loglinear_fit_and_extrapolate(&curve, 5.0).is_err());
        assert!(loglinear_fit_and_extrapolate(&curve[..1], 5.0).is_err());
    }

    #[test]
    fn transfer_pairs() {
        let m = matrix(&[(0.5, &A), (1.0, &A), (2.0, &A), (4.0, &A)]);
        let c = transfer_curve(&m, 1.0).unwrap();
        let sizes: Vec<f64> = c.iter().map(|p| p.size).collect();
        assert_eq!(sizes, [2.0, 4.0, 4.0]);
        assert!(transfer_curve(&m, 3.0).is_err());
    }

    #[test]
    fn dataset_curve_sorted() {
        let runs = [
            DatasetRun { dataset_size: 500, scores: A.to_vec() },
            DatasetRun { dataset_size: 100, scores: vec![1.0, 3.0, 2.0, 5.0, 4.0] },
        ];
        let c = dataset_size_curve(&runs, &A).unwrap();
        assert_eq!(c[0].dataset_size, 100);
        assert_eq!(c[1].r2, Some(1.0));
        let bad = [DatasetRun { dataset_size: 1, scores: vec![1.0] }];
        assert!(dataset_size_curve(&bad, &A).is_err());
    }

    #[test]
    fn mixture_examples() {
        let counts = |t, f: [f64; 4]| {
            plan_data_mixture(t, MixtureFractions::from_array(f.map(|p| p / 100.0)))
                .unwrap()
                .counts
                .to_array()
        };
        assert_eq!(counts(1000, [15.0, 25.0, 20.0, 40.0]), [150, 250, 200, 400]);
        assert_eq!(counts(1, [100.0, 0.0, 0.0, 0.0]), [1, 0, 0, 0]);
        assert_eq!(counts(10, [33.3, 33.3, 33.4, 0.0]), [3, 3, 4, 0]);
        // equal remainders: earlier modalities win
        assert_eq!(counts(2, [25.0, 25.0, 25.0, 25.0]), [1, 1, 0, 0]);
    }

    #[test]
    fn mixture_validation() {
        let bad = MixtureFractions::new(-0.1, 0.5, 0.3, 0.3);
        assert!(plan_data_mixture(10, bad).is_err());
        assert!(plan_data_mixture(10, MixtureFractions::new(0.5, 0.5, 0.5, 0.0)).is_err());
        assert!(plan_data_mixture(0, MixtureFractions::new(1.0, 0.0, 0.0, 0.0)).is_err());
    }
}

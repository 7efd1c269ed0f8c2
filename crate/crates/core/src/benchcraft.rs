//! Benchmark analytics and discriminative question curation.
//!
//! The curation pipeline keeps questions that need the video (at most
//! `threshold` of the model panel answers them from text alone or from a
//! single frame), drops anything on a manual deny list, scores the rest by
//! the Bernoulli entropy of the panel's video accuracy and keeps the top `k`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ensure, Error, Result};
use crate::stats::{bernoulli_entropy, r_squared};

/// The five temporal perception categories used for curated sets.
pub const CATEGORIES: [&str; 5] = ["Temporal OCR", "Egocentric", "Spatial", "Perception", "Reasoning"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Video,
    Image,
    Text,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Video, Modality::Image, Modality::Text];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Video => "video",
            Modality::Image => "image",
            Modality::Text => "text",
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "video" => Ok(Modality::Video),
            "image" => Ok(Modality::Image),
            "text" => Ok(Modality::Text),
            _ => Err(Error::validation("modality", format!("{s:?} is not video, image or text"))),
        }
    }
}

fn bool_from_digit<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    match String::deserialize(d)?.trim() {
        "1" => Ok(true),
        "0" => Ok(false),
        other => Err(serde::de::Error::custom(format!("correct must be 0 or 1, got {other:?}"))),
    }
}

fn bool_to_digit<S: Serializer>(v: &bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*v))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub benchmark: String,
    pub question_id: String,
    pub category: String,
    pub model: String,
    pub modality: Modality,
    #[serde(deserialize_with = "bool_from_digit", serialize_with = "bool_to_digit")]
    pub correct: bool,
}

/// Rejects repeated `(benchmark, question_id, model, modality)` keys.
pub fn validate_records(records: &[EvalRecord]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for (i, r) in records.iter().enumerate() {
        let key = (&r.benchmark, &r.question_id, &r.model, r.modality);
        ensure(seen.insert(key), &format!("records[{i}]"), || {
            format!(
                "duplicate observation for {}/{} model {} modality {}",
                r.benchmark,
                r.question_id,
                r.model,
                r.modality.name()
            )
        })?;
    }
    Ok(())
}

pub fn read_records(reader: impl Read) -> Result<Vec<EvalRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let records = rdr.deserialize().collect::<std::result::Result<Vec<EvalRecord>, _>>()?;
    validate_records(&records)?;
    Ok(records)
}

pub fn write_records(writer: impl std::io::Write, records: &[EvalRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// One benchmark accuracy, in percent. `modality` is optional in CSV input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchScore {
    pub benchmark: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
    pub score: f64,
}

pub fn read_scores(reader: impl Read) -> Result<Vec<BenchScore>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let scores = rdr.deserialize().collect::<std::result::Result<Vec<BenchScore>, _>>()?;
    for (i, s) in scores.iter().enumerate() {
        ensure((0.0..=100.0).contains(&s.score), &format!("scores[{i}].score"), || {
            format!("{} is outside [0, 100]", s.score)
        })?;
    }
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModalityGap {
    pub benchmark: String,
    pub model: String,
    pub video: Option<f64>,
    pub image: Option<f64>,
    pub text: Option<f64>,
    pub video_minus_text: Option<f64>,
    pub video_minus_image: Option<f64>,
}

impl ModalityGap {
    fn new(benchmark: String, model: String, acc: [Option<f64>; 3]) -> Self {
        let [video, image, text] = acc;
        let delta = |other: Option<f64>| Some(video? - other?);
        Self {
            video_minus_text: delta(text),
            video_minus_image: delta(image),
            benchmark,
            model,
            video,
            image,
            text,
        }
    }
}

fn slot(m: Modality) -> usize {
    match m {
        Modality::Video => 0,
        Modality::Image => 1,
        Modality::Text => 2,
    }
}

/// Accuracy per `(benchmark, model)` and modality, sorted by benchmark then model.
/// A modality with no records is reported as `None`.
pub fn modality_gap(records: &[EvalRecord]) -> Result<Vec<ModalityGap>> {
    validate_records(records)?;
    let mut tally: BTreeMap<(&str, &str), [(u64, u64); 3]> = BTreeMap::new();
    for r in records {
        let cell = &mut tally.entry((&r.benchmark, &r.model)).or_default()[slot(r.modality)];
        cell.0 += u64::from(r.correct);
        cell.1 += 1;
    }
    Ok(tally
        .into_iter()
        .map(|((b, m), cells)| {
            let acc = cells.map(|(c, n)| (n > 0).then(|| c as f64 * 100.0 / n as f64));
            ModalityGap::new(b.to_string(), m.to_string(), acc)
        })
        .collect())
}

/// Gaps straight from per-modality scores (rows without a modality are ignored).
pub fn modality_gap_from_scores(scores: &[BenchScore]) -> Result<Vec<ModalityGap>> {
    let mut table: BTreeMap<(&str, &str), [Option<f64>; 3]> = BTreeMap::new();
    for s in scores {
        let Some(m) = s.modality else { continue };
        let cell = &mut table.entry((&s.benchmark, &s.model)).or_default()[slot(m)];
        ensure(cell.is_none(), "scores", || {
            format!("duplicate score for {}/{}/{}", s.benchmark, s.model, m.name())
        })?;
        *cell = Some(s.score);
    }
    Ok(table
        .into_iter()
        .map(|((b, m), acc)| ModalityGap::new(b.to_string(), m.to_string(), acc))
        .collect())
}

/// Expands per-modality percentages into `questions` synthetic records per
/// benchmark, so that record-level accuracy reproduces each score exactly.
pub fn records_from_scores(scores: &[BenchScore], questions: u32) -> Result<Vec<EvalRecord>> {
    ensure(questions >= 1, "questions", || "must be >= 1".into())?;
    let mut out = Vec::new();
    for (i, s) in scores.iter().enumerate() {
        let modality = s
            .modality
            .ok_or_else(|| Error::validation(format!("scores[{i}].modality"), "required"))?;
        let exact = s.score * questions as f64 / 100.0;
        let correct = exact.round();
        ensure((exact - correct).abs() < 1e-6, &format!("scores[{i}].score"), || {
            format!("{} is not a multiple of 100/{questions}", s.score)
        })?;
        let correct = correct as u32;
        out.extend((0..questions).map(|q| EvalRecord {
            benchmark: s.benchmark.clone(),
            question_id: format!("q{q:05}"),
            category: String::new(),
            model: s.model.clone(),
            modality,
            correct: q < correct,
        }));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuestionProfile {
    pub benchmark: String,
    pub question_id: String,
    pub category: String,
    pub video: BTreeMap<String, bool>,
    pub image: BTreeMap<String, bool>,
    pub text: BTreeMap<String, bool>,
}

impl QuestionProfile {
    pub fn new(benchmark: impl Into<String>, question_id: impl Into<String>, category: impl Into<String>) -> Self {
        Self {
            benchmark: benchmark.into(),
            question_id: question_id.into(),
            category: category.into(),
            video: BTreeMap::new(),
            image: BTreeMap::new(),
            text: BTreeMap::new(),
        }
    }

    pub fn answers(&self, m: Modality) -> &BTreeMap<String, bool> {
        match m {
            Modality::Video => &self.video,
            Modality::Image => &self.image,
            Modality::Text => &self.text,
        }
    }

    fn answers_mut(&mut self, m: Modality) -> &mut BTreeMap<String, bool> {
        match m {
            Modality::Video => &mut self.video,
            Modality::Image => &mut self.image,
            Modality::Text => &mut self.text,
        }
    }

    fn key(&self) -> String {
        format!("{}/{}", self.benchmark, self.question_id)
    }
}

fn fraction_correct(answers: &BTreeMap<String, bool>) -> f64 {
    answers.values().filter(|&&c| c).count() as f64 / answers.len() as f64
}

/// Groups records per `(benchmark, question_id)`, sorted by that key.
pub fn build_profiles(records: &[EvalRecord]) -> Result<Vec<QuestionProfile>> {
    validate_records(records)?;
    let mut map: BTreeMap<(&str, &str), QuestionProfile> = BTreeMap::new();
    for r in records {
        let p = map
            .entry((&r.benchmark, &r.question_id))
            .or_insert_with(|| QuestionProfile::new(&r.benchmark, &r.question_id, &r.category));
        ensure(p.category == r.category, "category", || {
            format!("{} has conflicting categories {:?} and {:?}", p.key(), p.category, r.category)
        })?;
        p.answers_mut(r.modality).insert(r.model.clone(), r.correct);
    }
    Ok(map.into_values().collect())
}

#[derive(Debug, Clone)]
pub struct FilterOutcome<'a> {
    pub retained: Vec<&'a QuestionProfile>,
    pub removed: Vec<&'a QuestionProfile>,
}

/// Removes a question iff more than `threshold` of the panel answers it
/// correctly from text, or more than `threshold` from a single image.
pub fn filter_video_required(profiles: &[QuestionProfile], threshold: f64) -> Result<FilterOutcome<'_>> {
    ensure((0.0..=1.0).contains(&threshold), "threshold", || {
        format!("{threshold} is outside [0, 1]")
    })?;
    let mut out = FilterOutcome {
        retained: Vec::new(),
        removed: Vec::new(),
    };
    for p in profiles {
        ensure(!p.text.is_empty() && !p.image.is_empty(), "model panel", || {
            format!("{} has no text or no image answers", p.key())
        })?;
        if fraction_correct(&p.text) > threshold || fraction_correct(&p.image) > threshold {
            out.removed.push(p);
        } else {
            out.retained.push(p);
        }
    }
    Ok(out)
}

/// Bernoulli entropy (bits) of the fraction of models correct with video input.
pub fn discrimination_entropy(profile: &QuestionProfile) -> Result<f64> {
    ensure(profile.video.len() >= 2, "model panel", || {
        format!("{} needs video answers from >= 2 models, has {}", profile.key(), profile.video.len())
    })?;
    // k and n - k correct must tie exactly, so always evaluate the minority side
    let n = profile.video.len();
    let k = profile.video.values().filter(|&&c| c).count();
    Ok(bernoulli_entropy(k.min(n - k) as f64 / n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectedQuestion {
    pub rank: usize,
    pub benchmark: String,
    pub question_id: String,
    pub category: String,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub items: Vec<SelectedQuestion>,
    /// Always lists the five standard categories, plus any others seen.
    pub category_counts: BTreeMap<String, usize>,
    /// Set when fewer than `k` questions were available.
    pub short: bool,
}

/// Sorts by entropy descending, then question id, then benchmark, and keeps `k`.
pub fn select_top_k<'a, I>(profiles: I, k: usize) -> Result<Selection>
where
    I: IntoIterator<Item = &'a QuestionProfile>,
{
    ensure(k >= 1, "k", || "must be >= 1".into())?;
    let mut scored = profiles
        .into_iter()
        .map(|p| Ok((discrimination_entropy(p)?, p)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|(ea, a), (eb, b)| {
        eb.total_cmp(ea)
            .then_with(|| a.question_id.cmp(&b.question_id))
            .then_with(|| a.benchmark.cmp(&b.benchmark))
    });
    let short = scored.len() < k;
    let mut category_counts: BTreeMap<String, usize> = CATEGORIES.iter().map(|c| (c.to_string(), 0)).collect();
    let items = scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(rank, (entropy, p))| {
            *category_counts.entry(p.category.clone()).or_default() += 1;
            SelectedQuestion {
                rank: rank + 1,
                benchmark: p.benchmark.clone(),
                question_id: p.question_id.clone(),
                category: p.category.clone(),
                entropy,
            }
        })
        .collect();
    Ok(Selection {
        items,
        category_counts,
        short,
    })
}

#[derive(Debug, Clone)]
pub struct CurationConfig {
    pub threshold: f64,
    pub k: usize,
    /// Question ids (or `benchmark/question_id`) rejected by manual review.
    pub deny: BTreeSet<String>,
}

impl Default for CurationConfig {
    /// 50% filter, 400 questions, empty deny list.
    fn default() -> Self {
        Self {
            threshold: 0.5,
            k: 400,
            deny: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurationReport {
    pub total: usize,
    pub removed_by_filter: usize,
    pub removed_by_review: usize,
    pub selection: Selection,
}

pub fn curate(profiles: &[QuestionProfile], config: &CurationConfig) -> Result<CurationReport> {
    let filtered = filter_video_required(profiles, config.threshold)?;
    let (denied, kept): (Vec<_>, Vec<_>) = filtered
        .retained
        .iter()
        .partition(|p| config.deny.contains(&p.question_id) || config.deny.contains(&p.key()));
    let selection = select_top_k(kept.into_iter().copied(), config.k)?;
    Ok(CurationReport {
        total: profiles.len(),
        removed_by_filter: filtered.removed.len(),
        removed_by_review: denied.len(),
        selection,
    })
}

/// Symmetric matrix of R² between benchmarks. `None` marks an undefined entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<Option<f64>> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[i][j])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("benchmark");
        for l in &self.labels {
            out.push(',');
            out.push_str(&csv_field(l));
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.values) {
            out.push_str(&csv_field(l));
            for v in row {
                match v {
                    Some(v) => write!(out, ",{v:.6}").unwrap(),
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Self-contained SVG heatmap, white (0) to dark blue (1); undefined cells are grey.
    pub fn to_svg(&self) -> String {
        let n = self.labels.len();
        let (cell, margin) = (48usize, 180usize);
        let size = margin + n * cell + 10;
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" font-family=\"sans-serif\" font-size=\"11\">\n"
        );
        for (i, label) in self.labels.iter().enumerate() {
            let c = margin + i * cell + cell / 2;
            let label = xml_escape(label);
            writeln!(s, "<text x=\"{}\" y=\"{c}\" text-anchor=\"end\" dominant-baseline=\"middle\">{label}</text>", margin - 6).unwrap();
            writeln!(s, "<text transform=\"translate({c},{}) rotate(-60)\">{label}</text>", margin - 6).unwrap();
        }
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let (x, y) = (margin + j * cell, margin + i * cell);
                let (fill, text) = match v {
                    Some(v) => {
                        let shade = (255.0 * (1.0 - v)).round() as u8;
                        (format!("rgb({shade},{shade},255)"), format!("{v:.2}"))
                    }
                    None => ("rgb(200,200,200)".to_string(), "NA".to_string()),
                };
                writeln!(s, "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"{fill}\" stroke=\"white\"/>").unwrap();
                let ink = if v.is_some_and(|v| v > 0.6) { "white" } else { "black" };
                writeln!(
                    s,
                    "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" dominant-baseline=\"middle\" fill=\"{ink}\">{text}</text>",
                    x + cell / 2,
                    y + cell / 2
                )
                .unwrap();
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// R² between every pair of benchmarks over the models they share.
/// Labels keep first-appearance order. Each pair must share at least 3 models.
pub fn benchmark_correlation(scores: &[BenchScore]) -> Result<CorrelationMatrix> {
    let mut labels: Vec<String> = Vec::new();
    let mut table: HashMap<&str, BTreeMap<&str, f64>> = HashMap::new();
    for s in scores {
        if !table.contains_key(s.benchmark.as_str()) {
            labels.push(s.benchmark.clone());
        }
        let prev = table.entry(&s.benchmark).or_default().insert(&s.model, s.score);
        ensure(prev.is_none(), "scores", || {
            format!("duplicate score for benchmark {} model {}", s.benchmark, s.model)
        })?;
    }
    let n = labels.len();
    let mut values = vec![vec![Some(1.0); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&table[labels[i].as_str()], &table[labels[j].as_str()]);
            let (xs, ys): (Vec<f64>, Vec<f64>) = a
                .iter()
                .filter_map(|(m, &x)| b.get(m).map(|&y| (x, y)))
                .unzip();
            ensure(xs.len() >= 3, "scores", || {
                format!("{} and {} share only {} models", labels[i], labels[j], xs.len())
            })?;
            let r2 = r_squared(&xs, &ys);
            values[i][j] = r2;
            values[j][i] = r2;
        }
    }
    Ok(CorrelationMatrix { labels, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(id: &str, video: &[bool], image: &[bool], text: &[bool]) -> QuestionProfile {
        let mut p = QuestionProfile::new("b", id, "Reasoning");
        let fill = |m: &mut BTreeMap<String, bool>, v: &[bool]| {
            for (i, &c) in v.iter().enumerate() {
                m.insert(format!("m{i:02}"), c);
            }
        };
        fill(&mut p.video, video);
        fill(&mut p.image, image);
        fill(&mut p.text, text);
        p
    }

    fn first_n(n: usize, of: usize) -> Vec<bool> {
        (0..of).map(|i| i < n).collect()
    }

    fn rec(b: &str, q: &str, m: &str, modality: Modality, correct: bool) -> EvalRecord {
        EvalRecord {
            benchmark: b.into(),
            question_id: q.into(),
            category: "Spatial".into(),
            model: m.into(),
            modality,
            correct,
        }
    }

    #[test]
    fn gap_from_records() {
        let mut records = Vec::new();
        for q in 0..10 {
            let qid = q.to_string();
            records.push(rec("B", &qid, "M", Modality::Video, q < 7));
            records.push(rec("B", &qid, "M", Modality::Image, q < 5));
            records.push(rec("B", &qid, "M", Modality::Text, q < 4));
        }
        records.push(rec("C", "0", "M", Modality::Video, true));
        let gaps = modality_gap(&records).unwrap();
        assert_eq!(gaps.len(), 2);
        assert_eq!(gaps[0].video, Some(70.0));
        assert_eq!(gaps[0].video_minus_text, Some(30.0));
        assert_eq!(gaps[0].video_minus_image, Some(20.0));
        assert_eq!(gaps[1].text, None);
        assert_eq!(gaps[1].video_minus_text, None);
    }

    #[test]
    fn equal_modalities_have_zero_gap() {
        let scores: Vec<BenchScore> = Modality::ALL
            .iter()
            .map(|&m| BenchScore {
                benchmark: "B".into(),
                model: "M".into(),
                modality: Some(m),
                score: 42.5,
            })
            .collect();
        let g = &modality_gap(&records_from_scores(&scores, 1000).unwrap()).unwrap()[0];
        assert_eq!((g.video_minus_text, g.video_minus_image), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn duplicate_records_rejected() {
        let r = rec("B", "1", "M", Modality::Text, true);
        assert!(validate_records(&[r.clone(), r]).is_err());
    }

    #[test]
    fn csv_round_trip_uses_digits() {
        let records = vec![rec("B", "1", "M", Modality::Text, true), rec("B", "1", "M", Modality::Video, false)];
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("benchmark,question_id,category,model,modality,correct\nB,1,Spatial,M,text,1\n"));
        assert_eq!(read_records(&buf[..]).unwrap(), records);
        assert!(read_records(&b"benchmark,question_id,category,model,modality,correct\nB,1,c,M,text,yes\n"[..]).is_err());
    }

    #[test]
    fn filter_rule_is_strict() {
        let ten_none = first_n(0, 10);
        let p_text6 = profile("a", &ten_none, &ten_none, &first_n(6, 10));
        let p_boundary = profile("b", &ten_none, &first_n(5, 10), &first_n(5, 10));
        let p_zero = profile("c", &ten_none, &ten_none, &ten_none);
        let p_image6 = profile("d", &ten_none, &first_n(6, 10), &ten_none);
        let all = [p_text6, p_boundary, p_zero, p_image6];
        let out = filter_video_required(&all, 0.5).unwrap();
        let ids = |v: &[&QuestionProfile]| v.iter().map(|p| p.question_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&out.retained), ["b", "c"]);
        assert_eq!(ids(&out.removed), ["a", "d"]);

        let empty = QuestionProfile::new("b", "e", "x");
        assert!(filter_video_required(&[empty], 0.5).is_err());
    }

    #[test]
    fn entropy_cases() {
        let e = |n| discrimination_entropy(&profile("x", &first_n(n, 10), &[], &[])).unwrap();
        assert_eq!(e(5), 1.0);
        assert_eq!(e(10), 0.0);
        assert!((e(3) - 0.8813).abs() < 5e-5);
        assert_eq!(e(3).to_bits(), e(7).to_bits());
        assert!(discrimination_entropy(&profile("x", &[true], &[], &[])).is_err());
    }

    #[test]
    fn top_k_order_and_ties() {
        let ps = [
            profile("q3", &first_n(3, 10), &[], &[]),
            profile("q2", &first_n(5, 10), &[], &[]),
            profile("q1", &first_n(5, 10), &[], &[]),
            profile("q0", &first_n(10, 10), &[], &[]),
        ];
        let sel = select_top_k(&ps, 3).unwrap();
        let ids: Vec<_> = sel.items.iter().map(|s| s.question_id.as_str()).collect();
        assert_eq!(ids, ["q1", "q2", "q3"]);
        assert_eq!(sel.category_counts["Reasoning"], 3);
        assert_eq!(sel.category_counts["Spatial"], 0);
        assert!(!sel.short);
        let all = select_top_k(&ps, 10).unwrap();
        assert!(all.short);
        assert_eq!(all.items.len(), 4);
        assert!(select_top_k(&ps, 0).is_err());
    }

    #[test]
    fn curation_honours_deny_list() {
        let none = first_n(0, 10);
        let ps = [
            profile("keep", &first_n(5, 10), &none, &none),
            profile("deny", &first_n(5, 10), &none, &none),
            profile("easy", &first_n(5, 10), &none, &first_n(9, 10)),
        ];
        let config = CurationConfig {
            k: 5,
            deny: ["deny".to_string()].into(),
            ..Default::default()
        };
        let report = curate(&ps, &config).unwrap();
        assert_eq!((report.removed_by_filter, report.removed_by_review), (1, 1));
        assert_eq!(report.selection.items[0].question_id, "keep");
    }

    fn scores(bench: &str, values: &[f64]) -> Vec<BenchScore> {
        values
            .iter()
            .enumerate()
            .map(|(i, &score)| BenchScore {
                benchmark: bench.into(),
                model: format!("m{i}"),
                modality: None,
                score,
            })
            .collect()
    }

    #[test]
    fn correlation_matrix() {
        let mut s = scores("A", &[10.0, 20.0, 30.0, 45.0]);
        s.extend(scores("B", &[10.0, 20.0, 30.0, 45.0]));
        s.extend(scores("C", &[50.0, 50.0, 50.0, 50.0]));
        let m = benchmark_correlation(&s).unwrap();
        assert_eq!(m.labels, ["A", "B", "C"]);
        assert!((m.get("A", "B").unwrap().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.get("A", "C").unwrap(), None);
        assert_eq!(m.get("C", "C").unwrap(), Some(1.0));
        assert!(m.to_csv().contains(",NA"));
        assert!(m.to_svg().starts_with("<svg"));

        let mut few = scores("A", &[1.0, 2.0]);
        few.extend(scores("B", &[1.0, 2.0]));
        assert!(benchmark_correlation(&few).is_err());
    }
}

//! Comparison of a scorer and a baseline against hand-labeled comments.
//!
//! Comments are split into eight seeded, disjoint samples. For each sample
//! the harness computes the emotion-proportion vector of every scorer and of
//! the truth labels, and reports half the L1 distance between them. It also
//! sorts judged comments into two error buckets at 0.2, using
//! `|P(positive) - truth|` per comment, and counts comments that could not
//! be judged on their own line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::emotion::{score_emotions, Analyzer, Emotion};
use crate::error::{Error, Result};
use crate::lexicon::{FunctionWordTables, Lexicon};
use crate::polarity::Polarity;

pub const REPORT_SCHEMA: &str = "eval-v1";
pub const DEFAULT_SAMPLES: usize = 8;
pub const GRADIENT_THRESHOLD: f64 = 0.2;
const UNJUDGEABLE: &str = "UNJUDGEABLE";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    Judged { polarity: Polarity, emotion: Emotion },
    Unjudgeable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthLabel {
    pub id: String,
    pub truth: Truth,
}

#[derive(Deserialize)]
struct TruthLine {
    id: String,
    polarity: String,
    dominant_emotion: String,
}

/// Parses truth JSONL: `{id, polarity, dominant_emotion | "UNJUDGEABLE"}`.
/// Either field set to `UNJUDGEABLE` marks the comment as unjudgeable.
pub fn parse_truth_jsonl(text: &str, file: impl AsRef<Path>) -> Result<Vec<TruthLabel>> {
    let file = file.as_ref();
    let mut labels = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let raw: TruthLine =
            serde_json::from_str(line).map_err(|e| Error::parse(file, line_no, e.to_string()))?;
        if !seen.insert(raw.id.clone()) {
            return Err(Error::parse(file, line_no, format!("duplicate id {:?}", raw.id)));
        }
        let truth = if raw.polarity == UNJUDGEABLE || raw.dominant_emotion == UNJUDGEABLE {
            Truth::Unjudgeable
        } else {
            let polarity = raw.polarity.parse().map_err(|e: Error| Error::parse(file, line_no, e.to_string()))?;
            let emotion = raw
                .dominant_emotion
                .parse()
                .map_err(|e: Error| Error::parse(file, line_no, e.to_string()))?;
            Truth::Judged { polarity, emotion }
        };
        labels.push(TruthLabel { id: raw.id, truth });
    }
    Ok(labels)
}

/// A labeled comment with its tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub id: String,
    pub tokens: Vec<String>,
    pub truth: Truth,
}

/// Disjoint samples of labeled comments, each sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePartition {
    samples: Vec<Vec<EvalItem>>,
    seed: u64,
}

impl SamplePartition {
    /// Shuffles the items (after sorting by id) with a seeded ChaCha8 stream
    /// and deals them round-robin into `n_samples` samples.
    pub fn new(mut items: Vec<EvalItem>, n_samples: usize, seed: u64) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::InvalidParameter("need at least one sample".into()));
        }
        items.sort_by(|a, b| a.id.cmp(&b.id));
        if items.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidInput("duplicate comment id in evaluation set".into()));
        }
        items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut samples = vec![Vec::new(); n_samples];
        for (i, item) in items.into_iter().enumerate() {
            samples[i % n_samples].push(item);
        }
        for sample in &mut samples {
            sample.sort_by(|a, b| a.id.cmp(&b.id));
        }
        Ok(Self { samples, seed })
    }

    /// Uses the given grouping as is (items are still sorted by id inside
    /// each sample).
    pub fn from_samples(mut samples: Vec<Vec<EvalItem>>) -> Result<Self> {
        let mut ids = std::collections::BTreeSet::new();
        for sample in &mut samples {
            for item in sample.iter() {
                if !ids.insert(item.id.clone()) {
                    return Err(Error::InvalidInput(format!("comment {:?} is in two samples", item.id)));
                }
            }
            sample.sort_by(|a, b| a.id.cmp(&b.id));
        }
        Ok(Self { samples, seed: 0 })
    }

    pub fn samples(&self) -> &[Vec<EvalItem>] {
        &self.samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.samples.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// What a scorer says about one comment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Judgement {
    pub emotions: [f64; 7],
    /// Probability-like score in [0, 1] that the comment is positive.
    pub positive_score: f64,
}

pub trait Scorer {
    fn name(&self) -> &str;
    fn judge(&self, item: &EvalItem) -> Result<Judgement>;
}

/// Answers with the truth label itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct TruthOracle;

impl Scorer for TruthOracle {
    fn name(&self) -> &str {
        "truth-oracle"
    }

    fn judge(&self, item: &EvalItem) -> Result<Judgement> {
        match item.truth {
            Truth::Judged { polarity, emotion } => {
                let mut emotions = [0.0; 7];
                emotions[emotion.index()] = 1.0;
                Ok(Judgement {
                    emotions,
                    positive_score: truth_score(polarity),
                })
            }
            Truth::Unjudgeable => Err(Error::InvalidInput(format!("{} has no truth label", item.id))),
        }
    }
}

/// Equal mass on every emotion and an undecided polarity.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformBaseline;

impl Scorer for UniformBaseline {
    fn name(&self) -> &str {
        "uniform"
    }

    fn judge(&self, _item: &EvalItem) -> Result<Judgement> {
        Ok(Judgement {
            emotions: [1.0 / 7.0; 7],
            positive_score: 0.5,
        })
    }
}

/// Sums lexicon intensities with no negation or degree handling.
#[derive(Debug, Clone)]
pub struct LexiconBaseline {
    lexicon: Lexicon,
}

impl LexiconBaseline {
    pub fn new(lexicon: Lexicon) -> Self {
        Self { lexicon }
    }
}

impl Scorer for LexiconBaseline {
    fn name(&self) -> &str {
        "lexicon-only"
    }

    fn judge(&self, item: &EvalItem) -> Result<Judgement> {
        let v = score_emotions(&item.tokens, &self.lexicon, &FunctionWordTables::default());
        let total = v.total_polarity();
        let positive_score = if total > 0.0 {
            1.0
        } else if total < 0.0 {
            0.0
        } else {
            0.5
        };
        Ok(Judgement {
            emotions: *v.scores(),
            positive_score,
        })
    }
}

/// The full scorer: lexicon emotions with fallback, Naive Bayes polarity.
pub struct SystemScorer<'a> {
    analyzer: &'a Analyzer,
}

impl<'a> SystemScorer<'a> {
    pub fn new(analyzer: &'a Analyzer) -> Self {
        Self { analyzer }
    }
}

impl Scorer for SystemScorer<'_> {
    fn name(&self) -> &str {
        "system"
    }

    fn judge(&self, item: &EvalItem) -> Result<Judgement> {
        let (polarity, emotions) = self.analyzer.score_tokens(&item.tokens);
        let positive_score = match polarity {
            Some(p) => p.positive_probability(),
            None => {
                let total = emotions.total_polarity();
                if total > 0.0 {
                    1.0
                } else if total < 0.0 {
                    0.0
                } else {
                    0.5
                }
            }
        };
        Ok(Judgement {
            emotions: *emotions.scores(),
            positive_score,
        })
    }
}

fn truth_score(polarity: Polarity) -> f64 {
    match polarity {
        Polarity::Positive => 1.0,
        Polarity::Negative => 0.0,
    }
}

/// Absolute scores rescaled to sum to 1; all-zero stays all-zero.
pub fn proportions(scores: &[f64; 7]) -> [f64; 7] {
    let total: f64 = scores.iter().map(|s| s.abs()).sum();
    if total == 0.0 {
        return [0.0; 7];
    }
    scores.map(|s| s.abs() / total)
}

/// Half the L1 distance between two proportion vectors.
pub fn half_l1(a: &[f64; 7], b: &[f64; 7]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradientBuckets {
    pub below: u64,
    pub at_or_above: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub n_judged: u64,
    pub n_unjudgeable: u64,
    pub proportions: BTreeMap<Emotion, f64>,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerReport {
    pub name: String,
    pub per_sample_error: Vec<f64>,
    pub samples: Vec<SampleResult>,
    pub gradient_buckets: GradientBuckets,
    pub n_judged: u64,
    pub n_unjudgeable: u64,
    pub unjudgeable_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub proportion_error: String,
    pub gradient_error: String,
    pub gradient_threshold: f64,
    pub unjudgeable: String,
    pub n_samples: usize,
    pub seed: u64,
}

impl ReportMetadata {
    fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            proportion_error: "per sample: 0.5 * L1 distance between the mean of per-comment |score| proportion vectors and the truth dominant-emotion proportions".into(),
            gradient_error: "per comment: |P(positive) - truth|, truth = 1 for positive and 0 for negative".into(),
            gradient_threshold: GRADIENT_THRESHOLD,
            unjudgeable: "comments whose truth is UNJUDGEABLE or whose scorer failed; excluded from both buckets".into(),
            n_samples,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub schema: String,
    pub metadata: ReportMetadata,
    pub n_comments: u64,
    pub truth_proportions: Vec<BTreeMap<Emotion, f64>>,
    pub system: ScorerReport,
    pub baseline: ScorerReport,
}

impl ErrorReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Per-sample errors followed by the three-bucket summary.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let m = &self.metadata;
        let _ = writeln!(out, "# proportion error: {}", m.proportion_error);
        let _ = writeln!(out, "# gradient error: {}", m.gradient_error);
        let _ = writeln!(out, "# unjudgeable: {}", m.unjudgeable);
        let _ = writeln!(out, "# samples: {}, seed: {}, comments: {}", m.n_samples, m.seed, self.n_comments);
        let _ = writeln!(out);
        let (s, b) = (&self.system, &self.baseline);
        let _ = writeln!(out, "{:<8}{:>14}{:>14}", "sample", s.name, b.name);
        for (i, (se, be)) in s.per_sample_error.iter().zip(&b.per_sample_error).enumerate() {
            let _ = writeln!(out, "{:<8}{:>14.4}{:>14.4}", i + 1, se, be);
        }
        let _ = writeln!(out);
        let total = self.n_comments.max(1) as f64;
        let row = |label: &str, x: u64, y: u64| {
            format!(
                "{:<18}{:>8} ({:>5.1}%){:>8} ({:>5.1}%)\n",
                label,
                x,
                100.0 * x as f64 / total,
                y,
                100.0 * y as f64 / total
            )
        };
        let _ = writeln!(out, "{:<18}{:>17}{:>17}", "bucket", s.name, b.name);
        out += &row("error < 0.2", s.gradient_buckets.below, b.gradient_buckets.below);
        out += &row("error >= 0.2", s.gradient_buckets.at_or_above, b.gradient_buckets.at_or_above);
        out += &row("cannot be judged", s.n_unjudgeable, b.n_unjudgeable);
        out
    }
}

fn emotion_map(v: &[f64; 7]) -> BTreeMap<Emotion, f64> {
    Emotion::ALL.into_iter().map(|e| (e, v[e.index()])).collect()
}

fn mean_vector(vectors: &[[f64; 7]]) -> [f64; 7] {
    let mut sum = [0.0; 7];
    for v in vectors {
        for i in 0..7 {
            sum[i] += v[i];
        }
    }
    if vectors.is_empty() {
        sum
    } else {
        sum.map(|s| s / vectors.len() as f64)
    }
}

/// Truth proportions per sample over its judgeable comments.
fn truth_proportions(partition: &SamplePartition) -> Vec<[f64; 7]> {
    partition
        .samples()
        .iter()
        .map(|sample| {
            let hot: Vec<[f64; 7]> = sample
                .iter()
                .filter_map(|item| match item.truth {
                    Truth::Judged { emotion, .. } => {
                        let mut v = [0.0; 7];
                        v[emotion.index()] = 1.0;
                        Some(v)
                    }
                    Truth::Unjudgeable => None,
                })
                .collect();
            mean_vector(&hot)
        })
        .collect()
}

fn evaluate(partition: &SamplePartition, scorer: &dyn Scorer, truth: &[[f64; 7]]) -> ScorerReport {
    let mut samples = Vec::new();
    let mut buckets = GradientBuckets::default();
    let (mut n_judged, mut n_unjudgeable) = (0u64, 0u64);
    for (sample, truth_props) in partition.samples().iter().zip(truth) {
        let mut props = Vec::new();
        let mut unjudgeable = 0;
        for item in sample {
            let Truth::Judged { polarity, .. } = item.truth else {
                unjudgeable += 1;
                continue;
            };
            match scorer.judge(item) {
                Ok(j) => {
                    props.push(proportions(&j.emotions));
                    if (j.positive_score - truth_score(polarity)).abs() < GRADIENT_THRESHOLD {
                        buckets.below += 1;
                    } else {
                        buckets.at_or_above += 1;
                    }
                }
                Err(_) => unjudgeable += 1,
            }
        }
        let predicted = mean_vector(&props);
        n_judged += props.len() as u64;
        n_unjudgeable += unjudgeable;
        samples.push(SampleResult {
            n_judged: props.len() as u64,
            n_unjudgeable: unjudgeable,
            proportions: emotion_map(&predicted),
            error: half_l1(&predicted, truth_props),
        });
    }
    let total = n_judged + n_unjudgeable;
    ScorerReport {
        name: scorer.name().to_string(),
        per_sample_error: samples.iter().map(|s| s.error).collect(),
        samples,
        gradient_buckets: buckets,
        n_judged,
        n_unjudgeable,
        unjudgeable_rate: if total == 0 { 0.0 } else { n_unjudgeable as f64 / total as f64 },
    }
}

pub fn run_comparison(partition: &SamplePartition, system: &dyn Scorer, baseline: &dyn Scorer) -> ErrorReport {
    let truth = truth_proportions(partition);
    ErrorReport {
        schema: REPORT_SCHEMA.to_string(),
        metadata: ReportMetadata::new(partition.samples().len(), partition.seed()),
        n_comments: partition.len() as u64,
        truth_proportions: truth.iter().map(emotion_map).collect(),
        system: evaluate(partition, system, &truth),
        baseline: evaluate(partition, baseline, &truth),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn item(id: &str, polarity: Polarity, emotion: Emotion) -> EvalItem {
        EvalItem {
            id: id.into(),
            tokens: Vec::new(),
            truth: Truth::Judged { polarity, emotion },
        }
    }

    fn fixture(n: usize) -> Vec<EvalItem> {
        (0..n)
            .map(|i| {
                let e = Emotion::ALL[i % 7];
                let p = if e.valence() > 0.0 { Polarity::Positive } else { Polarity::Negative };
                item(&format!("c{i:03}"), p, e)
            })
            .collect()
    }

    struct Failing;

    impl Scorer for Failing {
        fn name(&self) -> &str {
            "failing"
        }

        fn judge(&self, item: &EvalItem) -> Result<Judgement> {
            if item.id.ends_with('0') {
                Err(Error::InvalidInput("boom".into()))
            } else {
                UniformBaseline.judge(item)
            }
        }
    }

    #[test]
    fn partition_is_disjoint_and_seeded() {
        let p = SamplePartition::new(fixture(80), 8, 7).unwrap();
        assert_eq!(p.samples().len(), 8);
        assert!(p.samples().iter().all(|s| s.len() == 10));
        let mut ids: Vec<&str> = p.samples().iter().flatten().map(|i| i.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 80);
        assert_eq!(p, SamplePartition::new(fixture(80), 8, 7).unwrap());
        assert_ne!(p, SamplePartition::new(fixture(80), 8, 8).unwrap());
        assert!(SamplePartition::new(fixture(3), 0, 1).is_err());
    }

    #[test]
    fn self_comparison_is_exact() {
        let p = SamplePartition::new(fixture(80), 8, 1).unwrap();
        let report = run_comparison(&p, &TruthOracle, &UniformBaseline);
        assert!(report.system.per_sample_error.iter().all(|e| *e == 0.0));
        assert_eq!(report.system.gradient_buckets, GradientBuckets { below: 80, at_or_above: 0 });
        assert_eq!(report.system.unjudgeable_rate, 0.0);
    }

    #[test]
    fn uniform_against_single_emotion_truth() {
        // truth all Happy: 0.5 * ((1 - 1/7) + 6 * 1/7) = 6/7
        let items = (0..16).map(|i| item(&format!("h{i}"), Polarity::Positive, Emotion::Happy)).collect();
        let p = SamplePartition::new(items, 8, 3).unwrap();
        let report = run_comparison(&p, &UniformBaseline, &TruthOracle);
        for e in &report.system.per_sample_error {
            assert!((e - 6.0 / 7.0).abs() < 1e-12, "{e}");
        }
        // 0.5 away from a positive truth
        assert_eq!(report.system.gradient_buckets, GradientBuckets { below: 0, at_or_above: 16 });
    }

    #[test]
    fn unjudgeable_is_reported_separately() {
        let mut items = fixture(20);
        items[3].truth = Truth::Unjudgeable;
        let p = SamplePartition::new(items, 4, 2).unwrap();
        let report = run_comparison(&p, &TruthOracle, &Failing);
        assert_eq!(report.system.n_unjudgeable, 1);
        assert_eq!(report.system.n_judged, 19);
        assert_eq!(report.system.unjudgeable_rate, 1.0 / 20.0);
        let b = &report.baseline;
        // ids c000, c010 fail, c003 has no truth
        assert_eq!(b.n_unjudgeable, 3);
        assert_eq!(b.gradient_buckets.below + b.gradient_buckets.at_or_above, b.n_judged);
        let text = report.to_text();
        assert!(text.contains("cannot be judged"));
        assert!(text.contains("error < 0.2"));
    }

    #[test]
    fn truth_file_parsing() {
        let text = "{\"id\":\"a\",\"polarity\":\"positive\",\"dominant_emotion\":\"Happy\"}\n\
                    {\"id\":\"b\",\"polarity\":\"negative\",\"dominant_emotion\":\"UNJUDGEABLE\"}\n";
        let labels = parse_truth_jsonl(text, "t.jsonl").unwrap();
        assert_eq!(labels[0].truth, Truth::Judged { polarity: Polarity::Positive, emotion: Emotion::Happy });
        assert_eq!(labels[1].truth, Truth::Unjudgeable);
        let bad = "{\"id\":\"a\",\"polarity\":\"positive\",\"dominant_emotion\":\"Happy\"}\n{\"id\":\"c\",\"polarity\":\"meh\",\"dominant_emotion\":\"Happy\"}\n";
        let err = parse_truth_jsonl(bad, "t.jsonl").unwrap_err().to_string();
        assert!(err.starts_with("t.jsonl:2:"), "{err}");
    }

    #[test]
    fn lexicon_baseline_ignores_negation() {
        let lex = Lexicon::parse_tsv("高兴\tpositive\tHappy=7\n", "l").unwrap();
        let base = LexiconBaseline::new(lex);
        let j = base
            .judge(&EvalItem { id: "x".into(), tokens: vec!["不".into(), "高兴".into()], truth: Truth::Unjudgeable })
            .unwrap();
        assert_eq!(j.emotions[Emotion::Happy.index()], 7.0);
        assert_eq!(j.positive_score, 1.0);
    }

    proptest! {
        #[test]
        fn report_ignores_order_within_samples(seed: u64, n in 1usize..60) {
            let items = fixture(n);
            let p = SamplePartition::new(items, 8, seed).unwrap();
            let mut reversed: Vec<Vec<EvalItem>> = p.samples().to_vec();
            reversed.iter_mut().for_each(|s| s.reverse());
            let q = SamplePartition::from_samples(reversed).unwrap();
            let a = run_comparison(&p, &UniformBaseline, &TruthOracle);
            let b = run_comparison(&q, &UniformBaseline, &TruthOracle);
            prop_assert_eq!(a.system, b.system);
        }

        #[test]
        fn zero_error_iff_equal_proportions(weights in prop::array::uniform7(0.0f64..5.0)) {
            let truth = proportions(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
            let predicted = proportions(&weights);
            let err = half_l1(&predicted, &truth);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&err));
            prop_assert_eq!(err == 0.0, predicted == truth);
        }
    }
}

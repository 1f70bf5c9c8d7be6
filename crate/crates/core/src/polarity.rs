//! Positive/negative Naive Bayes over token lists.
//!
//! Word weights are boolean document frequencies by default: a word counts
//! once for every training document of a class that contains it. Conditional
//! probabilities are smoothed with `δ = 1/V`, where `V` is the total weight
//! over both classes:
//!
//! ```text
//! P(w | c) = (weight(w, c) + δ) / (Σ_w weight(w, c) + δ·V)
//! ```
//!
//! Scoring happens in log space over the distinct tokens of the input.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_VERSION: &str = "nb-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    /// Fixed class order.
    pub const ALL: [Polarity; 2] = [Polarity::Positive, Polarity::Negative];

    pub fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(Polarity::Positive),
            "negative" => Ok(Polarity::Negative),
            other => Err(Error::InvalidInput(format!("unknown polarity {other:?}"))),
        }
    }
}

/// How a training document contributes to a word's class weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// One per containing document.
    #[default]
    Bool,
    /// Number of occurrences.
    TermFrequency,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDoc {
    pub tokens: Vec<String>,
    pub label: Polarity,
}

/// Parses labeled JSONL, one `{"tokens": [...], "label": "positive"|"negative"}` per line.
pub fn parse_labeled_jsonl(text: &str, file: impl AsRef<Path>) -> Result<Vec<LabeledDoc>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            serde_json::from_str(line).map_err(|e| Error::parse(file.as_ref(), n + 1, e.to_string()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    weighting: Weighting,
    doc_counts: [u64; 2],
    weights: BTreeMap<String, [u64; 2]>,
    class_weight_sum: [u64; 2],
    total_weight: u64,
}

impl NbModel {
    pub fn train(labeled: &[LabeledDoc], weighting: Weighting) -> Result<Self> {
        let mut doc_counts = [0u64; 2];
        let mut weights: BTreeMap<String, [u64; 2]> = BTreeMap::new();
        for doc in labeled {
            let c = doc.label.index();
            doc_counts[c] += 1;
            match weighting {
                Weighting::Bool => {
                    let distinct: BTreeSet<&str> = doc.tokens.iter().map(String::as_str).collect();
                    for w in distinct {
                        weights.entry(w.to_string()).or_default()[c] += 1;
                    }
                }
                Weighting::TermFrequency => {
                    for w in &doc.tokens {
                        weights.entry(w.clone()).or_default()[c] += 1;
                    }
                }
            }
        }
        for class in Polarity::ALL {
            if doc_counts[class.index()] == 0 {
                return Err(Error::InvalidInput(format!(
                    "no {class} documents in the training set"
                )));
            }
        }
        let class_weight_sum = [0, 1].map(|c| weights.values().map(|w| w[c]).sum::<u64>());
        let total_weight = class_weight_sum.iter().sum();
        if total_weight == 0 {
            return Err(Error::InvalidInput("training documents contain no tokens".into()));
        }
        Ok(Self {
            weighting,
            doc_counts,
            weights,
            class_weight_sum,
            total_weight,
        })
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn doc_count(&self, class: Polarity) -> u64 {
        self.doc_counts[class.index()]
    }

    /// `doc(c) / Σ doc`.
    pub fn prior(&self, class: Polarity) -> f64 {
        self.doc_counts[class.index()] as f64 / self.doc_counts.iter().sum::<u64>() as f64
    }

    pub fn weight(&self, word: &str, class: Polarity) -> u64 {
        self.weights.get(word).map_or(0, |w| w[class.index()])
    }

    pub fn class_weight_sum(&self, class: Polarity) -> u64 {
        self.class_weight_sum[class.index()]
    }

    /// `V`, the total weight over both classes.
    pub fn total_weight(&self) -> u64 {
        self.total_weight
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.total_weight as f64
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.weights.keys().map(String::as_str)
    }

    /// Smoothed `P(word | class)`.
    pub fn conditional(&self, word: &str, class: Polarity) -> f64 {
        let delta = self.delta();
        (self.weight(word, class) as f64 + delta)
            / (self.class_weight_sum(class) as f64 + delta * self.total_weight as f64)
    }

    pub fn classify<S: AsRef<str>>(&self, tokens: &[S]) -> PolarityResult {
        let distinct: BTreeSet<&str> = tokens.iter().map(AsRef::as_ref).collect();
        let scores = Polarity::ALL.map(|class| {
            distinct
                .iter()
                .fold(self.prior(class).ln(), |acc, w| acc + self.conditional(w, class).ln())
        });
        PolarityResult::from_log_scores(scores[0], scores[1])
    }

    pub fn to_json(&self) -> Result<String> {
        let file = NbFile {
            version: MODEL_VERSION.to_string(),
            weighting: self.weighting,
            doc_counts: class_map(self.doc_counts),
            priors: class_map(Polarity::ALL.map(|c| self.prior(c))),
            vocab: self.weights.clone(),
            class_weight_sum: class_map(self.class_weight_sum),
            total_weight: self.total_weight,
            delta: self.delta(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NbFile = serde_json::from_str(text)?;
        if file.version != MODEL_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported NB model version {:?}",
                file.version
            )));
        }
        let get = |m: &BTreeMap<Polarity, u64>, c: Polarity| m.get(&c).copied().unwrap_or(0);
        let doc_counts = Polarity::ALL.map(|c| get(&file.doc_counts, c));
        let class_weight_sum = [0, 1].map(|c| file.vocab.values().map(|w| w[c]).sum::<u64>());
        let total_weight = class_weight_sum.iter().sum::<u64>();
        let stored_sums = Polarity::ALL.map(|c| get(&file.class_weight_sum, c));
        if stored_sums != class_weight_sum || total_weight != file.total_weight {
            return Err(Error::InvalidInput(
                "NB model weight totals do not match its vocabulary".into(),
            ));
        }
        if doc_counts.contains(&0) || total_weight == 0 {
            return Err(Error::InvalidInput("NB model has an empty class".into()));
        }
        Ok(Self {
            weighting: file.weighting,
            doc_counts,
            weights: file.vocab,
            class_weight_sum,
            total_weight,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn class_map<T>(values: [T; 2]) -> BTreeMap<Polarity, T> {
    Polarity::ALL.into_iter().zip(values).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct NbFile {
    version: String,
    weighting: Weighting,
    doc_counts: BTreeMap<Polarity, u64>,
    priors: BTreeMap<Polarity, f64>,
    /// word -> [positive weight, negative weight]
    vocab: BTreeMap<String, [u64; 2]>,
    class_weight_sum: BTreeMap<Polarity, u64>,
    #[serde(rename = "V")]
    total_weight: u64,
    delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarityResult {
    pub label: Polarity,
    pub log_score: ClassScores,
    /// Normalized posterior of the winning class, in `[0.5, 1]`.
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub positive: f64,
    pub negative: f64,
}

impl PolarityResult {
    /// Picks the larger log score; exact ties go to positive.
    pub fn from_log_scores(positive: f64, negative: f64) -> Self {
        let (label, win, lose) = if positive >= negative {
            (Polarity::Positive, positive, negative)
        } else {
            (Polarity::Negative, negative, positive)
        };
        Self {
            label,
            log_score: ClassScores { positive, negative },
            confidence: 1.0 / (1.0 + (lose - win).exp()),
        }
    }

    /// Normalized posterior probability of the positive class.
    pub fn positive_probability(&self) -> f64 {
        match self.label {
            Polarity::Positive => self.confidence,
            Polarity::Negative => 1.0 - self.confidence,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(tokens: &[&str], label: Polarity) -> LabeledDoc {
        LabeledDoc {
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            label,
        }
    }

    fn toy() -> Vec<LabeledDoc> {
        use Polarity::*;
        vec![
            doc(&["加油", "武汉", "加油"], Positive),
            doc(&["感谢", "医生", "加油"], Positive),
            doc(&["希望", "春天"], Positive),
            doc(&["害怕", "病毒"], Negative),
            doc(&["病毒", "可怕", "封城"], Negative),
            doc(&["难过", "武汉"], Negative),
        ]
    }

    #[test]
    fn prior_follows_document_counts() {
        use Polarity::*;
        let model = NbModel::train(
            &[doc(&["a"], Positive), doc(&["b"], Positive), doc(&["c"], Positive), doc(&["d"], Negative)],
            Weighting::Bool,
        )
        .unwrap();
        assert_eq!(model.prior(Positive), 0.75);
        assert_eq!(model.prior(Negative), 0.25);

        let even = NbModel::train(&[doc(&["a"], Positive), doc(&["b"], Negative)], Weighting::Bool).unwrap();
        assert_eq!(even.prior(Positive), 0.5);
    }

    #[test]
    fn bool_weights_match_hand_table() {
        use Polarity::*;
        let model = NbModel::train(&toy(), Weighting::Bool).unwrap();
        // word: (positive docs containing it, negative docs containing it)
        let table = [
            ("加油", 2, 0),
            ("武汉", 1, 1),
            ("感谢", 1, 0),
            ("医生", 1, 0),
            ("希望", 1, 0),
            ("春天", 1, 0),
            ("害怕", 0, 1),
            ("病毒", 0, 2),
            ("可怕", 0, 1),
            ("封城", 0, 1),
            ("难过", 0, 1),
        ];
        for (w, p, n) in table {
            assert_eq!((model.weight(w, Positive), model.weight(w, Negative)), (p, n), "{w}");
        }
        assert_eq!(model.vocabulary().count(), table.len());
        assert_eq!(model.class_weight_sum(Positive), 7);
        assert_eq!(model.class_weight_sum(Negative), 7);
        assert_eq!(model.total_weight(), 14);
        assert!((model.delta() * model.total_weight() as f64 - 1.0).abs() < 1e-12);

        let tf = NbModel::train(&toy(), Weighting::TermFrequency).unwrap();
        assert_eq!(tf.weight("加油", Positive), 3);
    }

    #[test]
    fn missing_class_is_rejected() {
        let only_pos = [doc(&["a"], Polarity::Positive)];
        assert!(matches!(NbModel::train(&only_pos, Weighting::Bool), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn empty_input_uses_prior() {
        use Polarity::*;
        let model = NbModel::train(
            &[doc(&["a"], Positive), doc(&["b"], Positive), doc(&["c"], Positive), doc(&["d"], Negative)],
            Weighting::Bool,
        )
        .unwrap();
        let result = model.classify::<&str>(&[]);
        assert_eq!(result.label, Positive);
        assert!((result.confidence - 0.75).abs() < 1e-12);
    }

    #[test]
    fn negative_only_word_wins_under_uniform_prior() {
        let model = NbModel::train(&toy(), Weighting::Bool).unwrap();
        assert_eq!(model.classify(&["病毒"]).label, Polarity::Negative);
        assert_eq!(model.classify(&["加油"]).label, Polarity::Positive);
    }

    #[test]
    fn exact_tie_goes_positive() {
        let r = PolarityResult::from_log_scores(-2.0, -2.0);
        assert_eq!(r.label, Polarity::Positive);
        assert_eq!(r.confidence, 0.5);
    }

    #[test]
    fn json_round_trip() {
        let model = NbModel::train(&toy(), Weighting::Bool).unwrap();
        let json = model.to_json().unwrap();
        assert!(json.contains("\"nb-v1\"") && json.contains("\"V\": 14"));
        assert_eq!(NbModel::from_json(&json).unwrap(), model);
        let tampered = json.replace("\"V\": 14", "\"V\": 15");
        assert!(NbModel::from_json(&tampered).is_err());
    }

    #[test]
    fn labeled_jsonl_reports_line() {
        let text = "{\"tokens\":[\"a\"],\"label\":\"positive\"}\n{\"tokens\":[\"b\"],\"label\":\"meh\"}\n";
        let err = parse_labeled_jsonl(text, "l.jsonl").unwrap_err();
        assert!(err.to_string().starts_with("l.jsonl:2:"), "{err}");
    }

    #[test]
    fn smoothed_probabilities_are_proper() {
        let model = NbModel::train(&toy(), Weighting::Bool).unwrap();
        for class in Polarity::ALL {
            let delta = model.delta();
            let denom = model.class_weight_sum(class) as f64 + delta * model.total_weight() as f64;
            let mut total = 0.0;
            for w in model.vocabulary() {
                let p = model.conditional(w, class);
                assert!(p > 0.0 && p < 1.0);
                total += p;
            }
            let bound = 1.0 + model.vocabulary().count() as f64 * delta / denom;
            assert!(total <= bound + 1e-12, "{total} > {bound}");
        }
    }

    proptest! {
        #[test]
        fn duplicates_do_not_matter(tokens in prop::collection::vec(prop::sample::select(vec!["加油", "病毒", "武汉", "新词"]), 0..10)) {
            let model = NbModel::train(&toy(), Weighting::Bool).unwrap();
            let doubled: Vec<&str> = tokens.iter().chain(tokens.iter()).copied().collect();
            prop_assert_eq!(model.classify(&tokens), model.classify(&doubled));
        }

        #[test]
        fn training_order_independent(seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut docs = toy();
            docs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(NbModel::train(&docs, Weighting::Bool).unwrap(), NbModel::train(&toy(), Weighting::Bool).unwrap());
        }

        #[test]
        fn shared_shift_keeps_label(pos in -50.0f64..0.0, neg in -50.0f64..0.0, shift in -20.0f64..20.0) {
            // multiplying both class scores by a constant adds its log to both
            let a = PolarityResult::from_log_scores(pos, neg);
            let b = PolarityResult::from_log_scores(pos + shift, neg + shift);
            prop_assert_eq!(a.label, b.label);
        }
    }
}

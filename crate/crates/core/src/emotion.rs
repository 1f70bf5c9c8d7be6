//! Seven-emotion lexicon scoring.
//!
//! Tokens are scanned left to right with a running weight `W`, initially 1.
//! Negation words flip its sign and degree adverbs multiply it by their
//! factor. When a sentiment word is reached, each of its emotions receives
//! `W * sign(polarity) * intensity`, and `W` goes back to 1 (or is carried
//! forward in [`WeightMode::Carry`]). The dominant emotion is the one with the
//! largest absolute score.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{merge_known_words, FunctionWordTables, Lexicon};
use crate::polarity::{NbModel, Polarity, PolarityResult};
use crate::segmenter::{segment_pipeline, HmmModel};
use crate::textprep::{Document, StopwordList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Emotion {
    Hopeful,
    Happy,
    Depressed,
    Angry,
    Frightened,
    Disappointed,
    Shocked,
}

impl Emotion {
    /// Fixed order; also the tie-break order for the dominant emotion.
    pub const ALL: [Emotion; 7] = [
        Emotion::Hopeful,
        Emotion::Happy,
        Emotion::Depressed,
        Emotion::Angry,
        Emotion::Frightened,
        Emotion::Disappointed,
        Emotion::Shocked,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Hopeful => "Hopeful",
            Emotion::Happy => "Happy",
            Emotion::Depressed => "Depressed",
            Emotion::Angry => "Angry",
            Emotion::Frightened => "Frightened",
            Emotion::Disappointed => "Disappointed",
            Emotion::Shocked => "Shocked",
        }
    }

    /// +1 for Hopeful and Happy, -1 for the rest.
    pub fn valence(self) -> f64 {
        match self {
            Emotion::Hopeful | Emotion::Happy => 1.0,
            _ => -1.0,
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown emotion {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScoreFlag {
    /// The scores come from the Naive Bayes fallback, not the lexicon.
    Fallback,
    /// Every score is zero.
    LexiconSilent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionVector {
    scores: [f64; 7],
    dominant: Option<Emotion>,
    total_polarity: f64,
    flags: Vec<ScoreFlag>,
}

impl EmotionVector {
    pub fn from_scores(scores: [f64; 7]) -> Self {
        let dominant = dominant_by_magnitude(&scores);
        let flags = if dominant.is_none() {
            vec![ScoreFlag::LexiconSilent]
        } else {
            Vec::new()
        };
        Self {
            scores,
            dominant,
            total_polarity: scores.iter().sum(),
            flags,
        }
    }

    pub fn silent() -> Self {
        Self::from_scores([0.0; 7])
    }

    pub fn score(&self, emotion: Emotion) -> f64 {
        self.scores[emotion.index()]
    }

    pub fn scores(&self) -> &[f64; 7] {
        &self.scores
    }

    pub fn score_map(&self) -> BTreeMap<Emotion, f64> {
        Emotion::ALL.into_iter().map(|e| (e, self.score(e))).collect()
    }

    /// `None` when every score is zero.
    pub fn dominant(&self) -> Option<Emotion> {
        self.dominant
    }

    pub fn total_polarity(&self) -> f64 {
        self.total_polarity
    }

    pub fn flags(&self) -> &[ScoreFlag] {
        &self.flags
    }

    pub fn is_silent(&self) -> bool {
        self.flags.contains(&ScoreFlag::LexiconSilent)
    }

    pub fn is_fallback(&self) -> bool {
        self.flags.contains(&ScoreFlag::Fallback)
    }
}

/// Emotion with the largest absolute score; ties go to the earlier emotion.
pub fn dominant_by_magnitude(scores: &[f64; 7]) -> Option<Emotion> {
    let mut best: Option<(f64, Emotion)> = None;
    for e in Emotion::ALL {
        let magnitude = scores[e.index()].abs();
        if magnitude > 0.0 && best.is_none_or(|(b, _)| magnitude > b) {
            best = Some((magnitude, e));
        }
    }
    best.map(|(_, e)| e)
}

/// What happens to the running weight after a sentiment word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Back to 1, so modifiers only reach the next sentiment word.
    #[default]
    Reset,
    /// Kept for the rest of the text.
    Carry,
}

pub fn score_emotions<S: AsRef<str>>(
    tokens: &[S],
    lex: &Lexicon,
    fw: &FunctionWordTables,
) -> EmotionVector {
    score_emotions_with(tokens, lex, fw, WeightMode::Reset)
}

pub fn score_emotions_with<S: AsRef<str>>(
    tokens: &[S],
    lex: &Lexicon,
    fw: &FunctionWordTables,
    mode: WeightMode,
) -> EmotionVector {
    let mut scores = [0.0; 7];
    let mut weight = 1.0;
    for token in tokens {
        let token = token.as_ref();
        if let Some(entry) = lex.get(token) {
            let signed = weight * entry.sign();
            for (emotion, intensity) in &entry.emotions {
                scores[emotion.index()] += signed * intensity.value();
            }
            if mode == WeightMode::Reset {
                weight = 1.0;
            }
        } else if fw.is_negation(token) {
            weight = -weight;
        } else if let Some(multiplier) = fw.degree(token) {
            weight *= multiplier;
        }
    }
    EmotionVector::from_scores(scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerConfig {
    pub fallback_enabled: bool,
    pub fallback_positive_emotion: Emotion,
    pub fallback_negative_emotion: Emotion,
    pub weight_mode: WeightMode,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            fallback_enabled: true,
            fallback_positive_emotion: Emotion::Hopeful,
            fallback_negative_emotion: Emotion::Depressed,
            weight_mode: WeightMode::Reset,
        }
    }
}

/// Lexicon scoring, falling back to Naive Bayes when the lexicon says nothing.
///
/// A fallback vector puts the classifier's confidence (positive) or its
/// negation (negative) on the configured emotion and carries
/// [`ScoreFlag::Fallback`]. Its magnitudes are probabilities, not
/// intensities, so aggregates keep such vectors apart.
pub fn score_with_fallback<S: AsRef<str>>(
    tokens: &[S],
    lex: &Lexicon,
    fw: &FunctionWordTables,
    nb: &NbModel,
    cfg: &ScorerConfig,
) -> EmotionVector {
    let lexical = score_emotions_with(tokens, lex, fw, cfg.weight_mode);
    if !lexical.is_silent() || !cfg.fallback_enabled {
        return lexical;
    }
    fallback_vector(&nb.classify(tokens), cfg)
}

fn fallback_vector(result: &PolarityResult, cfg: &ScorerConfig) -> EmotionVector {
    let (emotion, value) = match result.label {
        Polarity::Positive => (cfg.fallback_positive_emotion, result.confidence),
        Polarity::Negative => (cfg.fallback_negative_emotion, -result.confidence),
    };
    let mut scores = [0.0; 7];
    scores[emotion.index()] = value;
    let mut vector = EmotionVector::from_scores(scores);
    vector.flags = vec![ScoreFlag::Fallback];
    vector
}

/// Everything needed to take a cleaned document to polarity and emotions.
#[derive(Debug, Clone)]
pub struct Analyzer {
    pub hmm: HmmModel,
    pub stopwords: StopwordList,
    pub lexicon: Lexicon,
    pub function_words: FunctionWordTables,
    pub nb: Option<NbModel>,
    pub config: ScorerConfig,
    /// Mined words re-joined after segmentation.
    pub new_words: BTreeSet<String>,
}

impl Analyzer {
    pub fn new(
        hmm: HmmModel,
        stopwords: StopwordList,
        lexicon: Lexicon,
        function_words: FunctionWordTables,
        nb: Option<NbModel>,
        config: ScorerConfig,
    ) -> Result<Self> {
        if config.fallback_enabled && nb.is_none() {
            return Err(Error::InvalidParameter(
                "fallback scoring needs a Naive Bayes model".into(),
            ));
        }
        Ok(Self {
            hmm,
            stopwords,
            lexicon,
            function_words,
            nb,
            config,
            new_words: BTreeSet::new(),
        })
    }

    pub fn with_new_words(mut self, words: BTreeSet<String>) -> Self {
        self.new_words = words;
        self
    }

    pub fn tokens(&self, doc: &Document) -> Vec<String> {
        let tokens = segment_pipeline(doc, &self.hmm, &self.stopwords);
        if self.new_words.is_empty() {
            tokens
        } else {
            merge_known_words(&tokens, &self.new_words)
        }
    }

    pub fn score_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> (Option<PolarityResult>, EmotionVector) {
        let polarity = self.nb.as_ref().map(|nb| nb.classify(tokens));
        let lexical = score_emotions_with(tokens, &self.lexicon, &self.function_words, self.config.weight_mode);
        let emotions = match &polarity {
            Some(result) if lexical.is_silent() && self.config.fallback_enabled => {
                fallback_vector(result, &self.config)
            }
            _ => lexical,
        };
        (polarity, emotions)
    }
}

/// Polarity and emotions for one document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentResult {
    pub id: String,
    pub fetched_at: DateTime<Utc>,
    pub polarity: Option<PolarityResult>,
    pub emotions: EmotionVector,
}

impl DocumentResult {
    pub fn to_record(&self) -> ResultRecord {
        ResultRecord {
            id: self.id.clone(),
            fetched_at: Some(self.fetched_at),
            label: self.polarity.map(|p| p.label),
            confidence: self.polarity.map(|p| p.confidence),
            emotions: self.emotions.score_map(),
            dominant: self.emotions.dominant(),
            total_polarity: self.emotions.total_polarity(),
            flags: self.emotions.flags().to_vec(),
        }
    }
}

pub fn document_emotion(doc: &Document, analyzer: &Analyzer) -> DocumentResult {
    let tokens = analyzer.tokens(doc);
    let (polarity, emotions) = analyzer.score_tokens(&tokens);
    DocumentResult {
        id: doc.id.clone(),
        fetched_at: doc.fetched_at,
        polarity,
        emotions,
    }
}

/// One line of the per-document results JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub id: String,
    #[serde(default)]
    pub fetched_at: Option<DateTime<Utc>>,
    pub label: Option<Polarity>,
    pub confidence: Option<f64>,
    pub emotions: BTreeMap<Emotion, f64>,
    pub dominant: Option<Emotion>,
    #[serde(default)]
    pub total_polarity: f64,
    #[serde(default)]
    pub flags: Vec<ScoreFlag>,
}

impl ResultRecord {
    pub fn emotion_vector(&self) -> EmotionVector {
        let scores = Emotion::ALL.map(|e| self.emotions.get(&e).copied().unwrap_or(0.0));
        let mut vector = EmotionVector::from_scores(scores);
        if self.flags.contains(&ScoreFlag::Fallback) {
            vector.flags = vec![ScoreFlag::Fallback];
        }
        vector
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{EntrySource, Intensity, SentimentEntry};
    use crate::polarity::{LabeledDoc, Weighting};
    use proptest::prelude::*;

    fn lexicon() -> Lexicon {
        Lexicon::parse_tsv(
            "高兴\tpositive\tHappy=7\n害怕\tnegative\tFrightened=5\n希望\tpositive\tHopeful=5;Happy=3\n愤怒\tnegative\tAngry=9\n",
            "lex",
        )
        .unwrap()
    }

    fn function_words() -> FunctionWordTables {
        FunctionWordTables::new(["不", "没有"], [("非常", 1.75), ("极其", 2.0), ("比较", 1.2), ("稍微", 0.8)]).unwrap()
    }

    fn nb() -> NbModel {
        let docs = [
            LabeledDoc { tokens: vec!["加油".into(), "春天".into()], label: Polarity::Positive },
            LabeledDoc { tokens: vec!["加油".into(), "感谢".into()], label: Polarity::Positive },
            LabeledDoc { tokens: vec!["封城".into(), "病毒".into()], label: Polarity::Negative },
        ];
        NbModel::train(&docs, Weighting::Bool).unwrap()
    }

    #[test]
    fn single_word() {
        let v = score_emotions(&["高兴"], &lexicon(), &function_words());
        assert_eq!(v.score(Emotion::Happy), 7.0);
        assert_eq!(v.dominant(), Some(Emotion::Happy));
        assert_eq!(v.total_polarity(), 7.0);
        assert!(v.flags().is_empty());
    }

    #[test]
    fn negation_flips() {
        let v = score_emotions(&["不", "高兴"], &lexicon(), &function_words());
        assert_eq!(v.score(Emotion::Happy), -7.0);
        assert_eq!(v.dominant(), Some(Emotion::Happy));
    }

    #[test]
    fn degree_adverb_scales_negative_word() {
        let v = score_emotions(&["非常", "害怕"], &lexicon(), &function_words());
        assert_eq!(v.score(Emotion::Frightened), -8.75);
        assert_eq!(v.dominant(), Some(Emotion::Frightened));
    }

    #[test]
    fn modifiers_compose_left_to_right() {
        let v = score_emotions(&["不", "非常", "高兴"], &lexicon(), &function_words());
        assert_eq!(v.score(Emotion::Happy), -12.25);
    }

    #[test]
    fn weight_resets_or_carries() {
        let tokens = ["不", "高兴", "害怕"];
        let reset = score_emotions(&tokens, &lexicon(), &function_words());
        assert_eq!(reset.score(Emotion::Frightened), -5.0);
        let carry = score_emotions_with(&tokens, &lexicon(), &function_words(), WeightMode::Carry);
        assert_eq!(carry.score(Emotion::Frightened), 5.0);
    }

    #[test]
    fn dominant_uses_absolute_value_and_order() {
        let v = score_emotions(&["高兴", "愤怒"], &lexicon(), &function_words());
        assert_eq!(v.dominant(), Some(Emotion::Angry));
        let mut scores = [0.0; 7];
        scores[Emotion::Happy.index()] = 3.0;
        scores[Emotion::Depressed.index()] = -3.0;
        assert_eq!(dominant_by_magnitude(&scores), Some(Emotion::Happy));
    }

    #[test]
    fn silent_vector_is_flagged() {
        let v = score_emotions(&["今天", "天气"], &lexicon(), &function_words());
        assert!(v.is_silent());
        assert_eq!(v.dominant(), None);
    }

    #[test]
    fn fallback_behaviour() {
        let lex = lexicon();
        let fw = function_words();
        let model = nb();
        let cfg = ScorerConfig::default();

        let hit = score_with_fallback(&["高兴", "加油"], &lex, &fw, &model, &cfg);
        assert_eq!(hit, score_emotions(&["高兴", "加油"], &lex, &fw));

        let fb = score_with_fallback(&["加油"], &lex, &fw, &model, &cfg);
        let expected = model.classify(&["加油"]);
        assert_eq!(expected.label, Polarity::Positive);
        assert_eq!(fb.score(Emotion::Hopeful), expected.confidence);
        assert_eq!(fb.flags(), &[ScoreFlag::Fallback]);
        assert_eq!(fb.dominant(), Some(Emotion::Hopeful));

        let neg = score_with_fallback(&["封城"], &lex, &fw, &model, &cfg);
        assert!(neg.score(Emotion::Depressed) < -0.5);

        let off = ScorerConfig { fallback_enabled: false, ..cfg };
        assert!(score_with_fallback(&["加油"], &lex, &fw, &model, &off).is_silent());
    }

    #[test]
    fn analyzer_requires_model_for_fallback() {
        let hmm = HmmModel::train(&[vec!["加油".to_string()]]).unwrap();
        let err = Analyzer::new(
            hmm,
            StopwordList::default(),
            lexicon(),
            function_words(),
            None,
            ScorerConfig::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn record_round_trip() {
        let v = score_emotions(&["高兴"], &lexicon(), &function_words());
        let result = DocumentResult {
            id: "d1".into(),
            fetched_at: DateTime::parse_from_rfc3339("2020-02-01T00:00:00Z").unwrap().into(),
            polarity: None,
            emotions: v.clone(),
        };
        let json = serde_json::to_string(&result.to_record()).unwrap();
        assert!(json.contains("\"Happy\":7.0"), "{json}");
        let back: ResultRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.emotion_vector(), v);
    }

    fn arb_sentiment() -> impl Strategy<Value = &'static str> {
        prop::sample::select(vec!["高兴", "害怕", "希望", "愤怒"])
    }

    fn arb_token() -> impl Strategy<Value = &'static str> {
        prop::sample::select(vec!["高兴", "害怕", "希望", "愤怒", "不", "没有", "非常", "极其", "比较", "稍微", "今天"])
    }

    fn close(a: &EmotionVector, b: &EmotionVector) -> bool {
        a.scores().iter().zip(b.scores()).all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(1.0))
    }

    proptest! {
        #[test]
        fn double_negation_is_identity(s in arb_sentiment(), neg in prop::sample::select(vec!["不", "没有"])) {
            let (lex, fw) = (lexicon(), function_words());
            prop_assert_eq!(score_emotions(&[neg, neg, s], &lex, &fw), score_emotions(&[s], &lex, &fw));
        }

        #[test]
        fn adjacent_adverbs_commute(
            prefix in prop::collection::vec(arb_token(), 0..6),
            a in prop::sample::select(vec!["非常", "极其", "比较", "稍微"]),
            b in prop::sample::select(vec!["非常", "极其", "比较", "稍微"]),
            suffix in prop::collection::vec(arb_token(), 0..6),
        ) {
            let (lex, fw) = (lexicon(), function_words());
            let mut x = prefix.clone();
            x.extend([a, b]);
            x.extend(&suffix);
            let mut y = prefix;
            y.extend([b, a]);
            y.extend(&suffix);
            prop_assert!(close(&score_emotions(&x, &lex, &fw), &score_emotions(&y, &lex, &fw)));
        }

        #[test]
        fn tripling_intensities_triples_scores(tokens in prop::collection::vec(arb_token(), 0..12)) {
            // levels {1,3} scale into {3,9}, which stay on the intensity scale
            let base = Lexicon::parse_tsv("高兴\tpositive\tHappy=1\n害怕\tnegative\tFrightened=3;Shocked=1\n希望\tpositive\tHopeful=3\n", "a").unwrap();
            let mut tripled = Lexicon::new();
            for entry in base.iter() {
                let emotions = entry.emotions.iter().map(|(e, i)| (*e, Intensity::new(i.get() * 3).unwrap())).collect();
                tripled.insert(SentimentEntry::new(entry.word.clone(), entry.polarity, emotions, EntrySource::Base).unwrap());
            }
            let fw = function_words();
            let a = score_emotions(&tokens, &base, &fw);
            let b = score_emotions(&tokens, &tripled, &fw);
            for e in Emotion::ALL {
                prop_assert!((b.score(e) - 3.0 * a.score(e)).abs() <= 1e-9 * b.score(e).abs().max(1.0));
            }
        }

        #[test]
        fn dominant_has_max_magnitude(tokens in prop::collection::vec(arb_token(), 0..12)) {
            let v = score_emotions(&tokens, &lexicon(), &function_words());
            match v.dominant() {
                None => prop_assert!(v.scores().iter().all(|s| *s == 0.0)),
                Some(d) => {
                    let m = v.score(d).abs();
                    for e in Emotion::ALL {
                        prop_assert!(v.score(e).abs() <= m);
                        if e < d { prop_assert!(v.score(e).abs() < m); }
                    }
                }
            }
        }

        #[test]
        fn reset_isolates_later_words(neg in prop::sample::select(vec!["不", "没有"]), s1 in arb_sentiment(), s2 in arb_sentiment()) {
            let (lex, fw) = (lexicon(), function_words());
            let with = score_emotions(&[neg, s1, s2], &lex, &fw);
            let first = score_emotions(&[neg, s1], &lex, &fw);
            let second = score_emotions(&[s2], &lex, &fw);
            for e in Emotion::ALL {
                prop_assert!((with.score(e) - (first.score(e) + second.score(e))).abs() < 1e-12);
            }
        }
    }
}

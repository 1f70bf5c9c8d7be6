//! Daily emotion series and hot-word rankings.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::emotion::{Emotion, ResultRecord};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::textprep::StopwordList;

pub const TRENDS_SCHEMA: &str = "trends-v1";
pub const HOTWORDS_SCHEMA: &str = "hotwords-v1";

/// One UTC day of aggregated results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub bucket: NaiveDate,
    /// Documents per dominant emotion; every emotion is present.
    pub counts: BTreeMap<Emotion, u64>,
    /// Mean absolute score per emotion over the bucket's lexicon-scored
    /// documents. Fallback documents are left out because their scores are
    /// classifier confidences.
    pub mean_scores: BTreeMap<Emotion, f64>,
    pub n_docs: u64,
    pub n_fallback: u64,
    pub n_lexicon_silent: u64,
}

/// Minimal per-document input for aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendInput {
    pub timestamp: Option<DateTime<Utc>>,
    pub scores: [f64; 7],
    pub dominant: Option<Emotion>,
    pub fallback: bool,
}

impl From<&ResultRecord> for TrendInput {
    fn from(record: &ResultRecord) -> Self {
        let vector = record.emotion_vector();
        Self {
            timestamp: record.fetched_at,
            scores: *vector.scores(),
            dominant: vector.dominant(),
            fallback: vector.is_fallback(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Bucket {
    counts: [u64; 7],
    abs_scores: [Vec<f64>; 7],
    n_docs: u64,
    n_fallback: u64,
    n_silent: u64,
}

impl Bucket {
    fn merge(&mut self, other: Bucket) {
        for i in 0..7 {
            self.counts[i] += other.counts[i];
        }
        for (mine, theirs) in self.abs_scores.iter_mut().zip(other.abs_scores) {
            mine.extend(theirs);
        }
        self.n_docs += other.n_docs;
        self.n_fallback += other.n_fallback;
        self.n_silent += other.n_silent;
    }

    fn finish(mut self, bucket: NaiveDate) -> TrendSeries {
        let scored = self.n_docs - self.n_fallback;
        let mut mean_scores = BTreeMap::new();
        for e in Emotion::ALL {
            let values = &mut self.abs_scores[e.index()];
            // summing in sorted order keeps the mean independent of input order
            values.sort_by(f64::total_cmp);
            let sum: f64 = values.iter().sum();
            let mean = if scored == 0 { 0.0 } else { sum / scored as f64 };
            mean_scores.insert(e, mean);
        }
        TrendSeries {
            bucket,
            counts: Emotion::ALL.into_iter().map(|e| (e, self.counts[e.index()])).collect(),
            mean_scores,
            n_docs: self.n_docs,
            n_fallback: self.n_fallback,
            n_lexicon_silent: self.n_silent,
        }
    }
}

/// Mergeable daily aggregation state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrendAccumulator {
    buckets: BTreeMap<NaiveDate, Bucket>,
    skipped: u64,
}

impl TrendAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, input: &TrendInput) {
        let Some(ts) = input.timestamp else {
            self.skipped += 1;
            return;
        };
        let bucket = self.buckets.entry(ts.date_naive()).or_default();
        bucket.n_docs += 1;
        match input.dominant {
            Some(e) => bucket.counts[e.index()] += 1,
            None => bucket.n_silent += 1,
        }
        if input.fallback {
            bucket.n_fallback += 1;
        } else {
            for e in Emotion::ALL {
                bucket.abs_scores[e.index()].push(input.scores[e.index()].abs());
            }
        }
    }

    pub fn merge(&mut self, other: TrendAccumulator) {
        self.skipped += other.skipped;
        for (day, bucket) in other.buckets {
            self.buckets.entry(day).or_default().merge(bucket);
        }
    }

    /// Records dropped for lacking a timestamp.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn finish(self) -> TrendReport {
        TrendReport {
            schema: TRENDS_SCHEMA.to_string(),
            skipped: self.skipped,
            series: self.buckets.into_iter().map(|(day, b)| b.finish(day)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub schema: String,
    pub skipped: u64,
    pub series: Vec<TrendSeries>,
}

impl TrendReport {
    pub fn total_docs(&self) -> u64 {
        self.series.iter().map(|s| s.n_docs).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut header = vec!["bucket".to_string(), "n_docs".into(), "n_fallback".into(), "n_lexicon_silent".into()];
        header.extend(Emotion::ALL.iter().map(|e| format!("count_{e}")));
        header.extend(Emotion::ALL.iter().map(|e| format!("mean_{e}")));
        let mut rows = vec![header];
        for s in &self.series {
            let mut row = vec![
                s.bucket.to_string(),
                s.n_docs.to_string(),
                s.n_fallback.to_string(),
                s.n_lexicon_silent.to_string(),
            ];
            row.extend(Emotion::ALL.iter().map(|e| s.counts[e].to_string()));
            row.extend(Emotion::ALL.iter().map(|e| s.mean_scores[e].to_string()));
            rows.push(row);
        }
        write_csv(rows)
    }
}

pub fn aggregate<'a, I>(records: I) -> TrendReport
where
    I: IntoIterator<Item = &'a TrendInput>,
{
    let mut acc = TrendAccumulator::new();
    for record in records {
        acc.add(record);
    }
    acc.finish()
}

pub fn aggregate_records<'a, I>(records: I) -> TrendReport
where
    I: IntoIterator<Item = &'a ResultRecord>,
{
    let mut acc = TrendAccumulator::new();
    for record in records {
        acc.add(&TrendInput::from(record));
    }
    acc.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotWord {
    pub word: String,
    pub freq: u64,
    pub tfidf: f64,
    /// Signed intensities of the word's lexicon entry, zero when absent.
    pub emotion_profile: BTreeMap<Emotion, f64>,
}

/// Top `k` words by `freq * (ln((N+1)/(df+1)) + 1)`.
///
/// Ties are broken by frequency, then by the word itself.
pub fn hot_words<S: AsRef<str>>(
    tokens_by_doc: &[Vec<S>],
    k: usize,
    stops: &StopwordList,
    lexicon: &Lexicon,
) -> Result<Vec<HotWord>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    let mut df: BTreeMap<&str, u64> = BTreeMap::new();
    for doc in tokens_by_doc {
        let mut seen = BTreeSet::new();
        for token in doc {
            let token = token.as_ref();
            if token.trim().is_empty() || stops.contains(token) {
                continue;
            }
            *freq.entry(token).or_default() += 1;
            if seen.insert(token) {
                *df.entry(token).or_default() += 1;
            }
        }
    }
    let n = tokens_by_doc.len() as f64;
    let mut ranked: Vec<(&str, u64, f64)> = freq
        .into_iter()
        .map(|(w, f)| {
            let idf = ((n + 1.0) / (df[w] as f64 + 1.0)).ln() + 1.0;
            (w, f, f as f64 * idf)
        })
        .collect();
    ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then(b.1.cmp(&a.1)).then(a.0.cmp(b.0)));
    ranked.truncate(k);
    Ok(ranked
        .into_iter()
        .map(|(word, freq, tfidf)| HotWord {
            word: word.to_string(),
            freq,
            tfidf,
            emotion_profile: emotion_profile(word, lexicon),
        })
        .collect())
}

fn emotion_profile(word: &str, lexicon: &Lexicon) -> BTreeMap<Emotion, f64> {
    let mut profile: BTreeMap<Emotion, f64> = Emotion::ALL.into_iter().map(|e| (e, 0.0)).collect();
    if let Some(entry) = lexicon.get(word) {
        for (e, i) in &entry.emotions {
            profile.insert(*e, entry.sign() * i.value());
        }
    }
    profile
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotWordsFile {
    pub schema: String,
    pub words: Vec<HotWord>,
}

impl HotWordsFile {
    pub fn new(words: Vec<HotWord>) -> Self {
        Self {
            schema: HOTWORDS_SCHEMA.to_string(),
            words,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut header = vec!["word".to_string(), "freq".into(), "tfidf".into()];
        header.extend(Emotion::ALL.iter().map(|e| e.to_string()));
        let mut rows = vec![header];
        for w in &self.words {
            let mut row = vec![w.word.clone(), w.freq.to_string(), w.tfidf.to_string()];
            row.extend(Emotion::ALL.iter().map(|e| w.emotion_profile[e].to_string()));
            rows.push(row);
        }
        write_csv(rows)
    }
}

fn write_csv(rows: Vec<Vec<String>>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .write_record(&row)
            .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    }
    let mut bytes = writer
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    bytes.flush()?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(format!("csv: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn input(day: u32, hour: u32, dominant: Option<Emotion>, fallback: bool) -> TrendInput {
        let mut scores = [0.0; 7];
        if let Some(e) = dominant {
            scores[e.index()] = if fallback { 0.8 } else { -3.5 };
        }
        TrendInput {
            timestamp: Some(Utc.with_ymd_and_hms(2020, 2, day, hour, 0, 0).unwrap()),
            scores,
            dominant,
            fallback,
        }
    }

    #[test]
    fn counts_dominants_per_day() {
        let rows = [
            input(1, 1, Some(Emotion::Happy), false),
            input(1, 9, Some(Emotion::Happy), false),
            input(1, 23, Some(Emotion::Angry), false),
        ];
        let report = aggregate(&rows);
        assert_eq!(report.series.len(), 1);
        let s = &report.series[0];
        assert_eq!(s.counts[&Emotion::Happy], 2);
        assert_eq!(s.counts[&Emotion::Angry], 1);
        assert_eq!(s.counts[&Emotion::Hopeful], 0);
        assert_eq!(s.n_docs, 3);
        assert_eq!(s.mean_scores[&Emotion::Happy], 7.0 / 3.0);
    }

    #[test]
    fn empty_stream() {
        let report = aggregate(&[]);
        assert!(report.series.is_empty());
        assert_eq!(report.to_json().unwrap(), "{\n  \"schema\": \"trends-v1\",\n  \"skipped\": 0,\n  \"series\": []\n}\n");
    }

    #[test]
    fn missing_timestamp_is_skipped() {
        let mut row = input(1, 0, Some(Emotion::Happy), false);
        row.timestamp = None;
        let report = aggregate(&[row, input(2, 0, None, false)]);
        assert_eq!(report.skipped, 1);
        assert_eq!(report.total_docs(), 1);
        assert_eq!(report.series[0].n_lexicon_silent, 1);
    }

    #[test]
    fn fallback_docs_counted_but_not_averaged() {
        let report = aggregate(&[input(3, 0, Some(Emotion::Hopeful), true), input(3, 1, Some(Emotion::Depressed), false)]);
        let s = &report.series[0];
        assert_eq!(s.n_fallback, 1);
        assert_eq!(s.counts[&Emotion::Hopeful], 1);
        assert_eq!(s.mean_scores[&Emotion::Hopeful], 0.0);
        assert_eq!(s.mean_scores[&Emotion::Depressed], 3.5);
    }

    #[test]
    fn utc_day_boundaries() {
        let a = TrendInput { timestamp: Some(Utc.with_ymd_and_hms(2020, 2, 1, 23, 59, 59).unwrap()), ..input(1, 0, None, false) };
        let b = TrendInput { timestamp: Some(Utc.with_ymd_and_hms(2020, 2, 2, 0, 0, 0).unwrap()), ..input(1, 0, None, false) };
        let report = aggregate(&[b, a]);
        assert_eq!(report.series.len(), 2);
        assert!(report.series[0].bucket < report.series[1].bucket);
    }

    #[test]
    fn csv_mirrors_json_values() {
        let report = aggregate(&[input(1, 0, Some(Emotion::Shocked), false)]);
        let csv = report.to_csv().unwrap();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("bucket,n_docs,n_fallback,n_lexicon_silent,count_Hopeful"));
        assert!(lines.next().unwrap().starts_with("2020-02-01,1,0,0,0,0,0,0,0,0,1,"));
    }

    #[test]
    fn idf_is_one_for_ubiquitous_words() {
        let docs = vec![vec!["疫情", "加油"], vec!["疫情"], vec!["疫情", "疫情"]];
        let words = hot_words(&docs, 10, &StopwordList::default(), &Lexicon::new()).unwrap();
        assert_eq!(words[0].word, "疫情");
        assert_eq!(words[0].tfidf, 4.0);
        assert_eq!(words[0].freq, 4);
    }

    #[test]
    fn planted_rare_word_outranks_uniform_word() {
        // 5 docs: 口罩 appears once in every doc; 抢购 appears 4 times in doc 0.
        // tfidf(口罩) = 5 * 1 = 5; tfidf(抢购) = 4 * (ln(6/2) + 1) = 8.394...
        let mut docs: Vec<Vec<&str>> = (0..5).map(|_| vec!["口罩"]).collect();
        docs[0].extend(["抢购"; 4]);
        let words = hot_words(&docs, 1, &StopwordList::default(), &Lexicon::new()).unwrap();
        assert_eq!(words[0].word, "抢购");
        assert!((words[0].tfidf - 4.0 * (3.0f64.ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn hot_words_skip_stopwords_and_clip_k() {
        let docs = vec![vec!["的", "武汉", "加油"]];
        let stops = StopwordList::new(["的"], "t");
        let lex = Lexicon::parse_tsv("加油\tpositive\tHopeful=7\n", "l").unwrap();
        let words = hot_words(&docs, 50, &stops, &lex).unwrap();
        assert_eq!(words.iter().map(|w| w.word.as_str()).collect::<Vec<_>>(), ["加油", "武汉"]);
        assert_eq!(words[0].emotion_profile[&Emotion::Hopeful], 7.0);
        assert_eq!(words[1].emotion_profile[&Emotion::Hopeful], 0.0);
        assert!(hot_words(&docs, 0, &stops, &lex).is_err());
    }

    fn arb_input() -> impl Strategy<Value = TrendInput> {
        (
            prop::option::weighted(0.9, 0i64..(10 * 86_400)),
            prop::array::uniform7(-20.0f64..20.0),
            prop::option::of(0usize..7),
            any::<bool>(),
        )
            .prop_map(|(ts, scores, dom, fallback)| TrendInput {
                timestamp: ts.map(|s| DateTime::from_timestamp(1_580_000_000 + s, 0).unwrap()),
                scores,
                dominant: dom.map(|i| Emotion::ALL[i]),
                fallback,
            })
    }

    proptest! {
        #[test]
        fn conservation_and_order(rows in prop::collection::vec(arb_input(), 0..120)) {
            let report = aggregate(&rows);
            let with_ts = rows.iter().filter(|r| r.timestamp.is_some()).count() as u64;
            prop_assert_eq!(report.total_docs(), with_ts);
            prop_assert_eq!(report.skipped, rows.len() as u64 - with_ts);
            for s in &report.series {
                prop_assert_eq!(s.counts.values().sum::<u64>() + s.n_lexicon_silent, s.n_docs);
            }
            prop_assert!(report.series.windows(2).all(|w| w[0].bucket < w[1].bucket));
        }

        #[test]
        fn permutation_and_sharding_invariant(rows in prop::collection::vec(arb_input(), 0..80), seed: u64, cut in 0usize..80) {
            let whole = aggregate(&rows);
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(&aggregate(&shuffled), &whole);

            let cut = cut.min(shuffled.len());
            let mut left = TrendAccumulator::new();
            shuffled[..cut].iter().for_each(|r| left.add(r));
            let mut right = TrendAccumulator::new();
            shuffled[cut..].iter().for_each(|r| right.add(r));
            right.merge(left);
            prop_assert_eq!(right.finish(), whole);
        }

        #[test]
        fn hot_words_ignore_doc_order(
            docs in prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 0..6), 0..12),
            seed: u64,
        ) {
            let lex = Lexicon::new();
            let stops = StopwordList::default();
            let before = hot_words(&docs, 3, &stops, &lex).unwrap();
            let mut shuffled = docs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(hot_words(&shuffled, 3, &stops, &lex).unwrap(), before);
        }
    }
}

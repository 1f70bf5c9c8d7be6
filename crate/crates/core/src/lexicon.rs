//! Sentiment knowledge base.
//!
//! A [`Lexicon`] is merged from tab-separated dictionaries, grown with SO-PMI
//! scores computed over a domain corpus, and fed with new words that burst on
//! the most recent day of a time-sliced comment stream.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::emotion::Emotion;
use crate::error::{Error, Result};
use crate::polarity::Polarity;
use crate::segmenter::is_han;

/// Emotion intensity; only the odd levels 1, 3, 5, 7 and 9 exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Intensity(u8);

impl Intensity {
    pub const LEVELS: [u8; 5] = [1, 3, 5, 7, 9];

    pub fn new(level: u8) -> Result<Self> {
        if Self::LEVELS.contains(&level) {
            Ok(Self(level))
        } else {
            Err(Error::InvalidParameter(format!(
                "intensity must be one of 1,3,5,7,9, got {level}"
            )))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0)
    }
}

impl TryFrom<u8> for Intensity {
    type Error = Error;

    fn try_from(level: u8) -> Result<Self> {
        Self::new(level)
    }
}

impl From<Intensity> for u8 {
    fn from(i: Intensity) -> u8 {
        i.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntrySource {
    #[default]
    Base,
    SoPmi,
    NewWord,
}

impl EntrySource {
    pub fn as_str(self) -> &'static str {
        match self {
            EntrySource::Base => "base",
            EntrySource::SoPmi => "so_pmi",
            EntrySource::NewWord => "new_word",
        }
    }
}

impl FromStr for EntrySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(EntrySource::Base),
            "so_pmi" => Ok(EntrySource::SoPmi),
            "new_word" => Ok(EntrySource::NewWord),
            other => Err(Error::InvalidInput(format!("unknown entry source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentimentEntry {
    pub word: String,
    pub polarity: Option<Polarity>,
    pub emotions: BTreeMap<Emotion, Intensity>,
    pub source: EntrySource,
}

impl SentimentEntry {
    pub fn new(
        word: impl Into<String>,
        polarity: Option<Polarity>,
        emotions: BTreeMap<Emotion, Intensity>,
        source: EntrySource,
    ) -> Result<Self> {
        let word = word.into();
        if word.is_empty() {
            return Err(Error::InvalidInput("lexicon word is empty".into()));
        }
        if polarity.is_none() && emotions.is_empty() {
            return Err(Error::InvalidInput(format!(
                "entry {word:?} has neither polarity nor emotions"
            )));
        }
        Ok(Self {
            word,
            polarity,
            emotions,
            source,
        })
    }

    /// Sign applied to this word's intensities. Entries without a polarity
    /// take the valence of their strongest emotion.
    pub fn sign(&self) -> f64 {
        match self.polarity {
            Some(p) => p.sign(),
            None => self
                .emotions
                .iter()
                .max_by_key(|(e, i)| (**i, std::cmp::Reverse(**e)))
                .map_or(1.0, |(e, _)| e.valence()),
        }
    }

    fn to_tsv_line(&self) -> String {
        let polarity = self.polarity.map_or("-", Polarity::as_str);
        let emotions = if self.emotions.is_empty() {
            "-".to_string()
        } else {
            self.emotions
                .iter()
                .map(|(e, i)| format!("{e}={}", i.get()))
                .collect::<Vec<_>>()
                .join(";")
        };
        let mut line = format!("{}\t{polarity}\t{emotions}", self.word);
        if self.source != EntrySource::Base {
            line.push('\t');
            line.push_str(self.source.as_str());
        }
        line
    }
}

/// Words with polarity and emotion intensities, keyed by surface form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, SentimentEntry>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, word: &str) -> Option<&SentimentEntry> {
        self.entries.get(word)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    /// Inserts or replaces an entry, returning the previous one.
    pub fn insert(&mut self, entry: SentimentEntry) -> Option<SentimentEntry> {
        self.entries.insert(entry.word.clone(), entry)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SentimentEntry> {
        self.entries.values()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Parses dictionary TSV: `word<TAB>polarity<TAB>emotions[<TAB>source]`.
    ///
    /// `polarity` is `positive`, `negative` or `-`; `emotions` is a
    /// `;`-separated list of `Emotion=intensity` or `-`. Blank lines and lines
    /// starting with `#` are skipped. Within one file a later line replaces an
    /// earlier one for the same word.
    pub fn parse_tsv(text: &str, file: impl AsRef<Path>) -> Result<Self> {
        let file = file.as_ref();
        let mut lexicon = Lexicon::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let entry = parse_entry(line).map_err(|msg| Error::parse(file, n + 1, msg))?;
            lexicon.insert(entry);
        }
        Ok(lexicon)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse_tsv(&std::fs::read_to_string(path)?, path)
    }

    /// Overlays `other` on `self`; entries in `other` win.
    pub fn merge(&mut self, other: Lexicon) {
        self.entries.extend(other.entries);
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# word\tpolarity\temotions\tsource\n");
        for entry in self.entries.values() {
            out.push_str(&entry.to_tsv_line());
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }
}

fn parse_entry(line: &str) -> std::result::Result<SentimentEntry, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if !(2..=4).contains(&cols.len()) {
        return Err(format!("expected 2 to 4 tab-separated columns, found {}", cols.len()));
    }
    let word = cols[0].trim();
    let polarity = match cols[1].trim() {
        "" | "-" | "none" => None,
        p => Some(p.parse::<Polarity>().map_err(|e| e.to_string())?),
    };
    let mut emotions = BTreeMap::new();
    if let Some(spec) = cols.get(2).map(|s| s.trim()).filter(|s| !s.is_empty() && *s != "-") {
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, level) = part
                .split_once('=')
                .ok_or_else(|| format!("emotion {part:?} is not Name=intensity"))?;
            let emotion: Emotion = name.trim().parse().map_err(|e: Error| e.to_string())?;
            let level: u8 = level
                .trim()
                .parse()
                .map_err(|_| format!("intensity {level:?} is not an integer"))?;
            let intensity = Intensity::new(level).map_err(|e| e.to_string())?;
            emotions.insert(emotion, intensity);
        }
    }
    let source = match cols.get(3).map(|s| s.trim()) {
        None | Some("") => EntrySource::Base,
        Some(s) => s.parse().map_err(|e: Error| e.to_string())?,
    };
    SentimentEntry::new(word, polarity, emotions, source).map_err(|e| e.to_string())
}

/// Loads dictionaries in priority order: on a word collision the file that
/// comes later in `files` wins.
pub fn load_merge_dictionaries<P: AsRef<Path>>(files: &[P]) -> Result<Lexicon> {
    let mut merged = Lexicon::new();
    for file in files {
        merged.merge(Lexicon::load(file)?);
    }
    Ok(merged)
}

/// Negation words and degree adverbs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FunctionWordTables {
    negations: BTreeSet<String>,
    degree_adverbs: BTreeMap<String, f64>,
}

impl FunctionWordTables {
    pub fn new<I, S, D, T>(negations: I, degree_adverbs: D) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
        D: IntoIterator<Item = (T, f64)>,
        T: Into<String>,
    {
        let mut tables = Self::default();
        for word in negations {
            tables.negations.insert(word.into());
        }
        for (word, multiplier) in degree_adverbs {
            let word = word.into();
            check_multiplier(&word, multiplier).map_err(Error::InvalidParameter)?;
            tables.degree_adverbs.insert(word, multiplier);
        }
        tables.check_disjoint().map_err(Error::InvalidParameter)?;
        Ok(tables)
    }

    /// Parses `word<TAB>neg` and `word<TAB>deg<TAB>multiplier` lines.
    pub fn parse_tsv(text: &str, file: impl AsRef<Path>) -> Result<Self> {
        let file = file.as_ref();
        let mut tables = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            let fail = |msg: String| Error::parse(file, n + 1, msg);
            match cols.as_slice() {
                [word, "neg"] if !word.is_empty() => {
                    tables.negations.insert(word.to_string());
                }
                [word, "deg", multiplier] if !word.is_empty() => {
                    let value: f64 = multiplier
                        .parse()
                        .map_err(|_| fail(format!("multiplier {multiplier:?} is not a number")))?;
                    check_multiplier(word, value).map_err(fail)?;
                    tables.degree_adverbs.insert(word.to_string(), value);
                }
                _ => return Err(fail(format!("expected `word\\tneg` or `word\\tdeg\\tmultiplier`, got {line:?}"))),
            }
        }
        tables.check_disjoint().map_err(|msg| Error::parse(file, 0, msg))?;
        Ok(tables)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse_tsv(&std::fs::read_to_string(path)?, path)
    }

    pub fn is_negation(&self, word: &str) -> bool {
        self.negations.contains(word)
    }

    pub fn degree(&self, word: &str) -> Option<f64> {
        self.degree_adverbs.get(word).copied()
    }

    pub fn negations(&self) -> impl Iterator<Item = &str> {
        self.negations.iter().map(String::as_str)
    }

    pub fn degree_adverbs(&self) -> impl Iterator<Item = (&str, f64)> {
        self.degree_adverbs.iter().map(|(w, m)| (w.as_str(), *m))
    }

    fn check_disjoint(&self) -> std::result::Result<(), String> {
        match self.negations.iter().find(|w| self.degree_adverbs.contains_key(*w)) {
            Some(w) => Err(format!("{w:?} is both a negation and a degree adverb")),
            None => Ok(()),
        }
    }
}

fn check_multiplier(word: &str, value: f64) -> std::result::Result<(), String> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(format!("degree multiplier for {word:?} must be positive, got {value}"))
    }
}

/// Default co-occurrence radius in tokens.
pub const DEFAULT_WINDOW: usize = 5;

/// Windowed co-occurrence counts over tokenized sentences.
///
/// Two tokens co-occur when they sit at most `window` positions apart in the
/// same sentence. Pair counts are stored once per unordered pair, so lookups
/// are symmetric.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CooccurrenceStats {
    window: usize,
    word_count: HashMap<String, u64>,
    pair_count: HashMap<(String, String), u64>,
    total_tokens: u64,
}

impl CooccurrenceStats {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            ..Self::default()
        }
    }

    pub fn from_sentences<S: AsRef<str>>(sentences: &[Vec<S>], window: usize) -> Self {
        let mut stats = Self::new(window);
        for sentence in sentences {
            stats.add_sentence(sentence);
        }
        stats
    }

    pub fn add_sentence<S: AsRef<str>>(&mut self, tokens: &[S]) {
        for (i, token) in tokens.iter().enumerate() {
            let a = token.as_ref();
            *self.word_count.entry(a.to_string()).or_default() += 1;
            self.total_tokens += 1;
            for other in tokens.iter().skip(i + 1).take(self.window) {
                *self.pair_count.entry(pair_key(a, other.as_ref())).or_default() += 1;
            }
        }
    }

    /// Adds another shard's counts. Both shards must use the same window.
    pub fn merge(&mut self, other: &CooccurrenceStats) -> Result<()> {
        if self.window != other.window {
            return Err(Error::InvalidParameter(format!(
                "cannot merge windows {} and {}",
                self.window, other.window
            )));
        }
        for (w, c) in &other.word_count {
            *self.word_count.entry(w.clone()).or_default() += c;
        }
        for (p, c) in &other.pair_count {
            *self.pair_count.entry(p.clone()).or_default() += c;
        }
        self.total_tokens += other.total_tokens;
        Ok(())
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn count(&self, word: &str) -> u64 {
        self.word_count.get(word).copied().unwrap_or(0)
    }

    pub fn pair(&self, a: &str, b: &str) -> u64 {
        self.pair_count.get(&pair_key(a, b)).copied().unwrap_or(0)
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = (&str, u64)> {
        self.word_count.iter().map(|(w, c)| (w.as_str(), *c))
    }

    /// Pointwise mutual information in bits,
    /// `log2((pair(a,b) + smoothing) * total / (count(a) * count(b)))`.
    /// An unobserved `b` is counted as one occurrence so the value stays finite.
    pub fn pmi(&self, a: &str, b: &str, smoothing: f64) -> f64 {
        let joint = self.pair(a, b) as f64 + smoothing;
        let ca = self.count(a) as f64;
        let cb = self.count(b).max(1) as f64;
        (joint * self.total_tokens as f64 / (ca * cb)).log2()
    }
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Add-one smoothing on pair counts used by [`so_pmi`].
pub const PAIR_SMOOTHING: f64 = 1.0;

/// Semantic orientation of `word`: summed PMI with the positive seeds minus
/// summed PMI with the negative seeds.
pub fn so_pmi(
    stats: &CooccurrenceStats,
    word: &str,
    pos_seeds: &BTreeSet<String>,
    neg_seeds: &BTreeSet<String>,
) -> Result<f64> {
    so_pmi_smoothed(stats, word, pos_seeds, neg_seeds, PAIR_SMOOTHING)
}

/// [`so_pmi`] with an explicit pair-count smoothing constant.
pub fn so_pmi_smoothed(
    stats: &CooccurrenceStats,
    word: &str,
    pos_seeds: &BTreeSet<String>,
    neg_seeds: &BTreeSet<String>,
    smoothing: f64,
) -> Result<f64> {
    if pos_seeds.is_empty() || neg_seeds.is_empty() {
        return Err(Error::InvalidInput("SO-PMI needs positive and negative seeds".into()));
    }
    if stats.count(word) == 0 {
        return Err(Error::NotInCorpus(word.to_string()));
    }
    let sum = |seeds: &BTreeSet<String>| -> f64 {
        seeds.iter().map(|s| stats.pmi(word, s, smoothing)).sum()
    };
    Ok(sum(pos_seeds) - sum(neg_seeds))
}

/// Emotion given to words whose polarity comes from SO-PMI alone.
pub fn default_emotion(polarity: Polarity) -> (Emotion, Intensity) {
    match polarity {
        Polarity::Positive => (Emotion::Hopeful, Intensity(5)),
        Polarity::Negative => (Emotion::Depressed, Intensity(5)),
    }
}

/// Adds candidates whose SO-PMI magnitude reaches `threshold`.
///
/// Existing entries are never touched and candidates absent from the
/// corpus are skipped, so the output always contains the input.
pub fn expand_lexicon(
    lex: &Lexicon,
    stats: &CooccurrenceStats,
    candidates: &BTreeSet<String>,
    pos_seeds: &BTreeSet<String>,
    neg_seeds: &BTreeSet<String>,
    threshold: f64,
) -> Result<Lexicon> {
    expand_lexicon_as(lex, stats, candidates, pos_seeds, neg_seeds, threshold, EntrySource::SoPmi)
}

/// [`expand_lexicon`] recording `source` on the added entries.
pub fn expand_lexicon_as(
    lex: &Lexicon,
    stats: &CooccurrenceStats,
    candidates: &BTreeSet<String>,
    pos_seeds: &BTreeSet<String>,
    neg_seeds: &BTreeSet<String>,
    threshold: f64,
    source: EntrySource,
) -> Result<Lexicon> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "expansion threshold must be positive, got {threshold}"
        )));
    }
    let mut out = lex.clone();
    for word in candidates {
        if out.contains(word) {
            continue;
        }
        let score = match so_pmi(stats, word, pos_seeds, neg_seeds) {
            Ok(score) => score,
            Err(Error::NotInCorpus(_)) => continue,
            Err(e) => return Err(e),
        };
        let polarity = if score >= threshold {
            Polarity::Positive
        } else if score <= -threshold {
            Polarity::Negative
        } else {
            continue;
        };
        let (emotion, intensity) = default_emotion(polarity);
        out.insert(SentimentEntry {
            word: word.clone(),
            polarity: Some(polarity),
            emotions: BTreeMap::from([(emotion, intensity)]),
            source,
        });
    }
    Ok(out)
}

/// Thresholds for [`mine_new_words`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinerParams {
    pub min_freq: u64,
    /// Bits.
    pub min_cohesion: f64,
    /// Bits.
    pub min_boundary_entropy: f64,
    pub min_burst_ratio: f64,
}

impl Default for MinerParams {
    fn default() -> Self {
        Self {
            min_freq: 5,
            min_cohesion: 1.0,
            min_boundary_entropy: 1.0,
            min_burst_ratio: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewWordCandidate {
    pub ngram: String,
    pub freq_today: u64,
    /// Mean occurrences per baseline day.
    pub freq_baseline: f64,
    /// Minimum PMI in bits over the binary splits of the n-gram.
    pub cohesion: f64,
    /// Smaller of the left and right neighbour entropies, in bits.
    pub boundary_entropy: f64,
    /// `(freq_today + 1) / (freq_baseline + 1)`.
    pub burst_ratio: f64,
}

pub const MIN_NGRAM: usize = 2;
pub const MAX_NGRAM: usize = 4;

/// Finds character n-grams (2 to 4 Han characters) that burst on the last
/// slice relative to the average of the earlier slices.
///
/// Each slice is a list of text fragments; n-grams never cross a fragment or
/// a non-Han character. Cohesion and boundary entropy are measured on the
/// last slice only. A fragment edge counts as a distinct neighbour for every
/// occurrence, so an n-gram that fills its fragment reads as free-standing.
/// Words in `known` are never reported.
pub fn mine_new_words<S: AsRef<str>>(
    daily_slices: &[Vec<S>],
    params: &MinerParams,
    known: &BTreeSet<String>,
) -> Result<Vec<NewWordCandidate>> {
    let Some((today, baseline)) = daily_slices.split_last().filter(|(_, b)| !b.is_empty()) else {
        return Err(Error::InvalidInput(format!(
            "new-word mining needs at least 2 slices, got {}",
            daily_slices.len()
        )));
    };
    for (name, value) in [
        ("min_cohesion", params.min_cohesion),
        ("min_boundary_entropy", params.min_boundary_entropy),
        ("min_burst_ratio", params.min_burst_ratio),
    ] {
        if !(value >= 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {value}")));
        }
    }

    let today_runs = han_runs(today);
    let counts = ngram_counts(&today_runs, 1, MAX_NGRAM);
    let total_chars: u64 = today_runs.iter().map(|r| r.len() as u64).sum();

    let mut baseline_counts: HashMap<String, u64> = HashMap::new();
    for slice in baseline {
        for (g, c) in ngram_counts(&han_runs(slice), MIN_NGRAM, MAX_NGRAM) {
            *baseline_counts.entry(g).or_default() += c;
        }
    }
    let baseline_days = baseline.len() as f64;

    let mut candidates: Vec<NewWordCandidate> = counts
        .iter()
        .filter(|(g, c)| {
            let n = g.chars().count();
            (MIN_NGRAM..=MAX_NGRAM).contains(&n) && **c >= params.min_freq && !known.contains(*g)
        })
        .filter_map(|(g, &freq_today)| {
            let chars: Vec<char> = g.chars().collect();
            let freq_baseline = baseline_counts.get(g).copied().unwrap_or(0) as f64 / baseline_days;
            let burst_ratio = (freq_today as f64 + 1.0) / (freq_baseline + 1.0);
            if burst_ratio < params.min_burst_ratio {
                return None;
            }
            let cohesion = cohesion(&chars, &counts, total_chars);
            if cohesion < params.min_cohesion {
                return None;
            }
            let boundary_entropy = boundary_entropy(&chars, &today_runs);
            if boundary_entropy < params.min_boundary_entropy {
                return None;
            }
            Some(NewWordCandidate {
                ngram: g.clone(),
                freq_today,
                freq_baseline,
                cohesion,
                boundary_entropy,
                burst_ratio,
            })
        })
        .collect();

    candidates.sort_by(|a, b| {
        b.burst_ratio
            .total_cmp(&a.burst_ratio)
            .then(b.freq_today.cmp(&a.freq_today))
            .then_with(|| a.ngram.cmp(&b.ngram))
    });
    Ok(candidates)
}

fn han_runs<S: AsRef<str>>(fragments: &[S]) -> Vec<Vec<char>> {
    let mut runs = Vec::new();
    for fragment in fragments {
        let mut current = Vec::new();
        for c in fragment.as_ref().chars() {
            if is_han(c) {
                current.push(c);
            } else if !current.is_empty() {
                runs.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            runs.push(current);
        }
    }
    runs
}

fn ngram_counts(runs: &[Vec<char>], min: usize, max: usize) -> HashMap<String, u64> {
    let mut counts = HashMap::new();
    for run in runs {
        for n in min..=max {
            for window in run.windows(n) {
                *counts.entry(window.iter().collect::<String>()).or_default() += 1;
            }
        }
    }
    counts
}

fn cohesion(chars: &[char], counts: &HashMap<String, u64>, total: u64) -> f64 {
    let count = |s: &[char]| counts.get(&s.iter().collect::<String>()).copied().unwrap_or(0) as f64;
    let whole = count(chars);
    (1..chars.len())
        .map(|split| {
            let (left, right) = chars.split_at(split);
            (whole * total as f64 / (count(left) * count(right))).log2()
        })
        .fold(f64::INFINITY, f64::min)
}

fn boundary_entropy(chars: &[char], runs: &[Vec<char>]) -> f64 {
    let n = chars.len();
    let mut left: HashMap<char, u64> = HashMap::new();
    let mut right: HashMap<char, u64> = HashMap::new();
    let (mut left_edges, mut right_edges) = (0u64, 0u64);
    let mut occurrences = 0u64;
    for run in runs {
        for start in 0..run.len().saturating_sub(n - 1) {
            if run[start..start + n] != *chars {
                continue;
            }
            occurrences += 1;
            match start.checked_sub(1) {
                Some(i) => *left.entry(run[i]).or_default() += 1,
                None => left_edges += 1,
            }
            match run.get(start + n) {
                Some(c) => *right.entry(*c).or_default() += 1,
                None => right_edges += 1,
            }
        }
    }
    if occurrences == 0 {
        return 0.0;
    }
    let entropy = |neighbours: &HashMap<char, u64>, edges: u64| -> f64 {
        let total = occurrences as f64;
        let mut h: f64 = neighbours
            .values()
            .map(|c| {
                let p = *c as f64 / total;
                -p * p.log2()
            })
            .sum();
        if edges > 0 {
            // each edge is its own outcome with probability 1/total
            h += edges as f64 * (total.log2() / total);
        }
        h.max(0.0)
    };
    entropy(&left, left_edges).min(entropy(&right, right_edges))
}

/// Joins adjacent tokens whose concatenation is one of `words`, preferring the
/// longest span. Used to re-assemble mined words the segmenter split apart.
pub fn merge_known_words<S: AsRef<str>>(tokens: &[S], words: &BTreeSet<String>) -> Vec<String> {
    let max_chars = words.iter().map(|w| w.chars().count()).max().unwrap_or(0);
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let mut best = None;
        let mut joined = String::new();
        let mut chars = 0;
        for (j, token) in tokens.iter().enumerate().skip(i) {
            joined.push_str(token.as_ref());
            chars += token.as_ref().chars().count();
            if chars > max_chars {
                break;
            }
            if j > i && words.contains(&joined) {
                best = Some((j + 1, joined.clone()));
            }
        }
        match best {
            Some((next, word)) => {
                out.push(word);
                i = next;
            }
            None => {
                out.push(tokens[i].as_ref().to_string());
                i += 1;
            }
        }
    }
    out
}

impl fmt::Display for SentimentEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_tsv_line())
    }
}

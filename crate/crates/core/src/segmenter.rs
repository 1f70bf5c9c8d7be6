//! Chinese word segmentation with a four-state (B/E/M/S) hidden Markov model.
//!
//! Each Han character is tagged as the Beginning, Middle or End of a
//! multi-character word, or as a Single-character word. Training counts tag
//! statistics from a pre-segmented corpus; decoding runs Viterbi in log space
//! over each maximal run of Han characters. Everything else (Latin words,
//! digits, whitespace, punctuation, emoji) is split off as atomic tokens and
//! never enters the trellis.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textprep::{remove_stopwords, Document, StopwordList};

/// Add-λ pseudo-count applied to every (state, character) emission cell.
pub const EMISSION_LAMBDA: f64 = 1e-6;

pub const MODEL_VERSION: &str = "hmm-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum State {
    B = 0,
    E = 1,
    M = 2,
    S = 3,
}

/// Fixed state order; ties in decoding go to the earliest state here.
pub const STATES: [State; 4] = [State::B, State::E, State::M, State::S];

impl State {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn can_start(self) -> bool {
        matches!(self, State::B | State::S)
    }

    pub fn can_end(self) -> bool {
        matches!(self, State::E | State::S)
    }

    /// Whether `self -> next` keeps the tag sequence well formed:
    /// B and M continue with M or E, E and S are followed by B or S.
    pub fn allows(self, next: State) -> bool {
        match self {
            State::B | State::M => matches!(next, State::M | State::E),
            State::E | State::S => matches!(next, State::B | State::S),
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            State::B => "B",
            State::E => "E",
            State::M => "M",
            State::S => "S",
        };
        f.write_str(c)
    }
}

/// Tags for the characters of one word.
pub fn word_tags(len: usize) -> Vec<State> {
    match len {
        0 => vec![],
        1 => vec![State::S],
        n => {
            let mut tags = vec![State::M; n];
            tags[0] = State::B;
            tags[n - 1] = State::E;
            tags
        }
    }
}

/// Checks that a tag sequence starts, continues and ends legally.
pub fn is_well_formed(tags: &[State]) -> bool {
    match (tags.first(), tags.last()) {
        (Some(first), Some(last)) => {
            first.can_start() && last.can_end() && tags.windows(2).all(|w| w[0].allows(w[1]))
        }
        _ => true,
    }
}

pub fn is_han(c: char) -> bool {
    matches!(c,
        '\u{3007}'
        | '\u{3400}'..='\u{4DBF}'
        | '\u{4E00}'..='\u{9FFF}'
        | '\u{F900}'..='\u{FAFF}'
        | '\u{20000}'..='\u{2FA1F}'
        | '\u{30000}'..='\u{3134F}')
}

/// Initial, transition and emission log-probabilities over B/E/M/S.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    initial: [f64; 4],
    transition: [[f64; 4]; 4],
    emission: BTreeMap<char, [f64; 4]>,
    unk_emission: [f64; 4],
}

impl HmmModel {
    /// Assembles a model from natural-log tables, checking that the initial
    /// distribution and every transition row sum to one and that every
    /// structurally forbidden transition is `-inf`.
    pub fn from_parts(
        initial: [f64; 4],
        transition: [[f64; 4]; 4],
        emission: BTreeMap<char, [f64; 4]>,
        unk_emission: [f64; 4],
    ) -> Result<Self> {
        check_distribution("initial", &initial)?;
        for from in STATES {
            let row = &transition[from.index()];
            check_distribution(&format!("transition row {from}"), row)?;
            for to in STATES {
                if !from.allows(to) && row[to.index()] != f64::NEG_INFINITY {
                    return Err(Error::InvalidInput(format!(
                        "forbidden transition {from}->{to} must have log-probability -inf"
                    )));
                }
            }
        }
        let finite_or_neg_inf = |x: f64| x.is_finite() || x == f64::NEG_INFINITY;
        let emissions_ok = emission
            .values()
            .chain(std::iter::once(&unk_emission))
            .all(|row| row.iter().all(|x| finite_or_neg_inf(*x)));
        if !emissions_ok {
            return Err(Error::InvalidInput(
                "emission log-probabilities must be finite or -inf".into(),
            ));
        }
        Ok(Self {
            initial,
            transition,
            emission,
            unk_emission,
        })
    }

    /// Supervised training from pre-segmented sentences.
    ///
    /// Initial and transition probabilities are maximum-likelihood estimates;
    /// a transition row with no observations falls back to a uniform split over
    /// its legal successors. Emissions use add-λ smoothing plus an unseen-
    /// character event whose mass per state is the number of characters seen
    /// exactly once in that state (Good-Turing style). States never observed
    /// get a flat floor of `λ / (N + λ(V + 1))` for every character.
    pub fn train<S: AsRef<str>>(corpus: &[Vec<S>]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::InvalidInput("training corpus is empty".into()));
        }
        let mut start_counts = [0u64; 4];
        let mut trans_counts = [[0u64; 4]; 4];
        let mut emit_counts: BTreeMap<char, [u64; 4]> = BTreeMap::new();

        for (n, sentence) in corpus.iter().enumerate() {
            let mut tags = Vec::new();
            let mut chars = Vec::new();
            for word in sentence {
                let word = word.as_ref();
                if word.is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "sentence {} contains an empty word",
                        n + 1
                    )));
                }
                let wc: Vec<char> = word.chars().collect();
                tags.extend(word_tags(wc.len()));
                chars.extend(wc);
            }
            let Some(first) = tags.first() else { continue };
            start_counts[first.index()] += 1;
            for w in tags.windows(2) {
                trans_counts[w[0].index()][w[1].index()] += 1;
            }
            for (c, t) in chars.iter().zip(&tags) {
                emit_counts.entry(*c).or_default()[t.index()] += 1;
            }
        }

        let total_starts: u64 = start_counts.iter().sum();
        if total_starts == 0 {
            return Err(Error::InvalidInput("training corpus has no words".into()));
        }
        let initial = start_counts.map(|c| ln_ratio(c as f64, total_starts as f64));

        let mut transition = [[f64::NEG_INFINITY; 4]; 4];
        for from in STATES {
            let allowed: Vec<State> = STATES.into_iter().filter(|to| from.allows(*to)).collect();
            let row_total: u64 = allowed.iter().map(|to| trans_counts[from.index()][to.index()]).sum();
            for to in &allowed {
                transition[from.index()][to.index()] = if row_total == 0 {
                    -(allowed.len() as f64).ln()
                } else {
                    ln_ratio(trans_counts[from.index()][to.index()] as f64, row_total as f64)
                };
            }
        }

        let vocab = emit_counts.len() as f64;
        let lambda = EMISSION_LAMBDA;
        let mut state_total = [0u64; 4];
        let mut singletons = [0u64; 4];
        for counts in emit_counts.values() {
            for s in 0..4 {
                state_total[s] += counts[s];
                singletons[s] += u64::from(counts[s] == 1);
            }
        }
        let grand_total: u64 = state_total.iter().sum();
        let denom: [f64; 4] = std::array::from_fn(|s| {
            if state_total[s] > 0 {
                (state_total[s] + singletons[s]) as f64 + lambda * (vocab + 1.0)
            } else {
                grand_total as f64 + lambda * (vocab + 1.0)
            }
        });
        let emission = emit_counts
            .into_iter()
            .map(|(c, counts)| {
                let row = std::array::from_fn(|s| ((counts[s] as f64 + lambda) / denom[s]).ln());
                (c, row)
            })
            .collect();
        let unk_emission = std::array::from_fn(|s| {
            let unseen = if state_total[s] > 0 { singletons[s] as f64 } else { 0.0 };
            ((unseen + lambda) / denom[s]).ln()
        });

        Self::from_parts(initial, transition, emission, unk_emission)
    }

    pub fn initial(&self, state: State) -> f64 {
        self.initial[state.index()]
    }

    pub fn transition(&self, from: State, to: State) -> f64 {
        self.transition[from.index()][to.index()]
    }

    /// Emission log-probability, using the unseen-character row for
    /// characters outside the training vocabulary.
    pub fn emission(&self, state: State, c: char) -> f64 {
        self.emission.get(&c).unwrap_or(&self.unk_emission)[state.index()]
    }

    pub fn unk_emission(&self, state: State) -> f64 {
        self.unk_emission[state.index()]
    }

    pub fn knows_char(&self, c: char) -> bool {
        self.emission.contains_key(&c)
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = char> + '_ {
        self.emission.keys().copied()
    }

    /// Fills the Viterbi trellis for a run of characters.
    ///
    /// `weight[t][s]` is the best log-probability of any legal tag prefix
    /// ending in `s` at position `t`, and `path[t][s]` the predecessor state
    /// achieving it. Only B and S may open a sequence. Among equal scores the
    /// predecessor earliest in B, E, M, S order wins.
    pub fn trellis(&self, chars: &[char]) -> ViterbiTrellis {
        let n = chars.len();
        let mut weight = vec![[f64::NEG_INFINITY; 4]; n];
        let mut path = vec![[None; 4]; n];
        let mut reachable = vec![[false; 4]; n];
        if n == 0 {
            return ViterbiTrellis { weight, path, reachable };
        }
        for s in STATES {
            if s.can_start() {
                weight[0][s.index()] = self.initial(s) + self.emission(s, chars[0]);
                reachable[0][s.index()] = true;
            }
        }
        for t in 1..n {
            for s in STATES {
                let mut best: Option<(f64, State)> = None;
                for prev in STATES {
                    if !reachable[t - 1][prev.index()] || !prev.allows(s) {
                        continue;
                    }
                    let score = weight[t - 1][prev.index()] + self.transition(prev, s);
                    if best.is_none_or(|(b, _)| score > b) {
                        best = Some((score, prev));
                    }
                }
                if let Some((score, prev)) = best {
                    weight[t][s.index()] = score + self.emission(s, chars[t]);
                    path[t][s.index()] = Some(prev);
                    reachable[t][s.index()] = true;
                }
            }
        }
        ViterbiTrellis { weight, path, reachable }
    }

    /// Best legal tag sequence for `chars` and its log-probability.
    pub fn viterbi(&self, chars: &[char]) -> (Vec<State>, f64) {
        self.trellis(chars).best_path()
    }

    /// Splits text into words. Concatenating the output reproduces the input
    /// exactly.
    pub fn segment(&self, text: &str) -> Vec<String> {
        let mut words = Vec::new();
        for run in split_runs(text) {
            match run {
                Run::Han(s) => {
                    let chars: Vec<char> = s.chars().collect();
                    let (tags, _) = self.viterbi(&chars);
                    words.extend(tags_to_words(&chars, &tags));
                }
                Run::Atomic(s) => words.push(s.to_string()),
            }
        }
        words
    }

    pub fn to_json(&self) -> Result<String> {
        let file = HmmFile {
            version: MODEL_VERSION.to_string(),
            states: STATES.map(|s| s.to_string()).to_vec(),
            initial: self.initial.map(finite),
            transition: self.transition.map(|row| row.map(finite)),
            emission: self
                .emission
                .iter()
                .map(|(c, row)| (c.to_string(), row.map(finite)))
                .collect(),
            unk_emission: self.unk_emission.map(finite),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: HmmFile = serde_json::from_str(text)?;
        if file.version != MODEL_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported HMM model version {:?}",
                file.version
            )));
        }
        if file.states != ["B", "E", "M", "S"] {
            return Err(Error::InvalidInput(format!(
                "HMM model state order must be B,E,M,S, found {:?}",
                file.states
            )));
        }
        let mut emission = BTreeMap::new();
        for (key, row) in file.emission {
            let mut chars = key.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => {
                    emission.insert(c, row.map(log_or_neg_inf));
                }
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "emission key {key:?} is not a single character"
                    )))
                }
            }
        }
        Self::from_parts(
            file.initial.map(log_or_neg_inf),
            file.transition.map(|row| row.map(log_or_neg_inf)),
            emission,
            file.unk_emission.map(log_or_neg_inf),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Viterbi dynamic-programming table for one character run.
#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiTrellis {
    pub weight: Vec<[f64; 4]>,
    pub path: Vec<[Option<State>; 4]>,
    reachable: Vec<[bool; 4]>,
}

impl ViterbiTrellis {
    /// Backtracks from the best final E or S cell.
    pub fn best_path(&self) -> (Vec<State>, f64) {
        let n = self.weight.len();
        if n == 0 {
            return (Vec::new(), 0.0);
        }
        let last = n - 1;
        let mut best: Option<(f64, State)> = None;
        for s in [State::E, State::S] {
            if !self.reachable[last][s.index()] {
                continue;
            }
            let score = self.weight[last][s.index()];
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, s));
            }
        }
        // S is always reachable at the last position
        let (score, mut state) = best.expect("a legal final state exists");
        let mut tags = vec![state; n];
        for t in (1..n).rev() {
            state = self.path[t][state.index()].expect("reachable cells have a predecessor");
            tags[t - 1] = state;
        }
        (tags, score)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Run<'a> {
    Han(&'a str),
    Atomic(&'a str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RunKind {
    Han,
    Word,
    Space,
    Symbol,
}

fn run_kind(c: char) -> RunKind {
    if is_han(c) {
        RunKind::Han
    } else if c.is_alphanumeric() {
        RunKind::Word
    } else if c.is_whitespace() {
        RunKind::Space
    } else {
        RunKind::Symbol
    }
}

/// Han runs, alphanumeric runs and whitespace runs are kept whole; any other
/// character stands alone.
fn split_runs(text: &str) -> Vec<Run<'_>> {
    let mut runs = Vec::new();
    let mut start = 0;
    let mut current: Option<RunKind> = None;
    for (i, c) in text.char_indices() {
        let kind = run_kind(c);
        if let Some(cur) = current {
            if cur != kind || cur == RunKind::Symbol {
                runs.push(make_run(cur, &text[start..i]));
                start = i;
            }
        }
        current = Some(kind);
    }
    if let Some(cur) = current {
        runs.push(make_run(cur, &text[start..]));
    }
    runs
}

fn make_run(kind: RunKind, s: &str) -> Run<'_> {
    if kind == RunKind::Han {
        Run::Han(s)
    } else {
        Run::Atomic(s)
    }
}

/// Cuts characters into words at every E or S tag.
pub fn tags_to_words(chars: &[char], tags: &[State]) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    for (c, tag) in chars.iter().zip(tags) {
        current.push(*c);
        if matches!(tag, State::E | State::S) {
            words.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

/// Segments a document's clean text and drops whitespace tokens and stopwords.
pub fn segment_pipeline(doc: &Document, model: &HmmModel, stops: &StopwordList) -> Vec<String> {
    let words: Vec<String> = model
        .segment(&doc.clean_text)
        .into_iter()
        .filter(|w| !w.trim().is_empty())
        .collect();
    remove_stopwords(&words, stops)
}

/// Parses the training corpus format: one sentence per line, words separated
/// by single spaces. Blank lines are skipped.
pub fn parse_training_corpus(text: &str, source: impl AsRef<Path>) -> Result<Vec<Vec<String>>> {
    let mut corpus = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let words: Vec<String> = line.split(' ').map(str::to_string).collect();
        if words.iter().any(String::is_empty) {
            return Err(Error::parse(
                source.as_ref(),
                n + 1,
                "words must be separated by single spaces",
            ));
        }
        corpus.push(words);
    }
    Ok(corpus)
}

/// Every character the model was trained on, for filtering candidate words.
pub fn char_vocabulary(model: &HmmModel) -> BTreeSet<char> {
    model.vocabulary().collect()
}

fn ln_ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        f64::NEG_INFINITY
    } else {
        (num / den).ln()
    }
}

fn check_distribution(name: &str, logs: &[f64; 4]) -> Result<()> {
    if logs.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(Error::InvalidInput(format!("{name} contains NaN or +inf")));
    }
    let total: f64 = logs.iter().map(|x| x.exp()).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "{name} probabilities sum to {total}, expected 1"
        )));
    }
    Ok(())
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn log_or_neg_inf(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NEG_INFINITY)
}

/// On-disk model layout; `null` encodes a log-probability of `-inf`.
#[derive(Debug, Serialize, Deserialize)]
struct HmmFile {
    version: String,
    states: Vec<String>,
    initial: [Option<f64>; 4],
    transition: [[Option<f64>; 4]; 4],
    emission: BTreeMap<String, [Option<f64>; 4]>,
    unk_emission: [Option<f64>; 4],
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use State::*;

    fn corpus(sentences: &[&[&str]]) -> Vec<Vec<String>> {
        sentences
            .iter()
            .map(|s| s.iter().map(|w| w.to_string()).collect())
            .collect()
    }

    /// Left-to-right score of a fixed tag sequence, summed in the same order
    /// as the trellis so equal paths give bit-identical values.
    fn path_score(model: &HmmModel, chars: &[char], tags: &[State]) -> f64 {
        let mut score = model.initial(tags[0]) + model.emission(tags[0], chars[0]);
        for t in 1..chars.len() {
            score = score + model.transition(tags[t - 1], tags[t]) + model.emission(tags[t], chars[t]);
        }
        score
    }

    fn brute_force(model: &HmmModel, chars: &[char]) -> (f64, Vec<Vec<State>>) {
        fn walk(
            model: &HmmModel,
            chars: &[char],
            prefix: &mut Vec<State>,
            best: &mut (f64, Vec<Vec<State>>),
        ) {
            if prefix.len() == chars.len() {
                if !prefix.last().unwrap().can_end() {
                    return;
                }
                let score = path_score(model, chars, prefix);
                if best.1.is_empty() || score > best.0 {
                    *best = (score, vec![prefix.clone()]);
                } else if score == best.0 {
                    best.1.push(prefix.clone());
                }
                return;
            }
            for s in STATES {
                let ok = match prefix.last() {
                    None => s.can_start(),
                    Some(p) => p.allows(s),
                };
                if ok {
                    prefix.push(s);
                    walk(model, chars, prefix, best);
                    prefix.pop();
                }
            }
        }
        let mut best = (f64::NEG_INFINITY, Vec::new());
        walk(model, chars, &mut Vec::new(), &mut best);
        best
    }

    fn random_model(seed: u64, alphabet: &[char]) -> HmmModel {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut split = |n: usize| -> Vec<f64> {
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|x| (x / total).ln()).collect()
        };
        let p = split(2);
        let initial = [p[0], f64::NEG_INFINITY, f64::NEG_INFINITY, p[1]];
        let mut transition = [[f64::NEG_INFINITY; 4]; 4];
        for from in STATES {
            let allowed: Vec<State> = STATES.into_iter().filter(|t| from.allows(*t)).collect();
            for (to, lp) in allowed.iter().zip(split(allowed.len())) {
                transition[from.index()][to.index()] = lp;
            }
        }
        let emission = alphabet
            .iter()
            .map(|c| {
                let row = split(4);
                (*c, [row[0], row[1], row[2], row[3]])
            })
            .collect();
        HmmModel::from_parts(initial, transition, emission, [-12.0; 4]).unwrap()
    }

    #[test]
    fn single_char_corpus_concentrates_on_s() {
        let model = HmmModel::train(&corpus(&[&["好"]])).unwrap();
        assert_eq!(model.initial(S), 0.0);
        assert_eq!(model.initial(B), f64::NEG_INFINITY);
        let s = model.emission(S, '好');
        assert!(STATES.iter().filter(|x| **x != S).all(|x| model.emission(*x, '好') < s));
    }

    #[test]
    fn two_char_word_forces_b_then_e() {
        let model = HmmModel::train(&corpus(&[&["你好"]])).unwrap();
        assert_eq!(model.transition(B, E), 0.0);
        assert_eq!(model.transition(B, M), f64::NEG_INFINITY);
        assert_eq!(model.initial(B), 0.0);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(matches!(HmmModel::train(&empty), Err(Error::InvalidInput(_))));
        assert!(HmmModel::train(&corpus(&[&[""]])).is_err());
    }

    #[test]
    fn forbidden_transitions_stay_neg_inf() {
        let model = HmmModel::train(&corpus(&[&["新冠", "病毒", "很", "可怕"], &["武汉", "加油"]])).unwrap();
        for from in STATES {
            for to in STATES {
                if !from.allows(to) {
                    assert_eq!(model.transition(from, to), f64::NEG_INFINITY, "{from}->{to}");
                }
            }
        }
    }

    #[test]
    fn single_char_segments_to_itself() {
        let model = HmmModel::train(&corpus(&[&["你好"], &["世界"]])).unwrap();
        assert_eq!(model.segment("好"), vec!["好"]);
    }

    #[test]
    fn two_word_fixture_model_hand_trellis() {
        let model = HmmModel::train(&corpus(&[&["你好"], &["世界"]])).unwrap();
        assert_eq!(model.segment("你好世界"), vec!["你好", "世界"]);

        // B emits 你,世 once each and E emits 好,界 once each: N=2, n1=2, V=4,
        // so each emission is (1+λ)/(4+5λ). B->E has probability 1 and E->B 1/2.
        let lambda = EMISSION_LAMBDA;
        let emit = ((1.0 + lambda) / (4.0 + 5.0 * lambda)).ln();
        let expected = 4.0 * emit + 0.5f64.ln();
        let chars: Vec<char> = "你好世界".chars().collect();
        let (tags, score) = model.viterbi(&chars);
        assert_eq!(tags, vec![B, E, B, E]);
        assert!((score - expected).abs() < 1e-12, "{score} vs {expected}");
    }

    #[test]
    fn non_han_runs_are_atomic() {
        let model = HmmModel::train(&corpus(&[&["很", "可怕"]])).unwrap();
        let words = model.segment("COVID很可怕!! 2020年");
        assert_eq!(words[0], "COVID");
        assert_eq!(words.concat(), "COVID很可怕!! 2020年");
        assert!(words.contains(&"!".to_string()));
        assert!(words.contains(&" ".to_string()));
        assert!(words.contains(&"2020".to_string()));
    }

    #[test]
    fn pipeline_drops_stopwords_and_spaces() {
        let model = HmmModel::train(&corpus(&[&["的"], &["了"]])).unwrap();
        let doc = Document::from_raw("d", "t", chrono::DateTime::UNIX_EPOCH, "的了 的", Default::default());
        let stops = StopwordList::new(["的", "了"], "t");
        assert!(segment_pipeline(&doc, &model, &stops).is_empty());
    }

    #[test]
    fn json_round_trip_keeps_neg_inf() {
        let model = HmmModel::train(&corpus(&[&["你好"], &["世界", "和平"]])).unwrap();
        let json = model.to_json().unwrap();
        assert!(json.contains("\"hmm-v1\""));
        assert!(json.contains("null"));
        assert_eq!(HmmModel::from_json(&json).unwrap(), model);
    }

    #[test]
    fn from_parts_rejects_bad_tables() {
        let good = HmmModel::train(&corpus(&[&["你好"]])).unwrap();
        let mut transition = good.transition;
        transition[B.index()] = [(0.5f64).ln(), f64::NEG_INFINITY, f64::NEG_INFINITY, (0.5f64).ln()];
        assert!(HmmModel::from_parts(good.initial, transition, BTreeMap::new(), [0.0; 4]).is_err());
        assert!(HmmModel::from_parts([0.0; 4], good.transition, BTreeMap::new(), [0.0; 4]).is_err());
    }

    #[test]
    fn corpus_parser_reports_line() {
        let err = parse_training_corpus("你好 世界\n新冠  病毒\n", "c.txt").unwrap_err();
        assert!(err.to_string().contains("c.txt:2"), "{err}");
        let ok = parse_training_corpus("你好 世界\n\n加油\n", "c.txt").unwrap();
        assert_eq!(ok.len(), 2);
    }

    #[test]
    fn viterbi_matches_brute_force_on_small_models() {
        let alphabet: Vec<char> = "疫情防控武汉加油新冠病毒口罩隔离医生护士感谢".chars().collect();
        for seed in 0..10u64 {
            let model = random_model(seed, &alphabet);
            for len in 1..=6 {
                let chars: Vec<char> = (0..len).map(|i| alphabet[(seed as usize * 7 + i * 5) % alphabet.len()]).collect();
                let (tags, score) = model.viterbi(&chars);
                let (best, argmax) = brute_force(&model, &chars);
                assert_eq!(score, best);
                assert!(argmax.contains(&tags));
            }
        }
    }

    proptest! {
        #[test]
        fn segmentation_reconstructs_input(text in "[疫情防控加油a-z0-9 ，!😷]{0,40}") {
            let model = HmmModel::train(&corpus(&[&["疫情", "防控"], &["加油"]])).unwrap();
            let words = model.segment(&text);
            prop_assert_eq!(words.concat(), text);
            prop_assert!(words.iter().all(|w| !w.is_empty()));
        }

        #[test]
        fn decoded_paths_are_well_formed(seed in 0u64..500, len in 1usize..12) {
            let alphabet: Vec<char> = "疫情防控武汉加油新冠病毒".chars().collect();
            let model = random_model(seed, &alphabet);
            let chars: Vec<char> = (0..len).map(|i| alphabet[(i * 3 + seed as usize) % alphabet.len()]).collect();
            let (tags, _) = model.viterbi(&chars);
            prop_assert!(is_well_formed(&tags));
        }

        #[test]
        fn scaling_emissions_keeps_path(seed in 0u64..200, len in 1usize..10, scale in 0.01f64..50.0) {
            let alphabet: Vec<char> = "疫情防控武汉加油新冠病毒".chars().collect();
            let model = random_model(seed, &alphabet);
            let shift = scale.ln();
            let scaled = HmmModel {
                emission: model.emission.iter().map(|(c, row)| (*c, row.map(|x| x + shift))).collect(),
                unk_emission: model.unk_emission.map(|x| x + shift),
                ..model.clone()
            };
            let chars: Vec<char> = (0..len).map(|i| alphabet[(i * 5 + seed as usize) % alphabet.len()]).collect();
            prop_assert_eq!(model.viterbi(&chars).0, scaled.viterbi(&chars).0);
        }
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use moodwatch_core::emotion::{document_emotion, Analyzer, ResultRecord};
use moodwatch_core::evalharness::{
    parse_truth_jsonl, run_comparison, EvalItem, LexiconBaseline, SamplePartition, Scorer, SystemScorer,
    UniformBaseline,
};
use moodwatch_core::frontier::{BloomFilter, Frontier, FrontierItem, Offer};
use moodwatch_core::lexicon::{
    expand_lexicon as so_pmi_expand, expand_lexicon_as, load_merge_dictionaries, merge_known_words, mine_new_words,
    CooccurrenceStats, EntrySource, FunctionWordTables, Lexicon, NewWordCandidate,
};
use moodwatch_core::polarity::{parse_labeled_jsonl, ClassScores, NbModel, Polarity};
use moodwatch_core::segmenter::{is_han, parse_training_corpus, segment_pipeline, HmmModel};
use moodwatch_core::textprep::{ContentType, Document, StopwordList};
use moodwatch_core::trends::{aggregate_records, hot_words, HotWordsFile};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{BaselineKind, PipelineConfig};
use crate::CliError;

pub const INTAKE_LOG: &str = "intake.jsonl";
pub const BLOOM: &str = "bloom.blmf";
pub const DOCUMENTS: &str = "documents.jsonl";
pub const HMM: &str = "hmm.json";
pub const TOKENS: &str = "tokens.jsonl";
pub const CANDIDATES: &str = "candidates.jsonl";
pub const LEXICON: &str = "lexicon.tsv";
pub const NB: &str = "nb.json";
pub const POLARITY: &str = "polarity.jsonl";
pub const RESULTS: &str = "results.jsonl";
pub const TRENDS: &str = "trends.json";
pub const TRENDS_CSV: &str = "trends.csv";
pub const HOTWORDS: &str = "hotwords.json";
pub const HOTWORDS_CSV: &str = "hotwords.csv";
pub const EVAL_JSON: &str = "eval_report.json";
pub const EVAL_TXT: &str = "eval_report.txt";

/// One line of the comment input.
#[derive(Debug, Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    source: String,
    fetched_at: DateTime<Utc>,
    #[serde(default)]
    content_type: ContentType,
    raw: String,
    /// Dedup key when present; the id is used otherwise.
    url: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TokenRecord {
    id: String,
    fetched_at: DateTime<Utc>,
    tokens: Vec<String>,
}

#[derive(Debug, Serialize)]
struct PolarityRecord<'a> {
    id: &'a str,
    label: Polarity,
    confidence: f64,
    log_score: ClassScores,
}

fn artifact(config: &PipelineConfig, name: &str) -> PathBuf {
    config.paths.out.join(name)
}

fn require(config: &PipelineConfig, name: &str) -> Result<PathBuf, CliError> {
    let path = artifact(config, name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Missing(path))
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(line)
            .map_err(|e| CliError::Parse(format!("{}:{}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

fn to_jsonl<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, CliError> {
    let mut out = String::new();
    for row in rows {
        out += &serde_json::to_string(&row).map_err(|e| CliError::Other(e.to_string()))?;
        out.push('\n');
    }
    Ok(out)
}

fn print_json(value: serde_json::Value) {
    println!("{value}");
}

fn stopwords(config: &PipelineConfig) -> Result<StopwordList, CliError> {
    Ok(StopwordList::load(&config.paths.stopwords)?)
}

fn function_words(config: &PipelineConfig) -> Result<FunctionWordTables, CliError> {
    Ok(FunctionWordTables::load(&config.paths.function_words)?)
}

fn base_lexicon(config: &PipelineConfig) -> Result<Lexicon, CliError> {
    Ok(load_merge_dictionaries(&config.paths.lexicons)?)
}

/// The expanded lexicon when it exists, the configured dictionaries otherwise.
fn scoring_lexicon(config: &PipelineConfig) -> Result<Lexicon, CliError> {
    let expanded = artifact(config, LEXICON);
    if expanded.is_file() {
        Ok(Lexicon::load(&expanded)?)
    } else {
        base_lexicon(config)
    }
}

/// Mined words from the candidate report, if mining has run.
fn new_words(config: &PipelineConfig) -> Result<BTreeSet<String>, CliError> {
    let path = artifact(config, CANDIDATES);
    if !path.is_file() {
        return Ok(BTreeSet::new());
    }
    let candidates: Vec<NewWordCandidate> = read_jsonl(&path)?;
    Ok(candidates.into_iter().map(|c| c.ngram).collect())
}

fn tokens_with_new_words(config: &PipelineConfig) -> Result<Vec<TokenRecord>, CliError> {
    let mut records: Vec<TokenRecord> = read_jsonl(&require(config, TOKENS)?)?;
    let words = new_words(config)?;
    if !words.is_empty() {
        for r in &mut records {
            r.tokens = merge_known_words(&r.tokens, &words);
        }
    }
    Ok(records)
}

fn analyzer(config: &PipelineConfig) -> Result<Analyzer, CliError> {
    let hmm = HmmModel::load(require(config, HMM)?)?;
    let nb_path = artifact(config, NB);
    let nb = if config.scorer.fallback_enabled {
        Some(NbModel::load(require(config, NB)?)?)
    } else if nb_path.is_file() {
        Some(NbModel::load(&nb_path)?)
    } else {
        None
    };
    let analyzer = Analyzer::new(
        hmm,
        stopwords(config)?,
        scoring_lexicon(config)?,
        function_words(config)?,
        nb,
        config.scorer,
    )?;
    Ok(analyzer.with_new_words(new_words(config)?))
}

fn load_documents(config: &PipelineConfig) -> Result<Vec<Document>, CliError> {
    read_jsonl(&require(config, DOCUMENTS)?)
}

pub fn ingest(config: &PipelineConfig, input: Option<&Path>) -> Result<(), CliError> {
    let input = input.unwrap_or(&config.paths.comments);
    // parse everything first so a bad line leaves no partial state behind
    let records: Vec<RawRecord> = read_jsonl(input)?;

    let bloom_path = artifact(config, BLOOM);
    let filter = if bloom_path.is_file() {
        BloomFilter::load(&bloom_path)?
    } else {
        BloomFilter::new(config.bloom.m, config.bloom.k, config.bloom_seed())?
    };
    let mut frontier = Frontier::new(filter, artifact(config, INTAKE_LOG));
    let mut documents = String::new();
    let (mut accepted, mut duplicates) = (0u64, 0u64);
    for record in records {
        let key = record.url.as_deref().unwrap_or(&record.id);
        // the fetch time stands in for the enqueue time so reruns are reproducible
        let item = FrontierItem::new(key, DOCUMENTS, record.fetched_at)?;
        match frontier.offer(&item)? {
            Offer::Accepted => {
                accepted += 1;
                let doc = Document::from_raw(record.id, record.source, record.fetched_at, record.raw, record.content_type);
                documents += &serde_json::to_string(&doc).map_err(|e| CliError::Other(e.to_string()))?;
                documents.push('\n');
            }
            Offer::RejectedDuplicate => duplicates += 1,
        }
    }
    let doc_path = artifact(config, DOCUMENTS);
    let mut existing = if doc_path.is_file() { read_text(&doc_path)? } else { String::new() };
    existing += &documents;
    write_text(&doc_path, &existing)?;
    frontier.into_filter().save(&bloom_path)?;
    print_json(serde_json::json!({ "accepted": accepted, "duplicates": duplicates }));
    Ok(())
}

pub fn train_hmm(config: &PipelineConfig) -> Result<(), CliError> {
    let path = &config.paths.hmm_corpus;
    let corpus = parse_training_corpus(&read_text(path)?, path)?;
    let model = HmmModel::train(&corpus)?;
    model.save(artifact(config, HMM))?;
    print_json(serde_json::json!({ "sentences": corpus.len(), "characters": model.vocabulary().count() }));
    Ok(())
}

pub fn segment(config: &PipelineConfig) -> Result<(), CliError> {
    let model = HmmModel::load(require(config, HMM)?)?;
    let documents = load_documents(config)?;
    let stops = stopwords(config)?;
    let records = documents.iter().map(|doc| TokenRecord {
        id: doc.id.clone(),
        fetched_at: doc.fetched_at,
        tokens: segment_pipeline(doc, &model, &stops),
    });
    write_text(&artifact(config, TOKENS), &to_jsonl(records)?)?;
    print_json(serde_json::json!({ "documents": documents.len() }));
    Ok(())
}

pub fn mine_words(config: &PipelineConfig) -> Result<(), CliError> {
    let documents = load_documents(config)?;
    let mut by_day: BTreeMap<NaiveDate, Vec<&str>> = BTreeMap::new();
    for doc in &documents {
        by_day.entry(doc.fetched_at.date_naive()).or_default().push(&doc.clean_text);
    }
    let slices: Vec<Vec<&str>> = by_day.into_values().collect();
    let candidates = if slices.len() < 2 {
        eprintln!("moodwatch: fewer than two days of documents, nothing to mine");
        Vec::new()
    } else {
        let known: BTreeSet<String> = base_lexicon(config)?.words().map(str::to_string).collect();
        mine_new_words(&slices, &config.miner, &known)?
    };
    write_text(&artifact(config, CANDIDATES), &to_jsonl(&candidates)?)?;
    print_json(serde_json::json!({ "days": slices.len(), "candidates": candidates.len() }));
    Ok(())
}

pub fn expand_lexicon(config: &PipelineConfig) -> Result<(), CliError> {
    let records = tokens_with_new_words(config)?;
    let sentences: Vec<&[String]> = records.iter().map(|r| r.tokens.as_slice()).collect();
    let mut stats = CooccurrenceStats::new(config.expand.window);
    for sentence in &sentences {
        stats.add_sentence(sentence);
    }
    let base = base_lexicon(config)?;
    let fw = function_words(config)?;
    let pos: BTreeSet<String> = config.expand.positive_seeds.iter().cloned().collect();
    let neg: BTreeSet<String> = config.expand.negative_seeds.iter().cloned().collect();
    let threshold = config.expand.threshold;

    let mined = new_words(config)?;
    let with_mined = expand_lexicon_as(&base, &stats, &mined, &pos, &neg, threshold, EntrySource::NewWord)?;
    let corpus_words: BTreeSet<String> = stats
        .vocabulary()
        .filter(|(w, count)| {
            *count >= config.expand.min_count
                && w.chars().count() >= 2
                && w.chars().all(is_han)
                && !fw.is_negation(w)
                && fw.degree(w).is_none()
        })
        .map(|(w, _)| w.to_string())
        .collect();
    let expanded = so_pmi_expand(&with_mined, &stats, &corpus_words, &pos, &neg, threshold)?;
    expanded.save(artifact(config, LEXICON))?;
    print_json(serde_json::json!({
        "base": base.len(),
        "added_new_words": with_mined.len() - base.len(),
        "added_so_pmi": expanded.len() - with_mined.len(),
    }));
    Ok(())
}

pub fn train_nb(config: &PipelineConfig) -> Result<(), CliError> {
    let path = config
        .paths
        .nb_labeled
        .as_ref()
        .ok_or_else(|| CliError::Config("paths.nb_labeled is not set".into()))?;
    let labeled = parse_labeled_jsonl(&read_text(path)?, path)?;
    let model = NbModel::train(&labeled, config.nb.weighting)?;
    model.save(artifact(config, NB))?;
    print_json(serde_json::json!({
        "documents": labeled.len(),
        "vocabulary": model.vocabulary().count(),
    }));
    Ok(())
}

pub fn classify(config: &PipelineConfig) -> Result<(), CliError> {
    let model = NbModel::load(require(config, NB)?)?;
    let records = tokens_with_new_words(config)?;
    let results: Vec<_> = records.iter().map(|r| (r, model.classify(&r.tokens))).collect();
    let positive = results.iter().filter(|(_, p)| p.label == Polarity::Positive).count();
    let rows = results.iter().map(|(r, p)| PolarityRecord {
        id: &r.id,
        label: p.label,
        confidence: p.confidence,
        log_score: p.log_score,
    });
    write_text(&artifact(config, POLARITY), &to_jsonl(rows)?)?;
    print_json(serde_json::json!({ "positive": positive, "negative": records.len() - positive }));
    Ok(())
}

pub fn score(config: &PipelineConfig) -> Result<(), CliError> {
    let documents = load_documents(config)?;
    let analyzer = analyzer(config)?;
    let records: Vec<ResultRecord> = documents
        .iter()
        .map(|doc| document_emotion(doc, &analyzer).to_record())
        .collect();
    let fallback = records.iter().filter(|r| r.emotion_vector().is_fallback()).count();
    let silent = records.iter().filter(|r| r.emotion_vector().is_silent()).count();
    write_text(&artifact(config, RESULTS), &to_jsonl(&records)?)?;
    print_json(serde_json::json!({ "documents": records.len(), "fallback": fallback, "lexicon_silent": silent }));
    Ok(())
}

pub fn trend(config: &PipelineConfig) -> Result<(), CliError> {
    let results: Vec<ResultRecord> = read_jsonl(&require(config, RESULTS)?)?;
    let report = aggregate_records(&results);
    if report.skipped > 0 {
        eprintln!("moodwatch: skipped {} results without a timestamp", report.skipped);
    }
    write_text(&artifact(config, TRENDS), &report.to_json()?)?;
    write_text(&artifact(config, TRENDS_CSV), &report.to_csv()?)?;

    let tokens: Vec<Vec<String>> = tokens_with_new_words(config)?.into_iter().map(|r| r.tokens).collect();
    let words = hot_words(&tokens, config.trends.top_k, &stopwords(config)?, &scoring_lexicon(config)?)?;
    let hot = HotWordsFile::new(words);
    write_text(&artifact(config, HOTWORDS), &hot.to_json()?)?;
    write_text(&artifact(config, HOTWORDS_CSV), &hot.to_csv()?)?;
    print_json(serde_json::json!({
        "buckets": report.series.len(),
        "documents": report.total_docs(),
        "skipped": report.skipped,
        "hot_words": hot.words.len(),
    }));
    Ok(())
}

pub fn eval(config: &PipelineConfig) -> Result<(), CliError> {
    let truth_path = config
        .paths
        .truth
        .as_ref()
        .ok_or_else(|| CliError::Config("paths.truth is not set".into()))?;
    let labels = parse_truth_jsonl(&read_text(truth_path)?, truth_path)?;
    let documents = load_documents(config)?;
    let analyzer = analyzer(config)?;
    let by_id: BTreeMap<&str, &Document> = documents.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut items = Vec::with_capacity(labels.len());
    for label in labels {
        let doc = by_id.get(label.id.as_str()).ok_or_else(|| {
            CliError::Parse(format!("{}: comment {:?} is not among the ingested documents", truth_path.display(), label.id))
        })?;
        items.push(EvalItem {
            tokens: analyzer.tokens(doc),
            id: label.id,
            truth: label.truth,
        });
    }
    let partition = SamplePartition::new(items, config.eval.samples, config.seed)?;
    let system = SystemScorer::new(&analyzer);
    let baseline: Box<dyn Scorer> = match config.eval.baseline {
        BaselineKind::Lexicon => Box::new(LexiconBaseline::new(scoring_lexicon(config)?)),
        BaselineKind::Uniform => Box::new(UniformBaseline),
    };
    let report = run_comparison(&partition, &system, baseline.as_ref());
    write_text(&artifact(config, EVAL_JSON), &report.to_json()?)?;
    write_text(&artifact(config, EVAL_TXT), &report.to_text())?;
    print!("{}", report.to_text());
    Ok(())
}

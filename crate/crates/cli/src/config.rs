use std::path::{Path, PathBuf};

use moodwatch_core::emotion::ScorerConfig;
use moodwatch_core::frontier::MAX_HASHES;
use moodwatch_core::lexicon::{MinerParams, DEFAULT_WINDOW};
use moodwatch_core::polarity::Weighting;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub bloom: BloomConfig,
    #[serde(default)]
    pub nb: NbConfig,
    #[serde(default)]
    pub scorer: ScorerConfig,
    #[serde(default)]
    pub expand: ExpandConfig,
    #[serde(default)]
    pub miner: MinerParams,
    #[serde(default)]
    pub trends: TrendsConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub comments: PathBuf,
    pub stopwords: PathBuf,
    pub hmm_corpus: PathBuf,
    #[serde(default)]
    pub lexicons: Vec<PathBuf>,
    pub function_words: PathBuf,
    pub nb_labeled: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BloomConfig {
    pub m: u64,
    pub k: u32,
    /// Falls back to the top-level seed.
    pub seed: Option<u64>,
}

impl Default for BloomConfig {
    fn default() -> Self {
        Self { m: 1 << 20, k: 7, seed: None }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbConfig {
    pub weighting: Weighting,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpandConfig {
    pub positive_seeds: Vec<String>,
    pub negative_seeds: Vec<String>,
    pub threshold: f64,
    pub window: usize,
    /// Corpus words seen fewer times are not scored.
    pub min_count: u64,
}

impl Default for ExpandConfig {
    fn default() -> Self {
        Self {
            positive_seeds: vec!["加油".into(), "希望".into(), "感谢".into()],
            negative_seeds: vec!["害怕".into(), "难过".into(), "愤怒".into()],
            threshold: 1.0,
            window: DEFAULT_WINDOW,
            min_count: 3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendsConfig {
    pub top_k: usize,
}

impl Default for TrendsConfig {
    fn default() -> Self {
        Self { top_k: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Lexicon,
    Uniform,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub samples: usize,
    pub baseline: BaselineKind,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            samples: moodwatch_core::evalharness::DEFAULT_SAMPLES,
            baseline: BaselineKind::Lexicon,
        }
    }
}

impl PipelineConfig {
    /// Reads, resolves and validates a config file. Relative paths are taken
    /// from the directory holding the file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config: PipelineConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.paths.resolve(base);
        Ok(config)
    }

    pub fn bloom_seed(&self) -> u64 {
        self.bloom.seed.unwrap_or(self.seed)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.paths;
        let mut inputs = vec![&p.comments, &p.stopwords, &p.hmm_corpus, &p.function_words];
        inputs.extend(&p.lexicons);
        inputs.extend(p.nb_labeled.iter());
        inputs.extend(p.truth.iter());
        for input in inputs {
            if !input.is_file() {
                return Err(CliError::Config(format!("{} does not exist", input.display())));
            }
        }
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(CliError::Config(msg.to_string())) };
        check(self.bloom.m >= 8, "bloom.m must be at least 8")?;
        check((1..=MAX_HASHES).contains(&self.bloom.k), "bloom.k must be between 1 and 16")?;
        let e = &self.expand;
        check(e.threshold > 0.0 && e.threshold.is_finite(), "expand.threshold must be positive")?;
        check(e.window >= 1, "expand.window must be at least 1")?;
        check(!e.positive_seeds.is_empty() && !e.negative_seeds.is_empty(), "expand needs positive and negative seeds")?;
        let m = &self.miner;
        check(m.min_freq >= 1, "miner.min_freq must be at least 1")?;
        check(
            [m.min_cohesion, m.min_boundary_entropy, m.min_burst_ratio].iter().all(|v| v.is_finite()),
            "miner thresholds must be finite",
        )?;
        check(self.trends.top_k >= 1, "trends.top_k must be at least 1")?;
        check(self.eval.samples >= 1, "eval.samples must be at least 1")?;
        Ok(())
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.comments);
        join(&mut self.stopwords);
        join(&mut self.hmm_corpus);
        self.lexicons.iter_mut().for_each(join);
        join(&mut self.function_words);
        self.nb_labeled.iter_mut().for_each(join);
        self.truth.iter_mut().for_each(join);
        join(&mut self.out);
    }
}

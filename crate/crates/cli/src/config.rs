//! Declarative pipeline configuration: the TOML schema, validation, flag
//! overrides, and the canonical hash recorded in the run manifest.
//!
//! The single top-level `seed` drives every random choice in the pipeline;
//! per-task seeds are derived from it by hashing, so the detector and topic
//! sections deliberately expose no seed of their own.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use moodpulse_core::changepoint::{DetectorConfig, NigPrior};
use moodpulse_core::ingest::{
    load_emoji_map, load_word_set, resolve_time_zone, CorpusFormat, MalformedPolicy,
    PreprocessConfig,
};
use moodpulse_core::label::DdrConfig;
use moodpulse_core::reaction::TTestKind;
use moodpulse_core::topic::TopicConfig;

/// Fully resolved pipeline configuration (file contents plus flag overrides).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Base seed for every random choice in the pipeline.
    #[serde(default)]
    pub seed: u64,
    pub paths: PathsSection,
    #[serde(default)]
    pub preprocess: PreprocessSection,
    pub labeler: LabelerSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub topic: TopicSection,
    #[serde(default)]
    pub measure: MeasureSection,
    #[serde(default)]
    pub eval: EvalSection,
}

/// Input and output locations. Which optional paths are required depends on
/// the labeler mode; the files themselves are only opened when a stage runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub corpus: PathBuf,
    /// Directory receiving every artifact the stages produce.
    pub output: PathBuf,
    /// Precomputed label CSV (`labeler.mode = "precomputed"`).
    #[serde(default)]
    pub labels: Option<PathBuf>,
    /// Lexicon TSV (`labeler.mode = "lexicon"` or `"ddr"`).
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    /// Word vector table (`labeler.mode = "ddr"`).
    #[serde(default)]
    pub vectors: Option<PathBuf>,
    /// Event verdict CSV for the evaluate stage; without it only an empty
    /// detection set evaluates cleanly.
    #[serde(default)]
    pub verdicts: Option<PathBuf>,
}

/// Corpus parsing and text cleaning options.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub format: CorpusFormat,
    /// IANA zone name used to bucket posts into calendar days.
    pub time_zone: String,
    pub on_malformed: MalformedPolicy,
    /// Drop day-exact duplicate texts during ingest.
    pub dedupe_exact: bool,
    pub emoji_map: Option<PathBuf>,
    pub hashtag_wordlist: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection {
            format: CorpusFormat::Jsonl,
            time_zone: "UTC".to_string(),
            on_malformed: MalformedPolicy::Skip,
            dedupe_exact: false,
            emoji_map: None,
            hashtag_wordlist: None,
            stopwords: None,
        }
    }
}

fn default_ddr_threshold() -> f64 {
    DdrConfig::default().threshold
}

fn default_ddr_min_covered() -> usize {
    DdrConfig::default().min_covered_tokens
}

/// How documents acquire affect labels. The `mode` tag admits exactly one
/// choice per config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum LabelerSection {
    /// Join a caller-supplied label CSV against the corpus by post id.
    Precomputed,
    /// Word-match each category's lexicon entries against post tokens.
    Lexicon,
    /// Distributed-dictionary scoring: cosine similarity between document
    /// and dictionary mean vectors.
    Ddr {
        #[serde(default = "default_ddr_threshold")]
        threshold: f64,
        #[serde(default = "default_ddr_min_covered")]
        min_covered_tokens: usize,
    },
}

/// Change-point detector knobs; mirrors the core config minus the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub window_days: usize,
    pub stride_days: usize,
    pub confidence_threshold: f64,
    pub bootstrap_iters: usize,
    pub hazard: f64,
    pub r_min: usize,
    pub merge_window_days: i64,
    pub bocpd_prior: Option<NigPrior>,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let core = DetectorConfig::default();
        DetectorSection {
            window_days: core.window_days,
            stride_days: core.stride_days,
            confidence_threshold: core.confidence_threshold,
            bootstrap_iters: core.bootstrap_iters,
            hazard: core.hazard,
            r_min: core.r_min,
            merge_window_days: core.merge_window_days,
            bocpd_prior: core.bocpd_prior,
        }
    }
}

impl DetectorSection {
    /// Core detector config with the pipeline seed plugged in.
    pub fn to_config(self, seed: u64) -> DetectorConfig {
        DetectorConfig {
            window_days: self.window_days,
            stride_days: self.stride_days,
            confidence_threshold: self.confidence_threshold,
            bootstrap_iters: self.bootstrap_iters,
            hazard: self.hazard,
            r_min: self.r_min,
            merge_window_days: self.merge_window_days,
            bocpd_prior: self.bocpd_prior,
            rng_seed: seed,
        }
    }
}

/// Topic extraction knobs; mirrors the core config minus the seed, plus the
/// size of the explanation windows around each change point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicSection {
    pub n_topics: usize,
    pub top_keywords: usize,
    /// Days per explanation window: before `[cp − w, cp − 1]`, after
    /// `[cp, cp + w − 1]`.
    pub window_days: i64,
    pub min_docs: usize,
    pub emerging_threshold: f64,
    pub max_iters: usize,
}

impl Default for TopicSection {
    fn default() -> Self {
        let core = TopicConfig::default();
        TopicSection {
            n_topics: core.n_topics,
            top_keywords: core.top_keywords,
            window_days: 3,
            min_docs: core.min_docs,
            emerging_threshold: core.emerging_threshold,
            max_iters: core.max_iters,
        }
    }
}

impl TopicSection {
    /// Core topic config with an explicit (already derived) seed.
    pub fn to_config(self, rng_seed: u64) -> TopicConfig {
        TopicConfig {
            n_topics: self.n_topics,
            top_keywords: self.top_keywords,
            min_docs: self.min_docs,
            emerging_threshold: self.emerging_threshold,
            max_iters: self.max_iters,
            rng_seed,
        }
    }
}

/// Long-term test selection for the measure stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TtestChoice {
    #[default]
    Welch,
    Pooled,
}

impl TtestChoice {
    pub fn to_kind(self) -> TTestKind {
        match self {
            TtestChoice::Welch => TTestKind::Welch,
            TtestChoice::Pooled => TTestKind::Pooled,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TtestChoice::Welch => "welch",
            TtestChoice::Pooled => "pooled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureSection {
    pub ttest: TtestChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Change points at most this many days apart group into one event.
    pub grouping_window_days: i64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            grouping_window_days: 2,
        }
    }
}

/// Command-line overrides folded into the file config before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub dedupe_exact: bool,
    pub ttest: Option<TtestChoice>,
    pub n_topics: Option<usize>,
}

impl PipelineConfig {
    /// Read a TOML config, apply flag overrides, and validate the result.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config `{}`", path.display()))?;
        let mut config: PipelineConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config `{}`", path.display()))?;
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(out) = &overrides.out {
            config.paths.output = out.clone();
        }
        if overrides.dedupe_exact {
            config.preprocess.dedupe_exact = true;
        }
        if let Some(ttest) = overrides.ttest {
            config.measure.ttest = ttest;
        }
        if let Some(n_topics) = overrides.n_topics {
            config.topic.n_topics = n_topics;
        }
        config.validate()?;
        Ok(config)
    }

    /// Check every cross-field invariant that does not require touching the
    /// filesystem; missing input files surface later as stage errors.
    pub fn validate(&self) -> Result<()> {
        resolve_time_zone(&self.preprocess.time_zone)?;
        match self.labeler {
            LabelerSection::Precomputed => {
                if self.paths.labels.is_none() {
                    bail!("labeler mode `precomputed` requires paths.labels");
                }
            }
            LabelerSection::Lexicon => {
                if self.paths.lexicon.is_none() {
                    bail!("labeler mode `lexicon` requires paths.lexicon");
                }
            }
            LabelerSection::Ddr {
                threshold,
                min_covered_tokens,
            } => {
                if self.paths.lexicon.is_none() || self.paths.vectors.is_none() {
                    bail!("labeler mode `ddr` requires paths.lexicon and paths.vectors");
                }
                DdrConfig {
                    threshold,
                    min_covered_tokens,
                }
                .validate()?;
            }
        }
        self.detector.to_config(self.seed).validate()?;
        self.topic.to_config(self.seed).validate()?;
        if self.topic.window_days < 1 {
            bail!("topic.window_days must be at least 1");
        }
        if self.topic.min_docs < 1 {
            bail!("topic.min_docs must be at least 1");
        }
        if self.eval.grouping_window_days < 0 {
            bail!("eval.grouping_window_days must be non-negative");
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form; two configs hash equal
    /// exactly when every field is equal.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Assemble the core preprocessing config, loading any resource files.
    pub fn preprocess_config(&self) -> Result<PreprocessConfig> {
        let emoji_map = match &self.preprocess.emoji_map {
            Some(path) => load_emoji_map(open(path)?)?,
            None => HashMap::new(),
        };
        let hashtag_wordlist = match &self.preprocess.hashtag_wordlist {
            Some(path) => load_word_set(open(path)?)?,
            None => HashSet::new(),
        };
        Ok(PreprocessConfig {
            emoji_map,
            hashtag_wordlist,
            stopword_list: self.stopwords()?,
            time_zone: resolve_time_zone(&self.preprocess.time_zone)?,
            on_malformed: self.preprocess.on_malformed,
        })
    }

    /// The stopword list, shared by preprocessing and topic keyword output.
    pub fn stopwords(&self) -> Result<HashSet<String>> {
        match &self.preprocess.stopwords {
            Some(path) => Ok(load_word_set(open(path)?)?),
            None => Ok(HashSet::new()),
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening `{}`", path.display()))
}

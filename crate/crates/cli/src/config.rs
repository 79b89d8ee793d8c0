//! Pipeline configuration file.
//!
//! ```toml
//! out = "workspace"
//! seed = 7
//!
//! [corpus]
//! study_manifest = "study_manifest.csv"
//! background_manifest = "background_manifest.csv"
//! min_paragraph_tokens = 8
//!
//! [phrases]            # leave out to skip phrase detection
//! min_pair_count = 15
//!
//! [embedding]
//! dim = 300
//! format = "text"
//!
//! [queries]
//! file = "queries.jsonl"
//!
//! [evaluation]
//! gold = "gold.csv"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.
//! Command line flags override values from the file.

use std::fs;
use std::path::{Path, PathBuf};

use agenda_core::phraser::PhraseConfig;
use agenda_core::skipgram::{EmbeddingFormat, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{require, CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub study_manifest: Option<PathBuf>,
    pub background_manifest: Option<PathBuf>,
    /// JSON list of cleaning rules; the built-in rules when absent.
    pub rules: Option<PathBuf>,
    /// One word per line; spelling correction is skipped when absent.
    pub lexicon: Option<PathBuf>,
    pub min_paragraph_tokens: Option<usize>,
    pub page_delimiter: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatName {
    #[default]
    Text,
    Binary,
}

impl From<FormatName> for EmbeddingFormat {
    fn from(f: FormatName) -> Self {
        match f {
            FormatName::Text => EmbeddingFormat::Text,
            FormatName::Binary => EmbeddingFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSection {
    #[serde(flatten)]
    pub train: TrainConfig,
    pub format: FormatName,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuerySection {
    pub file: Option<PathBuf>,
    /// Overrides every query's own threshold.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub gold: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub corpus: CorpusSection,
    pub phrases: Option<PhraseConfig>,
    pub embedding: EmbeddingSection,
    pub queries: QuerySection,
    pub evaluation: EvaluationSection,
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        require(path)?;
        let text = fs::read_to_string(path)?;
        let mut config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut config.out,
            &mut config.corpus.study_manifest,
            &mut config.corpus.background_manifest,
            &mut config.corpus.rules,
            &mut config.corpus.lexicon,
            &mut config.queries.file,
            &mut config.evaluation.gold,
        ] {
            resolve(base, p);
        }
        if let Some(seed) = config.seed {
            config.embedding.train.seed = seed;
        }
        if let Some(workers) = config.workers {
            config.embedding.train.workers = workers;
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }
}

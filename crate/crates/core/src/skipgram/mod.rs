//! Skip-gram word embeddings trained with negative sampling.
//!
//! For every (center, context) pair inside the window the trainer ascends
//!
//! ```text
//! log σ(u_ctx · v_center) + Σ_{i=1..k} log σ(-u_neg_i · v_center)
//! ```
//!
//! with negatives drawn from the unigram distribution raised to 0.75. The
//! word embeddings are the input (center-side) vectors.

use std::path::{Path, PathBuf};

use thiserror::Error;

mod embeddings;
mod train;
mod vocab;

pub use embeddings::{EmbeddingFormat, Embeddings};
pub use train::{
    generate_pairs, pair_loss, pair_loss_grad, train, SkipGramModel, TrainConfig, WindowMode,
};
pub use vocab::{build_vocab, NegativeSampler, Vocabulary, NEGATIVE_POWER};

#[derive(Debug, Error)]
pub enum SkipGramError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no token occurs at least {min_count} times")]
    EmptyVocabulary { min_count: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl SkipGramError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        SkipGramError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

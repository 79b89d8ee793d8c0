//! Standard file layout of a working directory shared by the command line
//! tool and the service.
//!
//! ```text
//! documents.jsonl          prepared study documents
//! background.jsonl         prepared background documents
//! phrases.txt              phrase table (optional)
//! embeddings.txt | .bin    word vectors
//! stats.json               tf-idf statistics of the study paragraphs
//! paragraphs.bin           paragraph vectors
//! paragraphs.index.tsv     paragraph vector index
//! queries.jsonl            agenda queries
//! labels.csv               document labels
//! reports/                 query reports
//! ```

use std::path::{Path, PathBuf};

use crate::corpus::{read_documents, Corpus};
use crate::phraser::PhraseTable;
use crate::pipeline::{excerpts, PipelineError, StudyIndex};
use crate::retrieval::ParagraphIndex;
use crate::skipgram::{EmbeddingFormat, Embeddings};
use crate::vectorizer::{load_paragraph_vectors, TfidfStats};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn documents(&self) -> PathBuf {
        self.root.join("documents.jsonl")
    }

    pub fn background(&self) -> PathBuf {
        self.root.join("background.jsonl")
    }

    pub fn phrases(&self) -> PathBuf {
        self.root.join("phrases.txt")
    }

    pub fn embeddings_as(&self, format: EmbeddingFormat) -> PathBuf {
        match format {
            EmbeddingFormat::Text => self.root.join("embeddings.txt"),
            EmbeddingFormat::Binary => self.root.join("embeddings.bin"),
        }
    }

    /// The text embedding file, or the binary one if only that exists.
    pub fn embeddings(&self) -> PathBuf {
        let text = self.embeddings_as(EmbeddingFormat::Text);
        let binary = self.embeddings_as(EmbeddingFormat::Binary);
        if !text.exists() && binary.exists() {
            binary
        } else {
            text
        }
    }

    pub fn stats(&self) -> PathBuf {
        self.root.join("stats.json")
    }

    /// Base path of the paragraph vector files (`.bin`, `.index.tsv`).
    pub fn vectors(&self) -> PathBuf {
        self.root.join("paragraphs")
    }

    pub fn queries(&self) -> PathBuf {
        self.root.join("queries.jsonl")
    }

    pub fn labels(&self) -> PathBuf {
        self.root.join("labels.csv")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    /// Phrase table if the workspace has one.
    pub fn load_phrases(&self) -> Result<Option<PhraseTable>, PipelineError> {
        let path = self.phrases();
        if path.exists() {
            Ok(Some(PhraseTable::load(&path)?))
        } else {
            Ok(None)
        }
    }

    /// Loads everything needed to answer queries against the study corpus.
    pub fn load_study(&self) -> Result<Study, PipelineError> {
        let corpus = read_documents(&self.documents())?;
        let embeddings = Embeddings::load(&self.embeddings())?;
        let stats = TfidfStats::load(&self.stats())?;
        let vectors = load_paragraph_vectors(&self.vectors())?;
        let index = ParagraphIndex::new(vectors.clone(), &excerpts(&corpus));
        Ok(Study {
            corpus,
            embeddings,
            index: StudyIndex { stats, vectors, index },
        })
    }
}

/// A study corpus with its embeddings and paragraph index.
pub struct Study {
    pub corpus: Corpus,
    pub embeddings: Embeddings,
    pub index: StudyIndex,
}

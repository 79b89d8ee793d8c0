//! End-to-end wiring of the stages.

use std::collections::HashMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::{
    clean, correct_spelling, ingest, segment, tokenize, CleaningRules, Corpus, CorpusError, Lexicon,
    SegmentConfig, SpellConfig, DEFAULT_PAGE_DELIMITER,
};
use crate::evaluation::{score, EvalError, MetricsReport};
use crate::phraser::{learn_phrases, PhraseConfig, PhraseError, PhraseTable};
use crate::retrieval::{classify_documents, retrieve, AgendaQuery, DocLabel, ParagraphIndex, RetrievalError, RetrievalHit};
use crate::skipgram::{build_vocab, train, Embeddings, SkipGramError, TrainConfig};
use crate::synth::{SyntheticBenchmark, SyntheticDoc};
use crate::vectorizer::{embed_paragraphs, embed_query, fit_tfidf, ParagraphVector, TfidfStats, VectorizeError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Phrase(#[from] PhraseError),
    #[error(transparent)]
    SkipGram(#[from] SkipGramError),
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Settings for turning raw page text into paragraphs.
#[derive(Debug, Clone)]
pub struct PrepareConfig {
    pub page_delimiter: String,
    pub cleaning: CleaningRules,
    pub lexicon: Option<Lexicon>,
    pub spell: SpellConfig,
    pub segment: SegmentConfig,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig {
            page_delimiter: DEFAULT_PAGE_DELIMITER.to_owned(),
            cleaning: CleaningRules::default(),
            lexicon: None,
            spell: SpellConfig::default(),
            segment: SegmentConfig::default(),
        }
    }
}

/// Cleans, spell-corrects (when a lexicon is given) and segments every
/// document.
pub fn prepare(corpus: &Corpus, config: &PrepareConfig) -> Result<Corpus, PipelineError> {
    let rules = config.cleaning.compile()?;
    Ok(corpus.map(|doc| {
        let mut doc = clean(doc, &rules)?;
        if let Some(lexicon) = &config.lexicon {
            doc = correct_spelling(&doc, lexicon, config.spell);
        }
        Ok(segment(&doc, &config.segment))
    })?)
}

pub fn ingest_synthetic(docs: &[SyntheticDoc], page_delimiter: &str) -> Result<Corpus, CorpusError> {
    let docs = docs
        .iter()
        .map(|d| ingest(&d.text, d.meta.clone(), page_delimiter))
        .collect::<Result<Vec<_>, _>>()?;
    Corpus::from_documents(docs)
}

/// One token stream per sentence of every paragraph.
pub fn sentence_streams(corpus: &Corpus) -> Vec<Vec<String>> {
    corpus
        .paragraphs()
        .flat_map(|p| p.sentences.iter().map(|s| tokenize(s)))
        .filter(|t| !t.is_empty())
        .collect()
}

/// Rewrites paragraph tokens with the phrase table, sentence by sentence so
/// that no phrase spans a sentence boundary.
pub fn apply_phrases(corpus: &mut Corpus, table: &PhraseTable) {
    for doc in corpus.documents_mut() {
        for p in &mut doc.paragraphs {
            p.tokens = p
                .sentences
                .iter()
                .flat_map(|s| table.apply(&tokenize(s)))
                .collect();
        }
    }
}

pub fn train_embeddings(streams: &[Vec<String>], config: &TrainConfig) -> Result<Embeddings, PipelineError> {
    let vocab = build_vocab(streams, config.min_count)?;
    Ok(train(streams, &vocab, config)?.embeddings())
}

/// Paragraph vectors and the index built from them.
pub struct StudyIndex {
    pub stats: TfidfStats,
    pub vectors: Vec<ParagraphVector>,
    pub index: ParagraphIndex,
}

pub fn excerpts(corpus: &Corpus) -> HashMap<String, String> {
    corpus.paragraphs().map(|p| (p.para_id.clone(), p.text())).collect()
}

pub fn build_index(study: &Corpus, emb: &Embeddings) -> Result<StudyIndex, PipelineError> {
    let stats = fit_tfidf(study.paragraphs())?;
    let vectors = embed_paragraphs(study.paragraphs(), &stats, emb)?;
    let index = ParagraphIndex::new(vectors.clone(), &excerpts(study));
    Ok(StudyIndex { stats, vectors, index })
}

/// Hits and document labels of one query.
#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub query: AgendaQuery,
    pub hits: Vec<RetrievalHit>,
    pub labels: Vec<DocLabel>,
}

pub fn run_query(query: &AgendaQuery, emb: &Embeddings, study: &StudyIndex) -> Result<QueryOutcome, PipelineError> {
    query.validate()?;
    let q = embed_query(&query.terms, &study.stats, emb)?;
    Ok(QueryOutcome {
        query: query.clone(),
        hits: retrieve(&q, query.threshold, &study.index)?,
        labels: classify_documents(&query.label, &q, query.threshold, &study.index)?,
    })
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub prepare: PrepareConfig,
    pub phrases: Option<PhraseConfig>,
    pub train: TrainConfig,
}

impl Default for BenchmarkConfig {
    /// Settings sized for the synthetic corpora: smaller vectors and window
    /// than the training defaults.
    fn default() -> Self {
        BenchmarkConfig {
            prepare: PrepareConfig::default(),
            phrases: None,
            train: TrainConfig {
                dim: 48,
                window: 5,
                negatives: 5,
                min_count: 5,
                epochs: 5,
                workers: 1,
                ..TrainConfig::default()
            },
        }
    }
}

pub struct BenchmarkOutcome {
    pub embeddings: Embeddings,
    pub study: Corpus,
    pub index: StudyIndex,
    pub outcomes: Vec<QueryOutcome>,
    pub metrics: MetricsReport,
}

/// Runs every stage on a synthetic benchmark and scores the result.
pub fn run_benchmark(bench: &SyntheticBenchmark, config: &BenchmarkConfig) -> Result<BenchmarkOutcome, PipelineError> {
    let delim = &config.prepare.page_delimiter;
    let background = prepare(&ingest_synthetic(&bench.background, delim)?, &config.prepare)?;
    let mut study = prepare(&ingest_synthetic(&bench.study, delim)?, &config.prepare)?;
    let mut streams = sentence_streams(&background);
    if let Some(pc) = &config.phrases {
        let table = learn_phrases(&streams, pc)?;
        streams = streams.iter().map(|s| table.apply(s)).collect();
        apply_phrases(&mut study, &table);
    }
    let embeddings = train_embeddings(&streams, &config.train)?;
    let index = build_index(&study, &embeddings)?;
    let outcomes = bench
        .queries
        .iter()
        .map(|q| run_query(q, &embeddings, &index))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<DocLabel> = outcomes.iter().flat_map(|o| o.labels.iter().cloned()).collect();
    let countries = study
        .documents()
        .iter()
        .map(|d| (d.meta.doc_id.clone(), d.meta.country.clone()))
        .collect();
    let metrics = score(&labels, &bench.gold, &countries)?;
    Ok(BenchmarkOutcome {
        embeddings,
        study,
        index,
        outcomes,
        metrics,
    })
}

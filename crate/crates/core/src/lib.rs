//! Agenda classification of policy documents.
//!
//! Word embeddings are trained with skip-gram negative sampling on a
//! background corpus, paragraphs of the study documents are embedded as
//! tf-idf weighted means of their word vectors, and a document is labeled
//! with an agenda when any of its paragraphs reaches the agenda query's
//! cosine-similarity threshold.

pub mod corpus;
mod text;
pub mod phraser;
pub mod skipgram;
pub mod vectorizer;
pub mod retrieval;
pub mod evaluation;
pub mod report;
pub mod synth;
pub mod pipeline;
pub mod workspace;

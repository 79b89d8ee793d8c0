//! Cosine retrieval of paragraphs, nearest-word lookup, and document labels.
//!
//! A document is positive for an agenda when its best paragraph similarity
//! reaches the query threshold. Hit lists are ordered by similarity
//! (descending), then `doc_id`, then `para_id`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skipgram::Embeddings;
use crate::vectorizer::{ParagraphVector, MAX_QUERY_TERMS};

pub const DEFAULT_THRESHOLD: f64 = 0.55;
pub const DEFAULT_NEIGHBORS: usize = 50;
pub const DEFAULT_STEP: f64 = 0.01;
pub const DEFAULT_FLOOR: f64 = 0.40;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cosine similarity of a zero vector is undefined")]
    ZeroVector,
    #[error("vectors have dimensions {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("threshold {0} is outside [-1, 1]")]
    Threshold(f64),
    #[error("query `{label}`: {reason}")]
    InvalidQuery { label: String, reason: String },
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

fn dot_norms<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> (f64, f64, f64) {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x.into(), y.into());
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    (dot, na.sqrt(), nb.sqrt())
}

/// Cosine similarity, computed in f64 and not clamped.
pub fn cosine<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> Result<f64, RetrievalError> {
    if a.len() != b.len() {
        return Err(RetrievalError::DimensionMismatch(a.len(), b.len()));
    }
    let (dot, na, nb) = dot_norms(a, b);
    if na == 0.0 || nb == 0.0 {
        return Err(RetrievalError::ZeroVector);
    }
    Ok(dot / (na * nb))
}

pub(crate) fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub token: String,
    pub similarity: f64,
}

/// The `k` vocabulary tokens closest to `v`, excluding `exclude`.
///
/// Ties are broken by token in lexical order. Tokens with a zero vector are
/// never returned.
pub fn nearest_words(
    v: &[f32],
    emb: &Embeddings,
    k: usize,
    exclude: &[String],
) -> Result<Vec<Neighbor>, RetrievalError> {
    if v.len() != emb.dim() {
        return Err(RetrievalError::DimensionMismatch(v.len(), emb.dim()));
    }
    let nv = norm(v);
    if nv == 0.0 {
        return Err(RetrievalError::ZeroVector);
    }
    let mut scored: Vec<(f64, &str)> = (0..emb.len())
        .filter(|&i| emb.norm(i) > 0.0)
        .map(|i| (i, emb.words()[i].as_str()))
        .filter(|(_, w)| !exclude.iter().any(|e| e == w))
        .map(|(i, w)| (dot(v, emb.row(i)) / (nv * emb.norm(i)), w))
        .collect();
    let cmp = |a: &(f64, &str), b: &(f64, &str)| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1));
    if k < scored.len() {
        scored.select_nth_unstable_by(k, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    Ok(scored
        .into_iter()
        .map(|(s, w)| Neighbor {
            token: w.to_owned(),
            similarity: s,
        })
        .collect())
}

/// A named set of seed terms with its decision threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgendaQuery {
    pub label: String,
    pub terms: Vec<String>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub notes: String,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl AgendaQuery {
    pub fn new(label: &str, terms: &[&str], threshold: f64) -> Result<Self, RetrievalError> {
        let q = AgendaQuery {
            label: label.to_owned(),
            terms: terms.iter().map(|t| (*t).to_owned()).collect(),
            threshold,
            notes: String::new(),
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        let invalid = |reason: &str| RetrievalError::InvalidQuery {
            label: self.label.clone(),
            reason: reason.to_owned(),
        };
        if self.label.trim().is_empty() {
            return Err(invalid("label is empty"));
        }
        if self.terms.is_empty() || self.terms.len() > MAX_QUERY_TERMS {
            return Err(invalid(&format!("needs 1 to {MAX_QUERY_TERMS} terms")));
        }
        if self.terms.iter().any(|t| t.trim().is_empty()) {
            return Err(invalid("empty term"));
        }
        if !(-1.0..=1.0).contains(&self.threshold) {
            return Err(RetrievalError::Threshold(self.threshold));
        }
        Ok(())
    }
}

/// Reads one query per line (JSON objects); blank lines are skipped.
pub fn read_queries(path: &Path) -> Result<Vec<AgendaQuery>, RetrievalError> {
    let io = |e| RetrievalError::Io {
        path: path.to_owned(),
        source: e,
    };
    let file = fs::File::open(path).map_err(io)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |reason: String| RetrievalError::Parse {
            path: path.to_owned(),
            line: i + 1,
            reason,
        };
        let q: AgendaQuery = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        q.validate().map_err(|e| parse(e.to_string()))?;
        out.push(q);
    }
    Ok(out)
}

pub fn write_queries(path: &Path, queries: &[AgendaQuery]) -> Result<(), RetrievalError> {
    let io = |e| RetrievalError::Io {
        path: path.to_owned(),
        source: e,
    };
    let mut out = BufWriter::new(fs::File::create(path).map_err(io)?);
    for q in queries {
        let line = serde_json::to_string(q).expect("queries serialize");
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    para_id: String,
    doc_id: String,
    page_number: usize,
    vector: Vec<f32>,
    norm: f64,
    excerpt: String,
}

/// Retrievable paragraph vectors with the text used for excerpts.
#[derive(Debug, Clone, Default)]
pub struct ParagraphIndex {
    entries: Vec<Entry>,
    doc_ids: Vec<String>,
    dim: usize,
}

/// Number of entries above which scoring is split across threads.
const PARALLEL_SCORING_MIN: usize = 20_000;

impl ParagraphIndex {
    /// Builds the index; paragraphs flagged non-retrievable are left out but
    /// their documents are still known, so they can be labeled negative.
    pub fn new(vectors: Vec<ParagraphVector>, excerpts: &HashMap<String, String>) -> Self {
        let mut doc_ids: Vec<String> = vectors.iter().map(|v| v.doc_id.clone()).collect();
        doc_ids.sort();
        doc_ids.dedup();
        let dim = vectors.first().map_or(0, |v| v.vector.len());
        let entries = vectors
            .into_iter()
            .filter(|v| v.retrievable)
            .filter_map(|v| {
                let n = norm(&v.vector);
                (n > 0.0).then(|| Entry {
                    excerpt: excerpts.get(&v.para_id).cloned().unwrap_or_default(),
                    para_id: v.para_id,
                    doc_id: v.doc_id,
                    page_number: v.page_number,
                    vector: v.vector,
                    norm: n,
                })
            })
            .collect();
        ParagraphIndex {
            entries,
            doc_ids,
            dim,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Every document that contributed a paragraph, sorted.
    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    fn check(&self, q: &[f32]) -> Result<f64, RetrievalError> {
        if !self.entries.is_empty() && q.len() != self.dim {
            return Err(RetrievalError::DimensionMismatch(q.len(), self.dim));
        }
        let nq = norm(q);
        if nq == 0.0 {
            return Err(RetrievalError::ZeroVector);
        }
        Ok(nq)
    }

    /// Similarity of every indexed paragraph to `q`, in index order.
    fn scores(&self, q: &[f32]) -> Result<Vec<f64>, RetrievalError> {
        let nq = self.check(q)?;
        let score = |e: &Entry| dot(q, &e.vector) / (nq * e.norm);
        if self.entries.len() < PARALLEL_SCORING_MIN {
            return Ok(self.entries.iter().map(score).collect());
        }
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
        let chunk = self.entries.len().div_ceil(workers);
        Ok(std::thread::scope(|s| {
            let handles: Vec<_> = self
                .entries
                .chunks(chunk)
                .map(|c| s.spawn(move || c.iter().map(score).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("scoring thread panicked"))
                .collect()
        }))
    }

    fn hit(&self, i: usize, similarity: f64) -> RetrievalHit {
        let e = &self.entries[i];
        RetrievalHit {
            para_id: e.para_id.clone(),
            doc_id: e.doc_id.clone(),
            page_number: e.page_number,
            similarity,
            excerpt: e.excerpt.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub para_id: String,
    pub doc_id: String,
    pub page_number: usize,
    pub similarity: f64,
    pub excerpt: String,
}

pub fn descending(a: &RetrievalHit, b: &RetrievalHit) -> Ordering {
    b.similarity
        .total_cmp(&a.similarity)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
        .then_with(|| a.para_id.cmp(&b.para_id))
}

pub fn ascending(a: &RetrievalHit, b: &RetrievalHit) -> Ordering {
    a.similarity
        .total_cmp(&b.similarity)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
        .then_with(|| a.para_id.cmp(&b.para_id))
}

/// Paragraphs whose similarity to `q` is at least `threshold`, best first.
pub fn retrieve(
    q: &[f32],
    threshold: f64,
    index: &ParagraphIndex,
) -> Result<Vec<RetrievalHit>, RetrievalError> {
    let scores = index.scores(q)?;
    let mut hits: Vec<RetrievalHit> = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= threshold)
        .map(|(i, &s)| index.hit(i, s))
        .collect();
    hits.sort_by(descending);
    Ok(hits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocLabel {
    pub doc_id: String,
    pub label: String,
    pub predicted: bool,
    pub best_similarity: Option<f64>,
    pub best_para_id: Option<String>,
}

/// Labels every document of the index for one agenda.
///
/// Documents without a retrievable paragraph are negative with no best
/// similarity. Among equally similar paragraphs the smallest `para_id` wins.
pub fn classify_documents(
    label: &str,
    q: &[f32],
    threshold: f64,
    index: &ParagraphIndex,
) -> Result<Vec<DocLabel>, RetrievalError> {
    let scores = index.scores(q)?;
    let mut best: BTreeMap<&str, (f64, &str)> = BTreeMap::new();
    for (e, &s) in index.entries.iter().zip(&scores) {
        best.entry(&e.doc_id)
            .and_modify(|b| {
                if s > b.0 || (s == b.0 && e.para_id.as_str() < b.1) {
                    *b = (s, &e.para_id);
                }
            })
            .or_insert((s, &e.para_id));
    }
    Ok(index
        .doc_ids
        .iter()
        .map(|d| {
            let b = best.get(d.as_str());
            DocLabel {
                doc_id: d.clone(),
                label: label.to_owned(),
                predicted: b.is_some_and(|b| b.0 >= threshold),
                best_similarity: b.map(|b| b.0),
                best_para_id: b.map(|b| b.1.to_owned()),
            }
        })
        .collect())
}

/// One threshold in a descent and the hits it newly admits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentStep {
    pub threshold: f64,
    pub admitted: Vec<RetrievalHit>,
}

/// Rounds to 9 decimals so repeated decrements land on the intended values.
pub fn snap_threshold(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Lowers the threshold from `start` by `step` down to `floor`.
///
/// The first item holds every hit at or above `start`; each later item holds
/// the hits with `previous > similarity >= threshold`.
pub struct ThresholdDescent {
    sorted: Vec<RetrievalHit>,
    cursor: usize,
    start: f64,
    step: f64,
    floor: f64,
    i: u32,
}

impl Iterator for ThresholdDescent {
    type Item = DescentStep;

    fn next(&mut self) -> Option<DescentStep> {
        let threshold = snap_threshold(self.start - f64::from(self.i) * self.step);
        if threshold < self.floor - 1e-12 {
            return None;
        }
        self.i += 1;
        let end = self.sorted[self.cursor..]
            .iter()
            .position(|h| h.similarity < threshold)
            .map_or(self.sorted.len(), |p| self.cursor + p);
        let admitted = self.sorted[self.cursor..end].to_vec();
        self.cursor = end;
        Some(DescentStep {
            threshold,
            admitted,
        })
    }
}

pub fn descend_threshold(
    q: &[f32],
    start: f64,
    step: f64,
    floor: f64,
    index: &ParagraphIndex,
) -> Result<ThresholdDescent, RetrievalError> {
    if step.is_nan() || step <= 0.0 {
        return Err(RetrievalError::Threshold(step));
    }
    let sorted = retrieve(q, snap_threshold(floor), index)?;
    Ok(ThresholdDescent {
        sorted,
        cursor: 0,
        start: snap_threshold(start),
        step,
        floor: snap_threshold(floor),
        i: 0,
    })
}

/// Writes `(agenda, hit)` rows as CSV with a header row.
pub fn write_hits_csv(path: &Path, rows: &[(&str, &RetrievalHit)]) -> Result<(), RetrievalError> {
    let err = |e: csv::Error| RetrievalError::Io {
        path: path.to_owned(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["agenda", "doc_id", "para_id", "page", "similarity", "excerpt"])
        .map_err(err)?;
    for (label, h) in rows {
        w.write_record([
            label,
            h.doc_id.as_str(),
            h.para_id.as_str(),
            &h.page_number.to_string(),
            &h.similarity.to_string(),
            &h.excerpt,
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| RetrievalError::Io {
        path: path.to_owned(),
        source: e,
    })
}

//! Collocation detection: frequent adjacent token pairs become single tokens.
//!
//! A pair `(a, b)` is merged when it occurs at least `min_pair_count` times
//! and its discounted co-occurrence score
//!
//! ```text
//! (count(ab) - min_pair_count) * V / (count(a) * count(b))
//! ```
//!
//! exceeds the threshold, `V` being the number of distinct tokens. A second
//! pass over the rewritten streams turns bigram + unigram pairs into
//! trigrams.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const JOIN: char = '_';
const MAX_CONSTITUENTS: usize = 3;

#[derive(Debug, Error)]
pub enum PhraseError {
    #[error("passes must be 1 or 2, got {0}")]
    InvalidPasses(usize),
    #[error("min_pair_count must be at least 1")]
    InvalidMinCount,
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

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhraseConfig {
    pub min_pair_count: usize,
    pub score_threshold: f64,
    pub passes: usize,
}

impl Default for PhraseConfig {
    fn default() -> Self {
        PhraseConfig {
            min_pair_count: 15,
            score_threshold: 10.0,
            passes: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub merged: String,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhraseTable {
    /// One merge map per pass, applied in order.
    passes: Vec<BTreeMap<(String, String), Merge>>,
}

impl PhraseTable {
    pub fn pass_count(&self) -> usize {
        self.passes.len()
    }

    pub fn len(&self) -> usize {
        self.passes.iter().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, left: &str, right: &str) -> Option<&Merge> {
        let key = (left.to_owned(), right.to_owned());
        self.passes.iter().find_map(|p| p.get(&key))
    }

    /// All merges as `(left, right, merge)` in pass order.
    pub fn merges(&self) -> impl Iterator<Item = (&str, &str, &Merge)> {
        self.passes
            .iter()
            .flat_map(|p| p.iter().map(|((a, b), m)| (a.as_str(), b.as_str(), m)))
    }

    /// Greedy left-to-right replacement, one sweep per pass.
    pub fn apply(&self, tokens: &[String]) -> Vec<String> {
        let mut current = tokens.to_vec();
        for pass in &self.passes {
            current = apply_pass(pass, &current);
        }
        current
    }

    pub fn save(&self, path: &Path) -> Result<(), PhraseError> {
        let io = |e| PhraseError::Io {
            path: path.to_owned(),
            source: e,
        };
        let mut out = BufWriter::new(fs::File::create(path).map_err(io)?);
        for (a, b, m) in self.merges() {
            writeln!(out, "{a} {b} {}", m.score).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    /// Reads "token_a token_b score" lines. Merges whose constituents are
    /// themselves phrases belong to the second pass.
    pub fn load(path: &Path) -> Result<Self, PhraseError> {
        let io = |e| PhraseError::Io {
            path: path.to_owned(),
            source: e,
        };
        let file = fs::File::open(path).map_err(io)?;
        let mut table = PhraseTable::default();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |reason: String| PhraseError::Parse {
                path: path.to_owned(),
                line: n + 1,
                reason,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [a, b, score] = fields[..] else {
                return Err(parse_err(format!(
                    "expected 3 fields, found {}",
                    fields.len()
                )));
            };
            let score: f64 = score
                .parse()
                .map_err(|_| parse_err(format!("score `{score}` is not a number")))?;
            let pass = if a.contains(JOIN) || b.contains(JOIN) { 1 } else { 0 };
            while table.passes.len() <= pass {
                table.passes.push(BTreeMap::new());
            }
            table.passes[pass].insert(
                (a.to_owned(), b.to_owned()),
                Merge {
                    merged: format!("{a}{JOIN}{b}"),
                    score,
                },
            );
        }
        Ok(table)
    }
}

fn apply_pass(pass: &BTreeMap<(String, String), Merge>, tokens: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut key = (String::new(), String::new());
    let mut i = 0;
    while i < tokens.len() {
        if i + 1 < tokens.len() {
            key.0.clone_from(&tokens[i]);
            key.1.clone_from(&tokens[i + 1]);
            if let Some(m) = pass.get(&key) {
                out.push(m.merged.clone());
                i += 2;
                continue;
            }
        }
        out.push(tokens[i].clone());
        i += 1;
    }
    out
}

fn constituents(token: &str) -> usize {
    token.split(JOIN).count()
}

/// Unigram and adjacent-pair counts. Shards count independently and are
/// summed with [`Counts::merge`].
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Counts {
    pub unigrams: HashMap<String, usize>,
    pub pairs: HashMap<(String, String), usize>,
}

impl Counts {
    pub fn add_stream(&mut self, tokens: &[String]) {
        for t in tokens {
            *self.unigrams.entry(t.clone()).or_default() += 1;
        }
        for w in tokens.windows(2) {
            *self.pairs.entry((w[0].clone(), w[1].clone())).or_default() += 1;
        }
    }

    pub fn merge(mut self, other: Counts) -> Counts {
        for (k, v) in other.unigrams {
            *self.unigrams.entry(k).or_default() += v;
        }
        for (k, v) in other.pairs {
            *self.pairs.entry(k).or_default() += v;
        }
        self
    }

    pub fn from_streams(streams: &[Vec<String>]) -> Counts {
        let workers = thread::available_parallelism().map_or(1, |n| n.get());
        if workers < 2 || streams.len() < 1024 {
            let mut c = Counts::default();
            streams.iter().for_each(|s| c.add_stream(s));
            return c;
        }
        let chunk = streams.len().div_ceil(workers);
        thread::scope(|scope| {
            let handles: Vec<_> = streams
                .chunks(chunk)
                .map(|shard| {
                    scope.spawn(move || {
                        let mut c = Counts::default();
                        shard.iter().for_each(|s| c.add_stream(s));
                        c
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("counting thread panicked"))
                .fold(Counts::default(), Counts::merge)
        })
    }
}

pub fn pair_score(pair_count: usize, a_count: usize, b_count: usize, vocab_size: usize, min_pair_count: usize) -> f64 {
    (pair_count as f64 - min_pair_count as f64) * vocab_size as f64 / (a_count as f64 * b_count as f64)
}

/// Learns bigram merges and, with two passes, trigram merges.
pub fn learn_phrases(streams: &[Vec<String>], config: &PhraseConfig) -> Result<PhraseTable, PhraseError> {
    if !(1..=2).contains(&config.passes) {
        return Err(PhraseError::InvalidPasses(config.passes));
    }
    if config.min_pair_count == 0 {
        return Err(PhraseError::InvalidMinCount);
    }
    let mut table = PhraseTable::default();
    let mut current: Vec<Vec<String>> = streams.to_vec();
    for pass in 0..config.passes {
        if pass > 0 {
            current = current.iter().map(|s| table.apply(s)).collect();
        }
        let counts = Counts::from_streams(&current);
        let vocab_size = counts.unigrams.len();
        let mut merges = BTreeMap::new();
        for ((a, b), &n) in &counts.pairs {
            if n < config.min_pair_count {
                continue;
            }
            let parts = constituents(a) + constituents(b);
            let eligible = if pass == 0 {
                parts == 2
            } else {
                parts > 2 && parts <= MAX_CONSTITUENTS
            };
            if !eligible {
                continue;
            }
            let score = pair_score(n, counts.unigrams[a], counts.unigrams[b], vocab_size, config.min_pair_count);
            if score > config.score_threshold {
                merges.insert(
                    (a.clone(), b.clone()),
                    Merge {
                        merged: format!("{a}{JOIN}{b}"),
                        score,
                    },
                );
            }
        }
        table.passes.push(merges);
    }
    while table.passes.len() > 1 && table.passes.last().is_some_and(BTreeMap::is_empty) {
        table.passes.pop();
    }
    Ok(table)
}

//! tf-idf statistics over study paragraphs and weighted-mean composition of
//! paragraph and query embeddings.
//!
//! Each paragraph counts as one "document" for idf:
//!
//! ```text
//! tfidf(t, p) = f(t, p) / Σ_t' f(t', p) · ln(N / n_t)
//! ```
//!
//! where `N` is the number of paragraphs and `n_t` the number of paragraphs
//! containing `t`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Paragraph;
use crate::skipgram::Embeddings;
use crate::text::closest_strings;

pub const MAX_QUERY_TERMS: usize = 5;

fn suggestion_text(suggestions: &[String]) -> String {
    if suggestions.is_empty() {
        String::new()
    } else {
        format!("; closest known: {}", suggestions.join(", "))
    }
}

#[derive(Debug, Error)]
pub enum VectorizeError {
    #[error("no paragraphs to fit")]
    EmptyCorpus,
    #[error("paragraph `{0}` appears twice")]
    DuplicateParagraph(String),
    #[error("paragraph `{0}` is not part of the fitted corpus")]
    UnknownParagraph(String),
    #[error("a query needs 1 to {MAX_QUERY_TERMS} terms, got {0}")]
    QueryLength(usize),
    #[error("term `{term}` has no embedding{}", suggestion_text(suggestions))]
    UnknownTerm {
        term: String,
        suggestions: Vec<String>,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl VectorizeError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        VectorizeError::Io {
            path: path.to_owned(),
            source,
        }
    }

    fn format(path: &Path, reason: impl Into<String>) -> Self {
        VectorizeError::Format {
            path: path.to_owned(),
            reason: reason.into(),
        }
    }
}

/// Term statistics of a paragraph collection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TfidfStats {
    term_counts: BTreeMap<String, BTreeMap<String, u32>>,
    lengths: BTreeMap<String, u32>,
    doc_freq: BTreeMap<String, u32>,
    n_paragraphs: usize,
}

impl TfidfStats {
    pub fn add(&mut self, para_id: &str, tokens: &[String]) -> Result<(), VectorizeError> {
        if self.lengths.contains_key(para_id) {
            return Err(VectorizeError::DuplicateParagraph(para_id.to_owned()));
        }
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t.clone()).or_default() += 1;
        }
        for term in counts.keys() {
            *self.doc_freq.entry(term.clone()).or_default() += 1;
        }
        self.lengths.insert(para_id.to_owned(), tokens.len() as u32);
        self.term_counts.insert(para_id.to_owned(), counts);
        self.n_paragraphs += 1;
        Ok(())
    }

    /// Sums statistics of two disjoint paragraph shards.
    pub fn merge(mut self, other: TfidfStats) -> Result<TfidfStats, VectorizeError> {
        for (para_id, counts) in other.term_counts {
            if self.lengths.contains_key(&para_id) {
                return Err(VectorizeError::DuplicateParagraph(para_id));
            }
            self.lengths.insert(para_id.clone(), other.lengths[&para_id]);
            self.term_counts.insert(para_id, counts);
        }
        for (term, n) in other.doc_freq {
            *self.doc_freq.entry(term).or_default() += n;
        }
        self.n_paragraphs += other.n_paragraphs;
        Ok(self)
    }

    pub fn n_paragraphs(&self) -> usize {
        self.n_paragraphs
    }

    pub fn contains_paragraph(&self, para_id: &str) -> bool {
        self.lengths.contains_key(para_id)
    }

    pub fn paragraph_length(&self, para_id: &str) -> Option<u32> {
        self.lengths.get(para_id).copied()
    }

    pub fn term_counts(&self, para_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.term_counts.get(para_id)
    }

    /// Number of paragraphs containing `term`.
    pub fn doc_freq(&self, term: &str) -> Option<u32> {
        self.doc_freq.get(term).copied()
    }

    pub fn tf(&self, term: &str, para_id: &str) -> f64 {
        let len = self.lengths.get(para_id).copied().unwrap_or(0);
        if len == 0 {
            return 0.0;
        }
        let f = self
            .term_counts
            .get(para_id)
            .and_then(|c| c.get(term))
            .copied()
            .unwrap_or(0);
        f64::from(f) / f64::from(len)
    }

    /// `ln(N / n_t)`, or `None` for a term never seen.
    pub fn idf(&self, term: &str) -> Option<f64> {
        self.doc_freq
            .get(term)
            .map(|&n| (self.n_paragraphs as f64 / f64::from(n)).ln())
    }

    /// Largest idf over observed terms; that of a term seen once.
    pub fn max_idf(&self) -> f64 {
        self.doc_freq
            .values()
            .min()
            .map_or(0.0, |&n| (self.n_paragraphs as f64 / f64::from(n)).ln())
    }

    pub fn tfidf(&self, term: &str, para_id: &str) -> f64 {
        match self.idf(term) {
            Some(idf) => self.tf(term, para_id) * idf,
            None => 0.0,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), VectorizeError> {
        let file = fs::File::create(path).map_err(|e| VectorizeError::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self)
            .map_err(|e| VectorizeError::format(path, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, VectorizeError> {
        let file = fs::File::open(path).map_err(|e| VectorizeError::io(path, e))?;
        serde_json::from_reader(BufReader::new(file))
            .map_err(|e| VectorizeError::format(path, e.to_string()))
    }
}

pub fn fit_tfidf<'a, I>(paragraphs: I) -> Result<TfidfStats, VectorizeError>
where
    I: IntoIterator<Item = &'a Paragraph>,
{
    let mut stats = TfidfStats::default();
    for p in paragraphs {
        stats.add(&p.para_id, &p.tokens)?;
    }
    if stats.n_paragraphs == 0 {
        return Err(VectorizeError::EmptyCorpus);
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParagraphVector {
    pub para_id: String,
    pub doc_id: String,
    pub page_number: usize,
    pub vector: Vec<f32>,
    /// Fraction of the paragraph's tokens that have an embedding.
    pub coverage: f64,
    /// False when the vector is zero (no weighted in-vocabulary token).
    pub retrievable: bool,
}

/// Weighted mean of `terms`' vectors; `None` if no term carries weight.
fn weighted_mean<'a, I>(terms: I, emb: &Embeddings) -> Option<Vec<f64>>
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    let mut acc = vec![0.0f64; emb.dim()];
    let mut total = 0.0;
    for (term, w) in terms {
        if w == 0.0 {
            continue;
        }
        let Some(v) = emb.get(term) else { continue };
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += w * f64::from(x);
        }
        total += w;
    }
    (total > 0.0).then(|| acc.into_iter().map(|a| a / total).collect())
}

/// tf-idf weighted mean of the paragraph's in-vocabulary word vectors.
pub fn embed_paragraph(
    para: &Paragraph,
    stats: &TfidfStats,
    emb: &Embeddings,
) -> Result<ParagraphVector, VectorizeError> {
    let counts = stats
        .term_counts(&para.para_id)
        .ok_or_else(|| VectorizeError::UnknownParagraph(para.para_id.clone()))?;
    let len = stats.paragraph_length(&para.para_id).unwrap_or(0);
    let covered: u32 = counts
        .iter()
        .filter(|(t, _)| emb.contains(t))
        .map(|(_, &c)| c)
        .sum();
    let weights = counts
        .keys()
        .map(|t| (t.as_str(), stats.tfidf(t, &para.para_id)));
    let mean = weighted_mean(weights, emb);
    Ok(ParagraphVector {
        para_id: para.para_id.clone(),
        doc_id: para.doc_id.clone(),
        page_number: para.page_number,
        retrievable: mean.is_some(),
        vector: mean.map_or_else(|| vec![0.0; emb.dim()], |m| m.into_iter().map(|x| x as f32).collect()),
        coverage: if len == 0 { 0.0 } else { f64::from(covered) / f64::from(len) },
    })
}

pub fn embed_paragraphs<'a, I>(
    paragraphs: I,
    stats: &TfidfStats,
    emb: &Embeddings,
) -> Result<Vec<ParagraphVector>, VectorizeError>
where
    I: IntoIterator<Item = &'a Paragraph>,
{
    paragraphs
        .into_iter()
        .map(|p| embed_paragraph(p, stats, emb))
        .collect()
}

/// idf-weighted mean of the query terms' vectors.
///
/// Terms missing from the study corpus get the maximum observed idf. If every
/// weight is zero the terms are averaged unweighted.
pub fn embed_query(
    terms: &[String],
    stats: &TfidfStats,
    emb: &Embeddings,
) -> Result<Vec<f32>, VectorizeError> {
    if terms.is_empty() || terms.len() > MAX_QUERY_TERMS {
        return Err(VectorizeError::QueryLength(terms.len()));
    }
    if let Some(missing) = terms.iter().find(|t| !emb.contains(t)) {
        return Err(VectorizeError::UnknownTerm {
            term: missing.clone(),
            suggestions: closest_strings(missing, emb.words().iter().map(String::as_str), 5),
        });
    }
    let max_idf = stats.max_idf();
    let weighted = terms
        .iter()
        .map(|t| (t.as_str(), stats.idf(t).unwrap_or(max_idf)));
    let mean = weighted_mean(weighted, emb)
        .or_else(|| weighted_mean(terms.iter().map(|t| (t.as_str(), 1.0)), emb))
        .expect("terms are in the vocabulary");
    Ok(mean.into_iter().map(|x| x as f32).collect())
}

/// Writes `<base>.bin` (header "N d" then row-major little-endian f32) and
/// `<base>.index.tsv` (para_id, doc_id, page, coverage, retrievable).
pub fn save_paragraph_vectors(base: &Path, vectors: &[ParagraphVector]) -> Result<(), VectorizeError> {
    let dim = vectors.first().map_or(0, |v| v.vector.len());
    let bin = base.with_extension("bin");
    let io = |e| VectorizeError::io(&bin, e);
    let mut out = BufWriter::new(fs::File::create(&bin).map_err(io)?);
    writeln!(out, "{} {dim}", vectors.len()).map_err(io)?;
    for v in vectors {
        if v.vector.len() != dim {
            return Err(VectorizeError::format(&bin, format!("`{}` has dimension {}", v.para_id, v.vector.len())));
        }
        for x in &v.vector {
            out.write_all(&x.to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)?;

    let idx = base.with_extension("index.tsv");
    let io = |e| VectorizeError::io(&idx, e);
    let mut out = BufWriter::new(fs::File::create(&idx).map_err(io)?);
    for v in vectors {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            v.para_id,
            v.doc_id,
            v.page_number,
            v.coverage,
            u8::from(v.retrievable)
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn load_paragraph_vectors(base: &Path) -> Result<Vec<ParagraphVector>, VectorizeError> {
    let bin = base.with_extension("bin");
    let mut reader = BufReader::new(fs::File::open(&bin).map_err(|e| VectorizeError::io(&bin, e))?);
    let mut header = String::new();
    reader.read_line(&mut header).map_err(|e| VectorizeError::io(&bin, e))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| VectorizeError::format(&bin, "bad header"))?;
    let [n, dim] = dims[..] else {
        return Err(VectorizeError::format(&bin, "bad header"));
    };
    let mut data = vec![0u8; n * dim * 4];
    reader
        .read_exact(&mut data)
        .map_err(|_| VectorizeError::format(&bin, "truncated matrix"))?;

    let idx = base.with_extension("index.tsv");
    let file = fs::File::open(&idx).map_err(|e| VectorizeError::io(&idx, e))?;
    let mut out = Vec::with_capacity(n);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| VectorizeError::io(&idx, e))?;
        let bad = || VectorizeError::format(&idx, format!("line {}: malformed record", i + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        let [para_id, doc_id, page, coverage, retrievable] = fields[..] else {
            return Err(bad());
        };
        if i >= n {
            return Err(VectorizeError::format(&idx, format!("more than {n} records")));
        }
        let row = &data[i * dim * 4..(i + 1) * dim * 4];
        out.push(ParagraphVector {
            para_id: para_id.to_owned(),
            doc_id: doc_id.to_owned(),
            page_number: page.parse().map_err(|_| bad())?,
            coverage: coverage.parse().map_err(|_| bad())?,
            retrievable: retrievable == "1",
            vector: row
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
        });
    }
    if out.len() != n {
        return Err(VectorizeError::format(&idx, format!("expected {n} records, found {}", out.len())));
    }
    Ok(out)
}

/// Paragraph id → paragraph vector lookup.
pub fn by_para_id(vectors: &[ParagraphVector]) -> HashMap<&str, &ParagraphVector> {
    vectors.iter().map(|v| (v.para_id.as_str(), v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn para(id: &str, tokens: &str) -> Paragraph {
        Paragraph {
            para_id: id.into(),
            doc_id: "d".into(),
            page_number: 1,
            sentences: vec![tokens.into()],
            tokens: tokens.split_whitespace().map(str::to_owned).collect(),
        }
    }

    fn emb(rows: &[(&str, &[f32])]) -> Embeddings {
        let dim = rows[0].1.len();
        Embeddings::new(
            rows.iter().map(|(w, _)| w.to_string()).collect(),
            dim,
            rows.iter().flat_map(|(_, v)| v.iter().copied()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn hand_counted_fixture() {
        let paras = [para("d1", "a a b"), para("d2", "a c")];
        let s = fit_tfidf(&paras).unwrap();
        assert_eq!(s.n_paragraphs(), 2);
        assert_eq!(s.doc_freq("a"), Some(2));
        assert_eq!(s.doc_freq("b"), Some(1));
        assert_eq!(s.tf("b", "d1"), 1.0 / 3.0);
        assert_eq!(s.tfidf("a", "d1"), 0.0);
        // (1/3) ln 2 = 0.23104906...
        assert!((s.tfidf("b", "d1") - 0.231_049_060_186_648_4).abs() < 1e-12);
    }

    #[test]
    fn empty_and_duplicate_rejected() {
        assert!(matches!(fit_tfidf(&[]), Err(VectorizeError::EmptyCorpus)));
        let dup = [para("p", "a"), para("p", "b")];
        assert!(matches!(fit_tfidf(&dup), Err(VectorizeError::DuplicateParagraph(_))));
    }

    #[test]
    fn shard_merge_equals_whole() {
        let paras = [para("1", "a b"), para("2", "b c c"), para("3", "a d"), para("4", "")];
        let whole = fit_tfidf(&paras).unwrap();
        let merged = fit_tfidf(&paras[..2])
            .unwrap()
            .merge(fit_tfidf(&paras[2..]).unwrap())
            .unwrap();
        assert_eq!(merged, whole);
    }

    #[test]
    fn single_term_paragraph_is_its_vector() {
        let paras = [para("p1", "tree tree"), para("p2", "soil")];
        let s = fit_tfidf(&paras).unwrap();
        let e = emb(&[("tree", &[0.3, -1.5]), ("soil", &[1.0, 1.0])]);
        let v = embed_paragraph(&paras[0], &s, &e).unwrap();
        assert_eq!(v.vector, vec![0.3, -1.5]);
        assert!(v.retrievable);
        assert_eq!(v.coverage, 1.0);
    }

    #[test]
    fn out_of_vocabulary_paragraph_is_flagged() {
        let paras = [para("p1", "zz yy"), para("p2", "soil")];
        let s = fit_tfidf(&paras).unwrap();
        let e = emb(&[("soil", &[1.0, 1.0])]);
        let v = embed_paragraph(&paras[0], &s, &e).unwrap();
        assert_eq!(v.vector, vec![0.0, 0.0]);
        assert!(!v.retrievable);
        assert_eq!(v.coverage, 0.0);
    }

    #[test]
    fn two_token_weighted_mean() {
        // p1 = [a, b, b, x]; N = 4 paragraphs; n_a = 1, n_b = 2, x is OOV.
        // w_a = 1/4 ln 4, w_b = 2/4 ln 2 = 1/4 ln 4, so the mean is the plain
        // midpoint: ((1 + 3) / 2, (0 + 2) / 2) = (2, 1).
        let paras = [para("p1", "a b b x"), para("p2", "b c"), para("p3", "c"), para("p4", "c x")];
        let s = fit_tfidf(&paras).unwrap();
        let e = emb(&[("a", &[1.0, 0.0]), ("b", &[3.0, 2.0]), ("c", &[9.0, 9.0])]);
        let v = embed_paragraph(&paras[0], &s, &e).unwrap();
        assert!((v.vector[0] - 2.0).abs() < 1e-6 && (v.vector[1] - 1.0).abs() < 1e-6);
        assert_eq!(v.coverage, 0.75);
    }

    #[test]
    fn unknown_paragraph_rejected() {
        let s = fit_tfidf(&[para("p1", "a")]).unwrap();
        let e = emb(&[("a", &[1.0])]);
        assert!(matches!(
            embed_paragraph(&para("other", "a"), &s, &e),
            Err(VectorizeError::UnknownParagraph(_))
        ));
    }

    fn terms(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn query_composition() {
        let paras = [para("p1", "a b"), para("p2", "b"), para("p3", "c"), para("p4", "c")];
        let s = fit_tfidf(&paras).unwrap();
        let e = emb(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0]), ("c", &[1.0, 1.0]), ("agroforestry", &[0.2, 0.7])]);
        assert_eq!(embed_query(&terms("agroforestry"), &s, &e).unwrap(), vec![0.2, 0.7]);
        // idf(a) = ln 4, idf(b) = ln 2 => weights 2/3 and 1/3.
        let q = embed_query(&terms("a b"), &s, &e).unwrap();
        assert!((q[0] - 2.0 / 3.0).abs() < 1e-6 && (q[1] - 1.0 / 3.0).abs() < 1e-6);
        // "agroforestry" is absent from the paragraphs: it takes max idf ln 4,
        // tying with "a".
        let q = embed_query(&terms("a agroforestry"), &s, &e).unwrap();
        assert!((q[0] - 0.6).abs() < 1e-6 && (q[1] - 0.35).abs() < 1e-6);
    }

    #[test]
    fn query_length_and_vocabulary_checked() {
        let s = fit_tfidf(&[para("p1", "a")]).unwrap();
        let e = emb(&[("a", &[1.0]), ("forest", &[2.0])]);
        assert!(matches!(
            embed_query(&terms("a a a a a a"), &s, &e),
            Err(VectorizeError::QueryLength(6))
        ));
        assert!(matches!(embed_query(&[], &s, &e), Err(VectorizeError::QueryLength(0))));
        match embed_query(&terms("forrest"), &s, &e) {
            Err(VectorizeError::UnknownTerm { term, suggestions }) => {
                assert_eq!(term, "forrest");
                assert_eq!(suggestions, vec!["forest".to_owned()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_idf_query_falls_back_to_plain_mean() {
        let s = fit_tfidf(&[para("p1", "a b")]).unwrap();
        let e = emb(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        assert_eq!(embed_query(&terms("a b"), &s, &e).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn vector_files_round_trip() {
        let paras = [para("p1", "a b"), para("p2", "zz")];
        let s = fit_tfidf(&paras).unwrap();
        let e = emb(&[("a", &[1.0, 0.5]), ("b", &[0.25, 1.0])]);
        let vectors = embed_paragraphs(&paras, &s, &e).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("paragraphs");
        save_paragraph_vectors(&base, &vectors).unwrap();
        assert_eq!(load_paragraph_vectors(&base).unwrap(), vectors);
        let stats_path = dir.path().join("stats.json");
        s.save(&stats_path).unwrap();
        assert_eq!(TfidfStats::load(&stats_path).unwrap(), s);
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["a", "b", "c", "d", "e", "oov"]).prop_map(str::to_owned)
    }

    fn embeddings() -> Embeddings {
        emb(&[
            ("a", &[1.0, 0.0, 0.5]),
            ("b", &[-0.3, 2.0, 0.1]),
            ("c", &[0.7, 0.7, -1.0]),
            ("d", &[0.0, -0.4, 3.0]),
            ("e", &[2.5, 1.0, 0.0]),
        ])
    }

    proptest! {
        #[test]
        fn tf_is_scale_free(tokens in prop::collection::vec(word(), 1..20), k in 2usize..5) {
            let scaled: Vec<String> = tokens.iter().flat_map(|t| std::iter::repeat_n(t.clone(), k)).collect();
            let mut s = TfidfStats::default();
            s.add("p", &tokens).unwrap();
            s.add("q", &scaled).unwrap();
            for t in &tokens {
                prop_assert!((s.tf(t, "p") - s.tf(t, "q")).abs() < 1e-15);
            }
        }

        #[test]
        fn paragraph_vector_ignores_order_and_stays_in_hull(
            tokens in prop::collection::vec(word(), 1..20),
            others in prop::collection::vec(prop::collection::vec(word(), 1..10), 1..6),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = tokens.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let e = embeddings();
            let mut s = TfidfStats::default();
            s.add("p", &tokens).unwrap();
            s.add("q", &shuffled).unwrap();
            for (i, o) in others.iter().enumerate() {
                s.add(&format!("o{i}"), o).unwrap();
            }
            let mk = |id: &str, t: &[String]| Paragraph { para_id: id.into(), doc_id: "d".into(), page_number: 1, sentences: vec![], tokens: t.to_vec() };
            let vp = embed_paragraph(&mk("p", &tokens), &s, &e).unwrap();
            let vq = embed_paragraph(&mk("q", &shuffled), &s, &e).unwrap();
            prop_assert_eq!(&vp.vector, &vq.vector);
            if vp.retrievable {
                for k in 0..3 {
                    let coords: Vec<f32> = tokens.iter().filter_map(|t| e.get(t)).map(|v| v[k]).collect();
                    let lo = coords.iter().cloned().fold(f32::INFINITY, f32::min);
                    let hi = coords.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
                    prop_assert!(vp.vector[k] >= lo - 1e-5 && vp.vector[k] <= hi + 1e-5);
                }
            }
        }
    }
}

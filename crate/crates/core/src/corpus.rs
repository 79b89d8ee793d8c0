//! Document ingestion, cleaning, spelling correction and segmentation.
//!
//! Documents arrive as plain text with pages separated by a delimiter
//! (form feed by default). Cleaning strips page furniture with an ordered,
//! serializable list of regex rules. Segmentation then splits every page
//! into paragraphs on blank lines and paragraphs into sentences, keeping the
//! 1-based page number of every paragraph so reports can point back into the
//! source.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::levenshtein_within;

pub const DEFAULT_PAGE_DELIMITER: &str = "\u{0C}";
pub const DEFAULT_MIN_PARAGRAPH_TOKENS: usize = 8;

/// Passes after which a rule set that keeps rewriting its own output is
/// rejected.
const MAX_CLEANING_PASSES: usize = 32;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("document `{0}` has empty text")]
    EmptyText(String),
    #[error("document id must not be empty")]
    EmptyId,
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("invalid cleaning pattern `{pattern}`: {reason}")]
    BadPattern { pattern: String, reason: String },
    #[error("cleaning rules still rewriting text after {0} passes")]
    NotConvergent(usize),
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMeta {
    pub doc_id: String,
    pub country: String,
    pub sector: String,
    pub title: String,
}

impl DocMeta {
    pub fn new(doc_id: impl Into<String>) -> Self {
        DocMeta {
            doc_id: doc_id.into(),
            ..Default::default()
        }
    }
}

/// A spelling replacement applied to a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub original: String,
    pub replacement: String,
    pub occurrences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub para_id: String,
    pub doc_id: String,
    /// 1-based.
    pub page_number: usize,
    pub sentences: Vec<String>,
    pub tokens: Vec<String>,
}

impl Paragraph {
    pub fn text(&self) -> String {
        self.sentences.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    #[serde(flatten)]
    pub meta: DocMeta,
    /// Page texts as ingested; kept for back-reference after cleaning.
    pub raw_pages: Vec<String>,
    /// Working page texts (cleaned and spell-corrected once those stages ran).
    pub pages: Vec<String>,
    #[serde(default)]
    pub paragraphs: Vec<Paragraph>,
    #[serde(default)]
    pub corrections: Vec<Correction>,
}

impl Document {
    pub fn doc_id(&self) -> &str {
        &self.meta.doc_id
    }

    /// Page text by 1-based page number.
    pub fn page(&self, page_number: usize) -> Option<&str> {
        page_number
            .checked_sub(1)
            .and_then(|i| self.pages.get(i))
            .map(String::as_str)
    }
}

/// Splits `text` into pages on `page_delimiter`.
///
/// A single trailing delimiter (common in extracted text) does not create an
/// extra empty page.
pub fn ingest(text: &str, meta: DocMeta, page_delimiter: &str) -> Result<Document, CorpusError> {
    if meta.doc_id.trim().is_empty() {
        return Err(CorpusError::EmptyId);
    }
    if text.trim().is_empty() {
        return Err(CorpusError::EmptyText(meta.doc_id));
    }
    let mut pages: Vec<String> = if page_delimiter.is_empty() {
        vec![text.to_owned()]
    } else {
        text.split(page_delimiter).map(str::to_owned).collect()
    };
    if pages.len() > 1 && pages.last().is_some_and(|p| p.trim().is_empty()) {
        pages.pop();
    }
    Ok(Document {
        meta,
        raw_pages: pages.clone(),
        pages,
        paragraphs: Vec::new(),
        corrections: Vec::new(),
    })
}

/// An ordered collection of documents with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    documents: Vec<Document>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, doc: Document) -> Result<(), CorpusError> {
        if self.index.contains_key(doc.doc_id()) {
            return Err(CorpusError::DuplicateId(doc.meta.doc_id));
        }
        self.index.insert(doc.meta.doc_id.clone(), self.documents.len());
        self.documents.push(doc);
        Ok(())
    }

    pub fn from_documents(docs: Vec<Document>) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::new();
        for doc in docs {
            corpus.add(doc)?;
        }
        Ok(corpus)
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.index.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn documents_mut(&mut self) -> &mut [Document] {
        &mut self.documents
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn paragraphs(&self) -> impl Iterator<Item = &Paragraph> {
        self.documents.iter().flat_map(|d| d.paragraphs.iter())
    }

    /// Applies `f` to every document, producing a new corpus.
    pub fn map<F>(&self, mut f: F) -> Result<Corpus, CorpusError>
    where
        F: FnMut(&Document) -> Result<Document, CorpusError>,
    {
        let docs = self.documents.iter().map(&mut f).collect::<Result<_, _>>()?;
        Corpus::from_documents(docs)
    }
}

// ---------------------------------------------------------------------------
// Cleaning

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningRule {
    #[serde(default)]
    pub name: String,
    pub pattern: String,
    #[serde(default)]
    pub replacement: String,
}

impl CleaningRule {
    pub fn new(name: &str, pattern: &str, replacement: &str) -> Self {
        CleaningRule {
            name: name.to_owned(),
            pattern: pattern.to_owned(),
            replacement: replacement.to_owned(),
        }
    }
}

/// Ordered regex substitutions applied to every page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningRules {
    pub rules: Vec<CleaningRule>,
}

impl Default for CleaningRules {
    fn default() -> Self {
        CleaningRules {
            rules: vec![
                CleaningRule::new(
                    "page-number",
                    r"(?m)^[ \t]*(?:[Pp]age[ \t]+)?\d{1,4}(?:[ \t]+of[ \t]+\d{1,4})?[ \t]*(?:\r?\n|\z)",
                    "",
                ),
                CleaningRule::new(
                    "bracket-citation",
                    r"[ \t]?\[\d{1,3}(?:[ \t]*[,;\u{2013}-][ \t]*\d{1,3})*\]",
                    "",
                ),
                CleaningRule::new(
                    "author-year-citation",
                    r"[ \t]?\([A-Z][A-Za-z'\-]+(?:[ \t]+et[ \t]+al\.|[ \t]+(?:and|&)[ \t]+[A-Z][A-Za-z'\-]+)?,?[ \t]+\d{4}[a-z]?\)",
                    "",
                ),
                CleaningRule::new(
                    "caps-header",
                    r"(?m)^[ \t]*(?:\d+(?:\.\d+)*\.?[ \t]+)?[A-Z][A-Z0-9&,:;'()/ \t-]*[A-Z][ \t]*(?:\r?\n|\z)",
                    "",
                ),
            ],
        }
    }
}

impl CleaningRules {
    pub fn empty() -> Self {
        CleaningRules { rules: Vec::new() }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CorpusError::Format {
            path: path.to_owned(),
            reason: e.to_string(),
        })
    }

    pub fn compile(&self) -> Result<CompiledRules, CorpusError> {
        let rules = self
            .rules
            .iter()
            .map(|r| {
                Regex::new(&r.pattern)
                    .map(|re| (re, r.replacement.clone()))
                    .map_err(|e| CorpusError::BadPattern {
                        pattern: r.pattern.clone(),
                        reason: e.to_string(),
                    })
            })
            .collect::<Result<_, _>>()?;
        Ok(CompiledRules { rules })
    }
}

#[derive(Debug, Clone)]
pub struct CompiledRules {
    rules: Vec<(Regex, String)>,
}

impl CompiledRules {
    /// Applies every rule in order, repeating until the text is stable.
    pub fn clean_text(&self, text: &str) -> Result<String, CorpusError> {
        let mut current = text.to_owned();
        for _ in 0..MAX_CLEANING_PASSES {
            let mut next = current.clone();
            for (re, replacement) in &self.rules {
                next = re.replace_all(&next, replacement.as_str()).into_owned();
            }
            if next == current {
                return Ok(current);
            }
            current = next;
        }
        Err(CorpusError::NotConvergent(MAX_CLEANING_PASSES))
    }
}

pub fn clean(doc: &Document, rules: &CompiledRules) -> Result<Document, CorpusError> {
    let pages = doc
        .pages
        .iter()
        .map(|p| rules.clean_text(p))
        .collect::<Result<_, _>>()?;
    Ok(Document {
        pages,
        ..doc.clone()
    })
}

// ---------------------------------------------------------------------------
// Spelling

/// The set of known words, normally the background corpus vocabulary.
#[derive(Debug, Clone)]
pub struct Lexicon {
    words: HashSet<String>,
    by_len: BTreeMap<usize, Vec<Vec<char>>>,
}

impl Lexicon {
    pub fn new<I, S>(words: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: HashSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(CorpusError::EmptyLexicon);
        }
        let mut by_len: BTreeMap<usize, Vec<Vec<char>>> = BTreeMap::new();
        for w in &words {
            let chars: Vec<char> = w.chars().collect();
            by_len.entry(chars.len()).or_default().push(chars);
        }
        Ok(Lexicon { words, by_len })
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Lexicon words within `max_distance` edits of `word`, with distances.
    pub fn candidates(&self, word: &str, max_distance: usize) -> Vec<(String, usize)> {
        let w: Vec<char> = word.chars().collect();
        let lo = w.len().saturating_sub(max_distance);
        let hi = w.len() + max_distance;
        let mut out = Vec::new();
        for bucket in self.by_len.range(lo..=hi).map(|(_, b)| b) {
            for cand in bucket {
                if let Some(d) = levenshtein_within(&w, cand, max_distance) {
                    out.push((cand.iter().collect(), d));
                }
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut words: Vec<&String> = self.words.iter().collect();
        words.sort();
        let mut out = BufWriter::new(fs::File::create(path).map_err(|e| CorpusError::io(path, e))?);
        for w in words {
            writeln!(out, "{w}").map_err(|e| CorpusError::io(path, e))?;
        }
        out.flush().map_err(|e| CorpusError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
        let mut words = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| CorpusError::io(path, e))?;
            let line = line.trim();
            if !line.is_empty() {
                words.push(line.to_owned());
            }
        }
        Lexicon::new(words)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpellConfig {
    pub max_distance: usize,
    /// Words shorter than this are never corrected; every short string is
    /// within two edits of some common word.
    pub min_word_len: usize,
}

impl Default for SpellConfig {
    fn default() -> Self {
        SpellConfig {
            max_distance: 2,
            min_word_len: 4,
        }
    }
}

static WORD_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\p{L}+").unwrap());

/// Replaces out-of-lexicon words by the in-lexicon candidate most frequent in
/// this document.
///
/// Candidates are ranked by in-document frequency, then by edit distance,
/// then lexically. Capitalization of the original is carried over.
pub fn correct_spelling(doc: &Document, lexicon: &Lexicon, config: SpellConfig) -> Document {
    let mut freq: HashMap<String, usize> = HashMap::new();
    for page in &doc.pages {
        for m in WORD_RE.find_iter(page) {
            *freq.entry(m.as_str().to_lowercase()).or_default() += 1;
        }
    }

    let mut choice: HashMap<String, Option<String>> = HashMap::new();
    for word in freq.keys() {
        if lexicon.contains(word) || word.chars().count() < config.min_word_len {
            continue;
        }
        let best = lexicon
            .candidates(word, config.max_distance)
            .into_iter()
            .min_by(|(a, da), (b, db)| {
                let fa = freq.get(a).copied().unwrap_or(0);
                let fb = freq.get(b).copied().unwrap_or(0);
                fb.cmp(&fa).then(da.cmp(db)).then_with(|| a.cmp(b))
            })
            .map(|(w, _)| w);
        choice.insert(word.clone(), best);
    }

    let mut log: BTreeMap<(String, String), usize> = BTreeMap::new();
    let pages = doc
        .pages
        .iter()
        .map(|page| {
            WORD_RE
                .replace_all(page, |caps: &regex::Captures| {
                    let original = &caps[0];
                    let lower = original.to_lowercase();
                    match choice.get(&lower) {
                        Some(Some(rep)) => {
                            *log.entry((lower, rep.clone())).or_default() += 1;
                            match_case(original, rep)
                        }
                        _ => original.to_owned(),
                    }
                })
                .into_owned()
        })
        .collect();

    let mut corrections = doc.corrections.clone();
    corrections.extend(log.into_iter().map(|((original, replacement), occurrences)| {
        Correction {
            original,
            replacement,
            occurrences,
        }
    }));
    Document {
        pages,
        corrections,
        ..doc.clone()
    }
}

fn match_case(original: &str, replacement: &str) -> String {
    let mut chars = original.chars();
    let first_upper = chars.next().is_some_and(char::is_uppercase);
    let rest_upper = original.chars().skip(1).all(char::is_uppercase);
    if first_upper && rest_upper && original.chars().count() > 1 {
        replacement.to_uppercase()
    } else if first_upper {
        let mut c = replacement.chars();
        match c.next() {
            Some(f) => f.to_uppercase().chain(c).collect(),
            None => String::new(),
        }
    } else {
        replacement.to_owned()
    }
}

// ---------------------------------------------------------------------------
// Segmentation

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub min_paragraph_tokens: usize,
    /// Lowercased abbreviations including their trailing period.
    pub abbreviations: Vec<String>,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        let abbreviations = [
            "dr.", "mr.", "mrs.", "ms.", "prof.", "no.", "nos.", "art.", "sec.", "cap.", "vol.",
            "fig.", "e.g.", "i.e.", "cf.", "vs.", "approx.", "govt.", "dept.", "st.", "ha.",
            "km.", "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.", "sept.",
            "oct.", "nov.", "dec.",
        ];
        SegmentConfig {
            min_paragraph_tokens: DEFAULT_MIN_PARAGRAPH_TOKENS,
            abbreviations: abbreviations.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SegmentConfig {
    pub fn with_min_tokens(min_paragraph_tokens: usize) -> Self {
        SegmentConfig {
            min_paragraph_tokens,
            ..Default::default()
        }
    }
}

static BLANK_LINE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\r?\n[ \t\r]*\n(?:[ \t\r]*\n)*").unwrap());
static WS_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());
static BOUNDARY_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"[.!?]+["'\u{2019}\u{201D})\]]*\s+"#).unwrap());
static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\p{N}+(?:[.,]\p{N}+)+|[\p{L}\p{N}]+(?:-[\p{L}\p{N}]+)*").unwrap()
});

/// Lowercased word tokens; punctuation dropped, numerals kept.
pub fn tokenize(text: &str) -> Vec<String> {
    TOKEN_RE
        .find_iter(text)
        .map(|m| m.as_str().to_lowercase())
        .collect()
}

/// Splits whitespace-normalized text into sentences.
pub fn split_sentences(text: &str, abbreviations: &HashSet<String>) -> Vec<String> {
    let text = WS_RE.replace_all(text.trim(), " ");
    let mut out = Vec::new();
    let mut start = 0;
    for m in BOUNDARY_RE.find_iter(&text) {
        let next_upper = text[m.end()..]
            .chars()
            .next()
            .is_some_and(char::is_uppercase);
        if !next_upper || is_abbreviation(&text[start..m.end()], abbreviations) {
            continue;
        }
        let sentence = text[start..m.end()].trim();
        if !sentence.is_empty() {
            out.push(sentence.to_owned());
        }
        start = m.end();
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_owned());
    }
    out
}

fn is_abbreviation(prefix: &str, abbreviations: &HashSet<String>) -> bool {
    let last = prefix.trim_end().rsplit(' ').next().unwrap_or("");
    let last = last.trim_start_matches(|c: char| "(\"'[".contains(c));
    if abbreviations.contains(&last.to_lowercase()) {
        return true;
    }
    // Initials such as "J." in "J. Smith".
    let mut chars = last.chars();
    matches!(
        (chars.next(), chars.next(), chars.next()),
        (Some(c), Some('.'), None) if c.is_uppercase()
    )
}

struct RawParagraph {
    sentences: Vec<String>,
    tokens: Vec<String>,
}

impl RawParagraph {
    fn absorb(&mut self, other: RawParagraph) {
        self.sentences.extend(other.sentences);
        self.tokens.extend(other.tokens);
    }
}

/// Splits every page into paragraphs and sentences and tokenizes them.
///
/// Paragraphs below `min_paragraph_tokens` are merged into the next
/// paragraph on the same page. A short final paragraph is merged into its
/// predecessor, and kept on its own only when it is the page's sole content,
/// so no text is lost.
pub fn segment(doc: &Document, config: &SegmentConfig) -> Document {
    let abbreviations: HashSet<String> = config.abbreviations.iter().cloned().collect();
    let mut paragraphs = Vec::new();
    for (page_idx, page) in doc.pages.iter().enumerate() {
        let raw: Vec<RawParagraph> = BLANK_LINE_RE
            .split(page)
            .filter(|chunk| !chunk.trim().is_empty())
            .map(|chunk| {
                let sentences = split_sentences(chunk, &abbreviations);
                let tokens = sentences.iter().flat_map(|s| tokenize(s)).collect();
                RawParagraph { sentences, tokens }
            })
            .collect();

        let mut merged: Vec<RawParagraph> = Vec::new();
        let mut carry: Option<RawParagraph> = None;
        let n = raw.len();
        for (i, para) in raw.into_iter().enumerate() {
            let para = match carry.take() {
                Some(mut c) => {
                    c.absorb(para);
                    c
                }
                None => para,
            };
            if para.tokens.len() >= config.min_paragraph_tokens {
                merged.push(para);
            } else if i + 1 < n {
                carry = Some(para);
            } else if let Some(prev) = merged.last_mut() {
                prev.absorb(para);
            } else {
                merged.push(para);
            }
        }

        for para in merged {
            let para_id = format!("{}-{:04}", doc.meta.doc_id, paragraphs.len());
            paragraphs.push(Paragraph {
                para_id,
                doc_id: doc.meta.doc_id.clone(),
                page_number: page_idx + 1,
                sentences: para.sentences,
                tokens: para.tokens,
            });
        }
    }
    Document {
        paragraphs,
        ..doc.clone()
    }
}

// ---------------------------------------------------------------------------
// Files

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub doc_id: String,
    pub country: String,
    pub sector: String,
    pub title: String,
    pub path: PathBuf,
}

impl ManifestEntry {
    pub fn meta(&self) -> DocMeta {
        DocMeta {
            doc_id: self.doc_id.clone(),
            country: self.country.clone(),
            sector: self.sector.clone(),
            title: self.title.clone(),
        }
    }
}

/// Reads a manifest CSV; relative document paths resolve against the
/// manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, CorpusError> {
    let base = path.parent().unwrap_or(Path::new("."));
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for row in reader.deserialize::<ManifestEntry>() {
        let mut entry = row.map_err(|e| CorpusError::Format {
            path: path.to_owned(),
            reason: e.to_string(),
        })?;
        if entry.path.is_relative() {
            entry.path = base.join(&entry.path);
        }
        out.push(entry);
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), CorpusError> {
    let to_format = |e: csv::Error| CorpusError::Format {
        path: path.to_owned(),
        reason: e.to_string(),
    };
    let mut writer = csv::Writer::from_path(path).map_err(to_format)?;
    for entry in entries {
        writer.serialize(entry).map_err(to_format)?;
    }
    writer.flush().map_err(|e| CorpusError::io(path, e))
}

/// Ingests every manifest entry; no cleaning applied.
pub fn ingest_manifest(
    entries: &[ManifestEntry],
    page_delimiter: &str,
) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::new();
    for entry in entries {
        let text = fs::read_to_string(&entry.path).map_err(|e| CorpusError::io(&entry.path, e))?;
        corpus.add(ingest(&text, entry.meta(), page_delimiter)?)?;
    }
    Ok(corpus)
}

/// Writes one JSON record per paragraph.
pub fn write_paragraphs(path: &Path, corpus: &Corpus) -> Result<(), CorpusError> {
    write_jsonl(path, corpus.paragraphs())
}

pub fn read_paragraphs(path: &Path) -> Result<Vec<Paragraph>, CorpusError> {
    read_jsonl(path)
}

/// Writes whole documents (metadata, raw and cleaned pages, paragraphs).
pub fn write_documents(path: &Path, corpus: &Corpus) -> Result<(), CorpusError> {
    write_jsonl(path, corpus.documents().iter())
}

pub fn read_documents(path: &Path) -> Result<Corpus, CorpusError> {
    Corpus::from_documents(read_jsonl(path)?)
}

pub(crate) fn write_jsonl<'a, T, I>(path: &Path, items: I) -> Result<(), CorpusError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let file = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| CorpusError::Format {
            path: path.to_owned(),
            reason: e.to_string(),
        })?;
        out.write_all(b"\n").map_err(|e| CorpusError::io(path, e))?;
    }
    out.flush().map_err(|e| CorpusError::io(path, e))
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CorpusError::Format {
            path: path.to_owned(),
            reason: format!("line {}: {e}", n + 1),
        })?);
    }
    Ok(out)
}

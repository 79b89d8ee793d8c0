//! Seeded synthetic corpora with known answers.
//!
//! [`generate`] builds a study collection whose documents carry planted agenda
//! paragraphs, the gold labels for those plants, one query per agenda, and a
//! background corpus drawn from the same vocabulary for training embeddings.
//! [`family_corpus`] builds a small corpus in which two families of tokens
//! each share their own context templates.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_manifest, DocMeta, ManifestEntry, DEFAULT_PAGE_DELIMITER};
use crate::evaluation::GoldLabels;
use crate::retrieval::{write_queries, AgendaQuery, DEFAULT_THRESHOLD};

pub struct Theme {
    pub label: &'static str,
    pub seed_terms: &'static [&'static str],
    pub words: &'static [&'static str],
}

pub const THEMES: [Theme; 6] = [
    Theme {
        label: "agroforestry",
        seed_terms: &["agroforestry", "intercropping"],
        words: &[
            "agroforestry", "intercropping", "shade", "orchards", "fruit", "woodlots", "alley",
            "hedgerows", "fodder", "smallholder",
        ],
    },
    Theme {
        label: "buffer zone",
        seed_terms: &["buffer", "riparian"],
        words: &[
            "buffer", "riparian", "corridors", "setbacks", "margins", "wetlands", "riverbanks",
            "encroachment", "perimeter", "catchment",
        ],
    },
    Theme {
        label: "land tenure",
        seed_terms: &["tenure", "titles"],
        words: &[
            "tenure", "titles", "ownership", "customary", "registry", "cadastre", "leasehold",
            "boundaries", "inheritance", "disputes",
        ],
    },
    Theme {
        label: "forest restoration",
        seed_terms: &["restoration", "reforestation"],
        words: &[
            "restoration", "reforestation", "seedlings", "nurseries", "degraded", "regeneration",
            "planting", "landscapes", "rehabilitation", "saplings",
        ],
    },
    Theme {
        label: "fire management",
        seed_terms: &["wildfire", "firebreaks"],
        words: &[
            "wildfire", "firebreaks", "burning", "ignition", "suppression", "smoke", "flammable",
            "patrols", "brigades", "prescribed",
        ],
    },
    Theme {
        label: "charcoal",
        seed_terms: &["charcoal", "kilns"],
        words: &[
            "charcoal", "kilns", "fuelwood", "stoves", "briquettes", "carbonization", "traders",
            "sacks", "biomass", "cookstoves",
        ],
    },
];

const GENERIC: &[&str] = &[
    "government", "ministry", "national", "policy", "strategy", "implementation", "development",
    "section", "district", "committee", "framework", "budget", "capacity", "stakeholders",
    "monitoring", "evaluation", "programme", "sector", "public", "private", "investment",
    "resources", "management", "institutions", "coordination", "agency", "county", "regional",
    "guidelines", "regulations", "objectives", "priority", "priorities", "actions", "measures",
    "support", "promote", "ensure", "establish", "strengthen", "review", "annual", "report",
    "plan", "plans", "targets", "indicators", "progress", "partners", "donors", "funding",
    "finance", "training", "research", "extension", "services", "communities", "households",
    "income", "livelihoods", "growth", "economic", "social", "environmental", "sustainable",
    "climate", "change", "adaptation", "mitigation", "water", "soil", "production", "markets",
    "value", "chain", "infrastructure", "roads", "health", "education", "gender", "youth",
    "women", "participation", "awareness", "information", "data", "systems", "technology",
    "innovation", "standards", "compliance", "enforcement", "legal", "act", "law", "article",
    "schedule", "officer", "officers", "director", "council", "board", "authority", "local",
    "level", "levels", "area", "areas", "zone", "region", "country", "period", "year", "years",
    "phase", "approach", "principles", "vision", "mission", "goals", "outcomes", "results",
    "activities", "projects", "procurement", "audit", "accountability", "transparency",
    "governance", "reform", "mandate", "functions", "roles", "responsibilities",
];

/// Generic words are split into consecutive groups of this size, each one a
/// non-agenda topic that filler text is written about.
const DISTRACTOR_SIZE: usize = 14;

fn distractors() -> usize {
    GENERIC.len().div_ceil(DISTRACTOR_SIZE)
}

/// Words of topic `t`: the agenda themes first, then the distractors.
fn topic_words(t: usize) -> &'static [&'static str] {
    match THEMES.get(t) {
        Some(theme) => theme.words,
        None => GENERIC.chunks(DISTRACTOR_SIZE).nth(t - THEMES.len()).unwrap(),
    }
}

const FUNCTION: &[&str] = &[
    "the", "of", "and", "to", "in", "for", "with", "by", "on", "be", "will", "is", "are", "this",
    "that", "all", "as", "at", "from", "shall",
];

const COUNTRIES: &[&str] = &["Kenya", "Uganda", "Ethiopia", "Malawi", "Rwanda"];
const SECTORS: &[&str] = &["forestry", "agriculture", "energy", "environment", "land"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub study_docs: usize,
    pub background_docs: usize,
    pub background_sentences: usize,
    /// Share of topic words in a sentence about a topic.
    pub topic_share: f64,
    /// Share of background sentences about an agenda theme.
    pub background_theme_rate: f64,
    /// Share of background sentences about a distractor topic.
    pub background_distractor_rate: f64,
    /// Chance that a filler paragraph mentions one stray theme word.
    pub stray_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            study_docs: 30,
            background_docs: 120,
            background_sentences: 80,
            topic_share: 0.6,
            background_theme_rate: 0.3,
            background_distractor_rate: 0.5,
            stray_rate: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDoc {
    pub meta: DocMeta,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub study: Vec<SyntheticDoc>,
    pub background: Vec<SyntheticDoc>,
    pub gold: GoldLabels,
    pub queries: Vec<AgendaQuery>,
}

/// Locations of the files written by [`SyntheticBenchmark::write`].
#[derive(Debug, Clone)]
pub struct SynthPaths {
    pub study_manifest: PathBuf,
    pub background_manifest: PathBuf,
    pub gold: PathBuf,
    pub queries: PathBuf,
}

struct Writer<'a> {
    rng: ChaCha8Rng,
    config: &'a SynthConfig,
}

impl Writer<'_> {
    fn word(&mut self, topic: Option<usize>) -> &'static str {
        let r: f64 = self.rng.random();
        match topic {
            Some(t) if r < self.config.topic_share => topic_words(t).choose(&mut self.rng).unwrap(),
            _ if self.rng.random_bool(0.35) => FUNCTION.choose(&mut self.rng).unwrap(),
            _ => GENERIC.choose(&mut self.rng).unwrap(),
        }
    }

    fn sentence(&mut self, topic: Option<usize>) -> String {
        let n = self.rng.random_range(9..=16);
        let words: Vec<&str> = (0..n).map(|_| self.word(topic)).collect();
        let mut s = words.join(" ");
        s[..1].make_ascii_uppercase();
        s.push('.');
        s
    }

    /// A paragraph about agenda `theme`, or filler about a random distractor.
    fn paragraph(&mut self, theme: Option<usize>) -> String {
        let topic = theme.unwrap_or_else(|| THEMES.len() + self.rng.random_range(0..distractors()));
        let n = self.rng.random_range(3..=5);
        let mut sentences: Vec<String> = (0..n).map(|_| self.sentence(Some(topic))).collect();
        if theme.is_none() && self.rng.random_bool(self.config.stray_rate) {
            let k = self.rng.random_range(0..THEMES.len());
            let stray = THEMES[k].words.choose(&mut self.rng).unwrap();
            let i = self.rng.random_range(0..sentences.len());
            let s = sentences[i].trim_end_matches('.').to_owned();
            sentences[i] = format!("{s} {stray}.");
        }
        sentences.join(" ")
    }
}

fn titlecase(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

/// Builds the study collection, gold labels, queries and background corpus.
pub fn generate(config: &SynthConfig) -> SyntheticBenchmark {
    let mut w = Writer {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        config,
    };

    // Each theme is present in 8 to 14 documents.
    let n = config.study_docs;
    let mut present = vec![vec![false; THEMES.len()]; n];
    for (k, _) in THEMES.iter().enumerate() {
        let count = w.rng.random_range(8..=14).min(n);
        let mut ids: Vec<usize> = (0..n).collect();
        ids.shuffle(&mut w.rng);
        for &d in &ids[..count] {
            present[d][k] = true;
        }
    }

    let mut gold = GoldLabels::default();
    let mut study = Vec::with_capacity(n);
    for (d, themes) in present.iter().enumerate() {
        let doc_id = format!("doc-{:03}", d + 1);
        let pages = w.rng.random_range(3..=5);
        let mut slots: Vec<Option<usize>> = vec![None; pages * 3];
        let mut free: Vec<usize> = (0..slots.len()).collect();
        free.shuffle(&mut w.rng);
        for (k, _) in themes.iter().enumerate().filter(|(_, &p)| p) {
            slots[free.pop().unwrap()] = Some(k);
        }
        let sector = *SECTORS.choose(&mut w.rng).unwrap();
        let country = COUNTRIES[d % COUNTRIES.len()];
        let mut page_texts = Vec::with_capacity(pages);
        for p in 0..pages {
            let mut text = String::new();
            if p == 0 {
                text.push_str(&format!("NATIONAL {} POLICY\n\n", sector.to_uppercase()));
            }
            let paras: Vec<String> = (0..3).map(|i| w.paragraph(slots[p * 3 + i])).collect();
            text.push_str(&paras.join("\n\n"));
            text.push_str(&format!("\n\nPage {}\n", p + 1));
            page_texts.push(text);
        }
        for (k, theme) in THEMES.iter().enumerate() {
            gold.insert(&doc_id, theme.label, themes[k]);
        }
        study.push(SyntheticDoc {
            meta: DocMeta {
                doc_id,
                country: country.to_owned(),
                sector: sector.to_owned(),
                title: format!("{} {} policy", country, titlecase(sector)),
            },
            text: page_texts.join(DEFAULT_PAGE_DELIMITER),
        });
    }

    let mut background = Vec::with_capacity(config.background_docs);
    for b in 0..config.background_docs {
        let sentences: Vec<String> = (0..config.background_sentences)
            .map(|_| {
                let r: f64 = w.rng.random();
                let topic = if r < config.background_theme_rate {
                    Some(w.rng.random_range(0..THEMES.len()))
                } else if r < config.background_theme_rate + config.background_distractor_rate {
                    Some(THEMES.len() + w.rng.random_range(0..distractors()))
                } else {
                    None
                };
                w.sentence(topic)
            })
            .collect();
        let paragraphs: Vec<String> = sentences.chunks(4).map(|c| c.join(" ")).collect();
        background.push(SyntheticDoc {
            meta: DocMeta {
                doc_id: format!("bg-{:04}", b + 1),
                country: String::new(),
                sector: "background".into(),
                title: format!("Background text {}", b + 1),
            },
            text: paragraphs.join("\n\n"),
        });
    }

    let queries = THEMES
        .iter()
        .map(|t| AgendaQuery::new(t.label, t.seed_terms, DEFAULT_THRESHOLD).expect("valid theme query"))
        .collect();
    SyntheticBenchmark {
        study,
        background,
        gold,
        queries,
    }
}

fn write_docs(dir: &Path, manifest: &Path, docs: &[SyntheticDoc]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let dir_name = dir.file_name().map(PathBuf::from).unwrap_or_default();
    let mut entries = Vec::with_capacity(docs.len());
    for d in docs {
        let file = format!("{}.txt", d.meta.doc_id);
        fs::write(dir.join(&file), &d.text)?;
        entries.push(ManifestEntry {
            doc_id: d.meta.doc_id.clone(),
            country: d.meta.country.clone(),
            sector: d.meta.sector.clone(),
            title: d.meta.title.clone(),
            path: dir_name.join(file),
        });
    }
    write_manifest(manifest, &entries).map_err(io::Error::other)
}

impl SyntheticBenchmark {
    /// Writes `study/`, `background/`, their manifests, `gold.csv` and
    /// `queries.jsonl` under `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<SynthPaths> {
        let paths = SynthPaths {
            study_manifest: dir.join("study_manifest.csv"),
            background_manifest: dir.join("background_manifest.csv"),
            gold: dir.join("gold.csv"),
            queries: dir.join("queries.jsonl"),
        };
        write_docs(&dir.join("study"), &paths.study_manifest, &self.study)?;
        write_docs(&dir.join("background"), &paths.background_manifest, &self.background)?;
        self.gold.to_csv(&paths.gold).map_err(io::Error::other)?;
        write_queries(&paths.queries, &self.queries).map_err(io::Error::other)?;
        Ok(paths)
    }
}

pub const FAMILIES: [[&str; 4]; 2] = [
    ["oak", "pine", "cedar", "birch"],
    ["maize", "sorghum", "millet", "cassava"],
];

const FAMILY_TEMPLATES: [&[&str]; 2] = [
    &[
        "the {} canopy shades the steep slope",
        "old {} stands line the ridge",
        "loggers fell {} timber in the dry season",
        "the {} bark and needles cover the forest floor",
    ],
    &[
        "farmers harvest {} grain after the rains",
        "the {} crop yields more with fertilizer",
        "women pound {} flour for porridge",
        "traders buy {} at the weekly market",
    ],
];

/// Tokenized sentences in which each family member fills its family's
/// templates; the families are [`FAMILIES`].
pub fn family_corpus(seed: u64, sentences: usize) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sentences)
        .map(|_| {
            let f = rng.random_range(0..FAMILIES.len());
            let member = FAMILIES[f].choose(&mut rng).unwrap();
            let template = FAMILY_TEMPLATES[f].choose(&mut rng).unwrap();
            template
                .split_whitespace()
                .map(|t| if t == "{}" { (*member).to_owned() } else { t.to_owned() })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_seeded() {
        let a = generate(&SynthConfig::default());
        let b = generate(&SynthConfig::default());
        assert_eq!(a.study, b.study);
        assert_eq!(a.gold, b.gold);
        let c = generate(&SynthConfig {
            seed: 8,
            ..SynthConfig::default()
        });
        assert_ne!(a.study, c.study);
    }

    #[test]
    fn gold_covers_every_document_and_theme() {
        let bench = generate(&SynthConfig::default());
        assert_eq!(bench.study.len(), 30);
        assert_eq!(bench.gold.len(), 30 * THEMES.len());
        assert_eq!(bench.queries.len(), THEMES.len());
        for t in &THEMES {
            let positives = bench
                .study
                .iter()
                .filter(|d| bench.gold.get(&d.meta.doc_id, t.label) == Some(true))
                .count();
            assert!((8..=14).contains(&positives), "{}: {positives}", t.label);
        }
    }

    #[test]
    fn theme_words_are_disjoint() {
        let mut seen = std::collections::HashSet::new();
        for w in THEMES.iter().flat_map(|t| t.words).chain(GENERIC).chain(FUNCTION) {
            assert!(seen.insert(*w), "`{w}` listed twice");
        }
        for t in &THEMES {
            assert!(t.seed_terms.iter().all(|s| t.words.contains(s)));
        }
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let bench = generate(&SynthConfig {
            study_docs: 3,
            background_docs: 2,
            ..SynthConfig::default()
        });
        let paths = bench.write(dir.path()).unwrap();
        let entries = crate::corpus::read_manifest(&paths.study_manifest).unwrap();
        assert_eq!(entries.len(), 3);
        assert!(entries[0].path.exists());
        assert_eq!(GoldLabels::from_csv(&paths.gold).unwrap(), bench.gold);
    }

    #[test]
    fn family_sentences_use_their_templates() {
        for s in family_corpus(3, 50) {
            let f = FAMILIES.iter().position(|f| s.iter().any(|t| f.contains(&t.as_str()))).unwrap();
            let other = &FAMILIES[1 - f];
            assert!(!s.iter().any(|t| other.contains(&t.as_str())));
        }
    }
}

//! Per-query reports: retrieved passages grouped by document, followed by the
//! document labels. Written as text for reading and JSON for tools.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::retrieval::{descending, AgendaQuery, DocLabel, RetrievalHit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentGroup {
    pub doc_id: String,
    pub best_similarity: f64,
    pub hits: Vec<RetrievalHit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTotals {
    pub passages: usize,
    pub documents_scored: usize,
    pub documents_positive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub query: AgendaQuery,
    pub generated_at: String,
    pub corpus: String,
    pub documents: Vec<DocumentGroup>,
    pub labels: Vec<DocLabel>,
    pub totals: ReportTotals,
}

/// Current UTC time in RFC 3339, for `generated_at`.
pub fn timestamp_now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl QueryReport {
    /// Hits below the query threshold are dropped. Groups are ordered by best
    /// similarity, hits inside a group by similarity.
    pub fn new(
        query: &AgendaQuery,
        hits: &[RetrievalHit],
        labels: &[DocLabel],
        corpus: &str,
        generated_at: String,
    ) -> Self {
        let mut groups: BTreeMap<&str, Vec<RetrievalHit>> = BTreeMap::new();
        for h in hits.iter().filter(|h| h.similarity >= query.threshold) {
            groups.entry(&h.doc_id).or_default().push(h.clone());
        }
        let mut documents: Vec<DocumentGroup> = groups
            .into_iter()
            .map(|(doc_id, mut hits)| {
                hits.sort_by(descending);
                DocumentGroup {
                    doc_id: doc_id.to_owned(),
                    best_similarity: hits[0].similarity,
                    hits,
                }
            })
            .collect();
        documents.sort_by(|a, b| {
            b.best_similarity
                .total_cmp(&a.best_similarity)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        let mut labels = labels.to_vec();
        labels.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        QueryReport {
            totals: ReportTotals {
                passages: documents.iter().map(|d| d.hits.len()).sum(),
                documents_scored: labels.len(),
                documents_positive: labels.iter().filter(|l| l.predicted).count(),
            },
            query: query.clone(),
            generated_at,
            corpus: corpus.to_owned(),
            documents,
            labels,
        }
    }

    /// `<label-slug>_<threshold>`, e.g. `buffer-zone_0.55`.
    pub fn file_stem(&self) -> String {
        format!("{}_{:.2}", slug(&self.query.label), self.query.threshold)
    }

    pub fn to_text(&self) -> String {
        let q = &self.query;
        let mut out = String::new();
        let _ = writeln!(out, "Agenda report: {}", q.label);
        let _ = writeln!(out, "generated: {}", self.generated_at);
        let _ = writeln!(out, "corpus: {}", self.corpus);
        let _ = writeln!(out, "terms: {}", q.terms.join(", "));
        let _ = writeln!(out, "threshold: {:.2}", q.threshold);
        if !q.notes.is_empty() {
            let _ = writeln!(out, "notes: {}", q.notes);
        }
        let t = &self.totals;
        let _ = writeln!(
            out,
            "\n{} passages in {} documents; {} of {} documents positive",
            t.passages,
            self.documents.len(),
            t.documents_positive,
            t.documents_scored
        );
        for d in &self.documents {
            let _ = writeln!(out, "\n== {} (best {:.4})", d.doc_id, d.best_similarity);
            for h in &d.hits {
                let _ = writeln!(out, "[{:.4}] {} page {}", h.similarity, h.para_id, h.page_number);
                let _ = writeln!(out, "    {}", h.excerpt);
            }
        }
        let _ = writeln!(out, "\n== document labels");
        for l in &self.labels {
            let best = l
                .best_similarity
                .map_or_else(|| "-".to_owned(), |s| format!("{s:.4}"));
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                l.doc_id,
                if l.predicted { "yes" } else { "no" },
                best,
                l.best_para_id.as_deref().unwrap_or("-")
            );
        }
        out
    }

    /// Writes `<stem>.report.txt` and `<stem>.report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let stem = self.file_stem();
        let txt = dir.join(format!("{stem}.report.txt"));
        let json = dir.join(format!("{stem}.report.json"));
        fs::write(&txt, self.to_text())?;
        fs::write(&json, serde_json::to_string_pretty(self).map_err(std::io::Error::other)?)?;
        Ok((txt, json))
    }
}

/// Lowercase ASCII alphanumerics joined by single hyphens.
pub fn slug(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('-') {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    if out.is_empty() {
        out.push_str("query");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hit(para: &str, doc: &str, s: f64) -> RetrievalHit {
        RetrievalHit {
            para_id: para.into(),
            doc_id: doc.into(),
            page_number: 2,
            similarity: s,
            excerpt: format!("text of {para}"),
        }
    }

    fn label(doc: &str, predicted: bool, best: Option<f64>) -> DocLabel {
        DocLabel {
            doc_id: doc.into(),
            label: "buffer zone".into(),
            predicted,
            best_similarity: best,
            best_para_id: best.map(|_| format!("{doc}-0001")),
        }
    }

    fn report(ts: &str) -> QueryReport {
        let q = AgendaQuery::new("Buffer zone", &["buffer_zone"], 0.55).unwrap();
        let hits = [hit("b-0002", "b", 0.61), hit("a-0001", "a", 0.58), hit("b-0001", "b", 0.9), hit("c-0001", "c", 0.3)];
        let labels = [label("c", false, Some(0.3)), label("b", true, Some(0.9)), label("a", true, Some(0.58)), label("d", false, None)];
        QueryReport::new(&q, &hits, &labels, "synthetic", ts.into())
    }

    #[test]
    fn grouping_and_totals() {
        let r = report("t0");
        let docs: Vec<&str> = r.documents.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(docs, ["b", "a"]);
        let b: Vec<&str> = r.documents[0].hits.iter().map(|h| h.para_id.as_str()).collect();
        assert_eq!(b, ["b-0001", "b-0002"]);
        assert_eq!(r.totals, ReportTotals { passages: 3, documents_scored: 4, documents_positive: 2 });
        assert_eq!(r.file_stem(), "buffer-zone_0.55");
    }

    #[test]
    fn output_differs_only_in_timestamp() {
        let (a, b) = (report("2024-01-01T00:00:00Z").to_text(), report("2025-06-30T12:00:00Z").to_text());
        let diff: Vec<(&str, &str)> = a.lines().zip(b.lines()).filter(|(x, y)| x != y).collect();
        assert_eq!(diff.len(), 1);
        assert!(diff[0].0.starts_with("generated:"));
    }

    #[test]
    fn written_files_parse_back() {
        let dir = tempfile::tempdir().unwrap();
        let r = report("t");
        let (txt, json) = r.write(dir.path()).unwrap();
        assert!(txt.ends_with("buffer-zone_0.55.report.txt"));
        let back: QueryReport = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("Forest landscape restoration!"), "forest-landscape-restoration");
        assert_eq!(slug("  --  "), "query");
    }
}

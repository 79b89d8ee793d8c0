//! Document-level precision, recall, accuracy and F1 against gold labels.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retrieval::DocLabel;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no prediction has a gold label")]
    NoOverlap,
    #[error("conflicting predictions for ({doc_id}, {agenda})")]
    DuplicatePrediction { doc_id: String, agenda: String },
    #[error("gold labels name unknown documents: {}", .0.join(", "))]
    UnknownDocuments(Vec<String>),
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

/// Presence labels keyed by (doc_id, agenda).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoldLabels {
    labels: BTreeMap<(String, String), bool>,
}

#[derive(Debug, Deserialize, Serialize)]
struct GoldRow {
    doc_id: String,
    agenda: String,
    present: u8,
}

impl GoldLabels {
    pub fn insert(&mut self, doc_id: &str, agenda: &str, present: bool) {
        self.labels.insert((doc_id.to_owned(), agenda.to_owned()), present);
    }

    pub fn get(&self, doc_id: &str, agenda: &str) -> Option<bool> {
        self.labels.get(&(doc_id.to_owned(), agenda.to_owned())).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn agendas(&self) -> BTreeSet<&str> {
        self.labels.keys().map(|(_, a)| a.as_str()).collect()
    }

    /// Fails if any labeled document is missing from `known`.
    pub fn check_documents<'a, I>(&self, known: I) -> Result<(), EvalError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let known: BTreeSet<&str> = known.into_iter().collect();
        let unknown: BTreeSet<&str> = self
            .labels
            .keys()
            .map(|(d, _)| d.as_str())
            .filter(|d| !known.contains(d))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(EvalError::UnknownDocuments(unknown.into_iter().map(str::to_owned).collect()))
        }
    }

    /// Reads `doc_id,agenda,present` rows with `present` in {0, 1}.
    pub fn from_csv(path: &Path) -> Result<Self, EvalError> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| EvalError::Io {
            path: path.to_owned(),
            reason: e.to_string(),
        })?;
        let mut gold = GoldLabels::default();
        for (i, row) in reader.deserialize::<GoldRow>().enumerate() {
            let parse = |reason: String| EvalError::Parse {
                path: path.to_owned(),
                line: i + 2,
                reason,
            };
            let row = row.map_err(|e| parse(e.to_string()))?;
            if row.present > 1 {
                return Err(parse(format!("present must be 0 or 1, got {}", row.present)));
            }
            gold.insert(&row.doc_id, &row.agenda, row.present == 1);
        }
        Ok(gold)
    }

    pub fn to_csv(&self, path: &Path) -> Result<(), EvalError> {
        let err = |e: csv::Error| EvalError::Io {
            path: path.to_owned(),
            reason: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        for ((doc_id, agenda), &present) in &self.labels {
            w.serialize(GoldRow {
                doc_id: doc_id.clone(),
                agenda: agenda.clone(),
                present: u8::from(present),
            })
            .map_err(err)?;
        }
        w.flush().map_err(|e| EvalError::Io {
            path: path.to_owned(),
            reason: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u32,
    pub fp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
    pub tn: u32,
}

impl Confusion {
    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u32 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Metrics of one confusion matrix. A ratio with a zero denominator is
/// reported as 0 and named in `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub undefined: Vec<String>,
}

fn ratio(num: f64, den: f64, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0.0 {
        undefined.push(name.to_owned());
        0.0
    } else {
        num / den
    }
}

impl From<Confusion> for Metrics {
    fn from(c: Confusion) -> Self {
        let (tp, fp, fn_, tn) = (f64::from(c.tp), f64::from(c.fp), f64::from(c.fn_), f64::from(c.tn));
        let mut undefined = Vec::new();
        let accuracy = ratio(tp + tn, tp + fp + fn_ + tn, "accuracy", &mut undefined);
        let precision = ratio(tp, tp + fp, "precision", &mut undefined);
        let recall = ratio(tp, tp + fn_, "recall", &mut undefined);
        let f1 = ratio(2.0 * precision * recall, precision + recall, "f1", &mut undefined);
        Metrics {
            accuracy,
            precision,
            recall,
            f1,
            undefined,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MacroAverage {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MacroAverage {
    fn of<'a, I: IntoIterator<Item = &'a Metrics>>(metrics: I) -> Self {
        let mut sum = MacroAverage::default();
        let mut n = 0.0;
        for m in metrics {
            sum.accuracy += m.accuracy;
            sum.precision += m.precision;
            sum.recall += m.recall;
            sum.f1 += m.f1;
            n += 1.0;
        }
        if n > 0.0 {
            sum.accuracy /= n;
            sum.precision /= n;
            sum.recall /= n;
            sum.f1 /= n;
        }
        sum
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgendaRow {
    pub agenda: String,
    pub confusion: Confusion,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub rows: Vec<AgendaRow>,
    pub macro_avg: MacroAverage,
}

impl Breakdown {
    fn from_confusions(confusions: BTreeMap<String, Confusion>) -> Self {
        let rows: Vec<AgendaRow> = confusions
            .into_iter()
            .map(|(agenda, confusion)| AgendaRow {
                agenda,
                metrics: confusion.into(),
                confusion,
            })
            .collect();
        let macro_avg = MacroAverage::of(rows.iter().map(|r| &r.metrics));
        Breakdown { rows, macro_avg }
    }

    pub fn row(&self, agenda: &str) -> Option<&AgendaRow> {
        self.rows.iter().find(|r| r.agenda == agenda)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overall: Breakdown,
    pub by_country: BTreeMap<String, Breakdown>,
    /// Predictions without a gold label; they are not scored.
    pub unlabeled: usize,
}

/// Scores predictions against gold labels, per agenda and per country.
///
/// Only (doc_id, agenda) pairs present in both are scored. Documents missing
/// from `countries` are grouped under "unknown".
pub fn score(
    predictions: &[DocLabel],
    gold: &GoldLabels,
    countries: &HashMap<String, String>,
) -> Result<MetricsReport, EvalError> {
    let mut seen: HashMap<(&str, &str), bool> = HashMap::new();
    let mut overall: BTreeMap<String, Confusion> = BTreeMap::new();
    let mut by_country: BTreeMap<String, BTreeMap<String, Confusion>> = BTreeMap::new();
    let mut unlabeled = 0;
    for p in predictions {
        match seen.insert((&p.doc_id, &p.label), p.predicted) {
            Some(prev) if prev != p.predicted => {
                return Err(EvalError::DuplicatePrediction {
                    doc_id: p.doc_id.clone(),
                    agenda: p.label.clone(),
                })
            }
            Some(_) => continue,
            None => {}
        }
        let Some(actual) = gold.get(&p.doc_id, &p.label) else {
            unlabeled += 1;
            continue;
        };
        overall.entry(p.label.clone()).or_default().add(p.predicted, actual);
        let country = countries.get(&p.doc_id).map_or("unknown", String::as_str);
        by_country
            .entry(country.to_owned())
            .or_default()
            .entry(p.label.clone())
            .or_default()
            .add(p.predicted, actual);
    }
    if overall.is_empty() {
        return Err(EvalError::NoOverlap);
    }
    Ok(MetricsReport {
        overall: Breakdown::from_confusions(overall),
        by_country: by_country
            .into_iter()
            .map(|(c, m)| (c, Breakdown::from_confusions(m)))
            .collect(),
        unlabeled,
    })
}

fn table(title: &str, b: &Breakdown, out: &mut String) {
    let width = b.rows.iter().map(|r| r.agenda.len()).max().unwrap_or(0).max(7);
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "{:<width$}  {:>8}  {:>9}  {:>6}  {:>6}  {:>4}  {:>4}  {:>4}  {:>4}",
        "agenda", "accuracy", "precision", "recall", "f1", "tp", "fp", "fn", "tn"
    );
    let _ = writeln!(out, "{}", "-".repeat(width + 60));
    for r in &b.rows {
        let m = &r.metrics;
        let c = &r.confusion;
        let _ = write!(
            out,
            "{:<width$}  {:>8.2}  {:>9.2}  {:>6.2}  {:>6.2}  {:>4}  {:>4}  {:>4}  {:>4}",
            r.agenda, m.accuracy, m.precision, m.recall, m.f1, c.tp, c.fp, c.fn_, c.tn
        );
        if !m.undefined.is_empty() {
            let _ = write!(out, "  (undefined: {})", m.undefined.join(", "));
        }
        out.push('\n');
    }
    let a = &b.macro_avg;
    let _ = writeln!(
        out,
        "{:<width$}  {:>8.2}  {:>9.2}  {:>6.2}  {:>6.2}",
        "average", a.accuracy, a.precision, a.recall, a.f1
    );
}

impl MetricsReport {
    /// Fixed-width text tables: overall first, then one per country.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        table("overall", &self.overall, &mut out);
        for (country, b) in &self.by_country {
            out.push('\n');
            table(&format!("country: {country}"), b, &mut out);
        }
        if self.unlabeled > 0 {
            let _ = writeln!(out, "\n{} predictions had no gold label", self.unlabeled);
        }
        out
    }

    /// One row per (scope, agenda) plus a macro-average row per scope.
    pub fn to_csv(&self, path: &Path) -> Result<(), EvalError> {
        let err = |e: csv::Error| EvalError::Io {
            path: path.to_owned(),
            reason: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record([
            "scope", "agenda", "accuracy", "precision", "recall", "f1", "tp", "fp", "fn", "tn", "undefined",
        ])
        .map_err(err)?;
        let scopes = std::iter::once(("overall".to_owned(), &self.overall))
            .chain(self.by_country.iter().map(|(c, b)| (format!("country:{c}"), b)));
        for (scope, b) in scopes {
            for r in &b.rows {
                let (m, c) = (&r.metrics, &r.confusion);
                w.write_record([
                    scope.clone(),
                    r.agenda.clone(),
                    m.accuracy.to_string(),
                    m.precision.to_string(),
                    m.recall.to_string(),
                    m.f1.to_string(),
                    c.tp.to_string(),
                    c.fp.to_string(),
                    c.fn_.to_string(),
                    c.tn.to_string(),
                    m.undefined.join(";"),
                ])
                .map_err(err)?;
            }
            let a = &b.macro_avg;
            w.write_record([
                scope.clone(),
                "average".to_owned(),
                a.accuracy.to_string(),
                a.precision.to_string(),
                a.recall.to_string(),
                a.f1.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| EvalError::Io {
            path: path.to_owned(),
            reason: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn label(doc: &str, agenda: &str, predicted: bool) -> DocLabel {
        DocLabel {
            doc_id: doc.into(),
            label: agenda.into(),
            predicted,
            best_similarity: None,
            best_para_id: None,
        }
    }

    #[test]
    fn hand_computed_case() {
        // tp=3 fp=1 fn=2 tn=4: P=3/4 R=3/5 A=7/10 F1=2/3.
        let mut gold = GoldLabels::default();
        let mut preds = Vec::new();
        let cases = [(true, true, 3), (true, false, 1), (false, true, 2), (false, false, 4)];
        let mut i = 0;
        for (pred, actual, n) in cases {
            for _ in 0..n {
                let d = format!("d{i}");
                gold.insert(&d, "a", actual);
                preds.push(label(&d, "a", pred));
                i += 1;
            }
        }
        let r = score(&preds, &gold, &HashMap::new()).unwrap();
        let m = &r.overall.rows[0].metrics;
        assert_eq!((m.precision, m.recall, m.accuracy), (0.75, 0.6, 0.7));
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!(m.undefined.is_empty());
        assert_eq!(r.by_country["unknown"].rows[0].confusion, Confusion { tp: 3, fp: 1, fn_: 2, tn: 4 });
    }

    #[test]
    fn no_positive_predictions_flags_precision() {
        let mut gold = GoldLabels::default();
        gold.insert("d1", "a", true);
        gold.insert("d2", "a", false);
        let r = score(&[label("d1", "a", false), label("d2", "a", false)], &gold, &HashMap::new()).unwrap();
        let m = &r.overall.rows[0].metrics;
        assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (0.0, 0.0, 0.0, 0.5));
        assert_eq!(m.undefined, ["precision", "f1"]);
    }

    #[test]
    fn no_overlap_is_an_error() {
        let mut gold = GoldLabels::default();
        gold.insert("d1", "a", true);
        assert!(matches!(
            score(&[label("d2", "a", true)], &gold, &HashMap::new()),
            Err(EvalError::NoOverlap)
        ));
    }

    #[test]
    fn conflicting_predictions_rejected() {
        let mut gold = GoldLabels::default();
        gold.insert("d1", "a", true);
        let preds = [label("d1", "a", true), label("d1", "a", false)];
        assert!(matches!(
            score(&preds, &gold, &HashMap::new()),
            Err(EvalError::DuplicatePrediction { .. })
        ));
    }

    #[test]
    fn country_breakdown_and_macro() {
        let mut gold = GoldLabels::default();
        for (d, a, p) in [("k1", "x", true), ("k2", "x", false), ("u1", "x", true), ("k1", "y", true)] {
            gold.insert(d, a, p);
        }
        let preds = [label("k1", "x", true), label("k2", "x", true), label("u1", "x", false), label("k1", "y", true), label("zz", "y", true)];
        let countries: HashMap<String, String> =
            [("k1", "Kenya"), ("k2", "Kenya"), ("u1", "Uganda")].map(|(a, b)| (a.into(), b.into())).into();
        let r = score(&preds, &gold, &countries).unwrap();
        assert_eq!(r.unlabeled, 1);
        assert_eq!(r.overall.row("x").unwrap().confusion, Confusion { tp: 1, fp: 1, fn_: 1, tn: 0 });
        assert_eq!(r.by_country["Kenya"].row("x").unwrap().confusion, Confusion { tp: 1, fp: 1, fn_: 0, tn: 0 });
        assert_eq!(r.by_country["Uganda"].row("x").unwrap().confusion, Confusion { tp: 0, fp: 0, fn_: 1, tn: 0 });
        // x: F1 = 0.5, y: F1 = 1.
        assert!((r.overall.macro_avg.f1 - 0.75).abs() < 1e-15);
        let table = r.to_table();
        assert!(table.contains("country: Kenya") && table.contains("average"));
    }

    #[test]
    fn gold_csv_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gold.csv");
        let mut gold = GoldLabels::default();
        gold.insert("d1", "buffer zone", true);
        gold.insert("d2", "buffer zone", false);
        gold.to_csv(&path).unwrap();
        assert_eq!(GoldLabels::from_csv(&path).unwrap(), gold);
        assert!(gold.check_documents(["d1", "d2"]).is_ok());
        assert!(matches!(gold.check_documents(["d1"]), Err(EvalError::UnknownDocuments(d)) if d == ["d2"]));
        std::fs::write(&path, "doc_id,agenda,present\nd1,a,2\n").unwrap();
        assert!(matches!(GoldLabels::from_csv(&path), Err(EvalError::Parse { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_f1_identity(
            rows in prop::collection::vec((0usize..20, 0usize..3, any::<bool>(), any::<bool>()), 1..60),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut gold = GoldLabels::default();
            let mut preds: Vec<DocLabel> = Vec::new();
            let mut used = BTreeSet::new();
            for (d, a, p, t) in rows {
                if used.insert((d, a)) {
                    gold.insert(&format!("d{d}"), &format!("a{a}"), t);
                    preds.push(label(&format!("d{d}"), &format!("a{a}"), p));
                }
            }
            let r = score(&preds, &gold, &HashMap::new()).unwrap();
            preds.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(&score(&preds, &gold, &HashMap::new()).unwrap(), &r);
            for row in &r.overall.rows {
                let m = &row.metrics;
                if m.precision + m.recall > 0.0 {
                    prop_assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-12);
                }
                for v in [m.accuracy, m.precision, m.recall, m.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}

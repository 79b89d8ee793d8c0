//! Query drafts and their edit history.
//!
//! A draft's state is never edited in place: each change is an [`Edit`]
//! appended to its history, and the state is the result of replaying that
//! history from the creating edit. When the session has a log file every
//! event is written there before it is committed in memory, so reopening the
//! log restores the session.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use agenda_core::retrieval::{snap_threshold, AgendaQuery};
use agenda_core::vectorizer::MAX_QUERY_TERMS;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Edit {
    Create {
        label: String,
        terms: Vec<String>,
        threshold: f64,
    },
    AddTerm {
        term: String,
    },
    RemoveTerm {
        term: String,
    },
    SetThreshold {
        threshold: f64,
    },
    /// One descent step; records the threshold it lands on.
    Descend {
        threshold: f64,
    },
    Accept,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EditError {
    #[error("a query holds at most {MAX_QUERY_TERMS} terms")]
    TermCap,
    #[error("a query needs at least one term")]
    NoTerms,
    #[error("the label is empty")]
    EmptyLabel,
    #[error("empty term")]
    EmptyTerm,
    #[error("`{0}` is already in the query")]
    DuplicateTerm(String),
    #[error("`{0}` is not in the query")]
    MissingTerm(String),
    #[error("removing `{0}` would leave the query without terms")]
    LastTerm(String),
    #[error("threshold {0} is outside (0, 1]")]
    Threshold(f64),
    #[error("the draft was accepted and can no longer change")]
    Accepted,
    #[error("a draft history must start with its creation, and only there")]
    Order,
}

/// Lowercased, trimmed form in which terms are stored and compared.
pub fn normalize_term(term: &str) -> String {
    term.trim().to_lowercase()
}

fn check_threshold(t: f64) -> Result<f64, EditError> {
    if t > 0.0 && t <= 1.0 {
        Ok(snap_threshold(t))
    } else {
        Err(EditError::Threshold(t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftState {
    pub label: String,
    pub terms: Vec<String>,
    pub threshold: f64,
    pub accepted: bool,
}

impl DraftState {
    pub fn create(label: &str, terms: &[String], threshold: f64) -> Result<Self, EditError> {
        if label.trim().is_empty() {
            return Err(EditError::EmptyLabel);
        }
        if terms.is_empty() {
            return Err(EditError::NoTerms);
        }
        let mut state = DraftState {
            label: label.trim().to_owned(),
            terms: Vec::new(),
            threshold: check_threshold(threshold)?,
            accepted: false,
        };
        for t in terms {
            state.apply(&Edit::AddTerm { term: t.clone() })?;
        }
        Ok(state)
    }

    pub fn apply(&mut self, edit: &Edit) -> Result<(), EditError> {
        if self.accepted {
            return Err(EditError::Accepted);
        }
        match edit {
            Edit::Create { .. } => return Err(EditError::Order),
            Edit::AddTerm { term } => {
                let term = normalize_term(term);
                if term.is_empty() {
                    return Err(EditError::EmptyTerm);
                }
                if self.terms.contains(&term) {
                    return Err(EditError::DuplicateTerm(term));
                }
                if self.terms.len() >= MAX_QUERY_TERMS {
                    return Err(EditError::TermCap);
                }
                self.terms.push(term);
            }
            Edit::RemoveTerm { term } => {
                let term = normalize_term(term);
                let pos = self
                    .terms
                    .iter()
                    .position(|t| *t == term)
                    .ok_or_else(|| EditError::MissingTerm(term.clone()))?;
                if self.terms.len() == 1 {
                    return Err(EditError::LastTerm(term));
                }
                self.terms.remove(pos);
            }
            Edit::SetThreshold { threshold } | Edit::Descend { threshold } => {
                self.threshold = check_threshold(*threshold)?;
            }
            Edit::Accept => self.accepted = true,
        }
        Ok(())
    }

    pub fn to_query(&self, notes: String) -> AgendaQuery {
        AgendaQuery {
            label: self.label.clone(),
            terms: self.terms.clone(),
            threshold: self.threshold,
            notes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at: String,
    #[serde(flatten)]
    pub edit: Edit,
}

/// Rebuilds a draft from its history.
pub fn replay<'a>(history: impl IntoIterator<Item = &'a Edit>) -> Result<DraftState, EditError> {
    let mut edits = history.into_iter();
    let mut state = match edits.next() {
        Some(Edit::Create {
            label,
            terms,
            threshold,
        }) => DraftState::create(label, terms, *threshold)?,
        _ => return Err(EditError::Order),
    };
    for e in edits {
        state.apply(e)?;
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Draft {
    pub id: String,
    pub state: DraftState,
    pub history: Vec<Event>,
}

impl Draft {
    /// Readable summary of the history, used as the accepted query's notes.
    pub fn notes(&self) -> String {
        let mut parts = Vec::new();
        for e in &self.history {
            match &e.edit {
                Edit::Create { terms, threshold, .. } => {
                    parts.push(format!("started with {} at {threshold:.2}", terms.join(", ")))
                }
                Edit::AddTerm { term } => parts.push(format!("added {term}")),
                Edit::RemoveTerm { term } => parts.push(format!("removed {term}")),
                Edit::SetThreshold { threshold } => parts.push(format!("threshold set to {threshold:.2}")),
                Edit::Descend { threshold } => parts.push(format!("descended to {threshold:.2}")),
                Edit::Accept => parts.push("accepted".to_owned()),
            }
        }
        parts.join("; ")
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no draft `{0}`")]
    UnknownDraft(String),
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path} line {line}: {reason}")]
    Log { path: PathBuf, line: usize, reason: String },
}

/// One line of the session log.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct LogLine {
    session: String,
    draft: String,
    #[serde(flatten)]
    event: Event,
}

#[derive(Debug)]
struct Log {
    path: PathBuf,
    file: File,
}

#[derive(Debug)]
pub struct Session {
    id: String,
    drafts: BTreeMap<String, Draft>,
    next_seq: u64,
    log: Option<Log>,
}

impl Session {
    pub fn new(id: impl Into<String>) -> Self {
        Session {
            id: id.into(),
            drafts: BTreeMap::new(),
            next_seq: 1,
            log: None,
        }
    }

    /// A session backed by an append-only log at `path`. Events already in
    /// the file are replayed first; lines of other sessions are skipped.
    pub fn open(id: impl Into<String>, path: &Path) -> Result<Self, SessionError> {
        let mut session = Session::new(id);
        let io_err = |source| SessionError::Io {
            path: path.to_owned(),
            source,
        };
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io_err)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let log_err = |reason: String| SessionError::Log {
                    path: path.to_owned(),
                    line: i + 1,
                    reason,
                };
                let entry: LogLine = serde_json::from_str(&line).map_err(|e| log_err(e.to_string()))?;
                if entry.session == session.id {
                    session.commit(&entry.draft, entry.event).map_err(|e| log_err(e.to_string()))?;
                }
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
        session.log = Some(Log {
            path: path.to_owned(),
            file,
        });
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn drafts(&self) -> impl Iterator<Item = &Draft> {
        self.drafts.values()
    }

    pub fn draft(&self, id: &str) -> Result<&Draft, SessionError> {
        self.drafts.get(id).ok_or_else(|| SessionError::UnknownDraft(id.to_owned()))
    }

    /// Starts a new draft and returns its id.
    pub fn create(&mut self, label: &str, terms: &[String], threshold: f64, at: String) -> Result<String, SessionError> {
        let id = format!("q{}", self.drafts.len() + 1);
        let edit = Edit::Create {
            label: label.trim().to_owned(),
            terms: terms.iter().map(|t| normalize_term(t)).collect(),
            threshold: check_threshold(threshold)?,
        };
        self.append(&id, edit, at)?;
        Ok(id)
    }

    /// Applies `edit` to draft `id`, logging it first.
    pub fn edit(&mut self, id: &str, edit: Edit, at: String) -> Result<&Draft, SessionError> {
        let edit = match edit {
            Edit::SetThreshold { threshold } => Edit::SetThreshold {
                threshold: check_threshold(threshold)?,
            },
            Edit::Descend { threshold } => Edit::Descend {
                threshold: check_threshold(threshold)?,
            },
            Edit::AddTerm { term } => Edit::AddTerm {
                term: normalize_term(&term),
            },
            Edit::RemoveTerm { term } => Edit::RemoveTerm {
                term: normalize_term(&term),
            },
            other => other,
        };
        self.draft(id)?;
        self.append(id, edit, at)?;
        self.draft(id)
    }

    fn append(&mut self, draft: &str, edit: Edit, at: String) -> Result<(), SessionError> {
        let event = Event {
            seq: self.next_seq,
            at,
            edit,
        };
        // Validate against a copy so a rejected edit leaves no trace.
        self.check(draft, &event.edit)?;
        if let Some(log) = &mut self.log {
            let line = LogLine {
                session: self.id.clone(),
                draft: draft.to_owned(),
                event: event.clone(),
            };
            let mut text = serde_json::to_string(&line).expect("log lines serialize");
            text.push('\n');
            let io_err = |source| SessionError::Io {
                path: log.path.clone(),
                source,
            };
            log.file.write_all(text.as_bytes()).map_err(io_err)?;
            log.file.flush().map_err(io_err)?;
        }
        self.commit(draft, event)
    }

    fn check(&self, draft: &str, edit: &Edit) -> Result<(), SessionError> {
        match (self.drafts.get(draft), edit) {
            (None, Edit::Create { .. }) => {
                replay([edit])?;
            }
            (None, _) => return Err(SessionError::UnknownDraft(draft.to_owned())),
            (Some(d), _) => d.state.clone().apply(edit)?,
        }
        Ok(())
    }

    fn commit(&mut self, draft: &str, event: Event) -> Result<(), SessionError> {
        self.check(draft, &event.edit)?;
        self.next_seq = self.next_seq.max(event.seq + 1);
        match self.drafts.get_mut(draft) {
            Some(d) => {
                d.state.apply(&event.edit)?;
                d.history.push(event);
            }
            None => {
                let state = replay([&event.edit])?;
                self.drafts.insert(
                    draft.to_owned(),
                    Draft {
                        id: draft.to_owned(),
                        state,
                        history: vec![event],
                    },
                );
            }
        }
        Ok(())
    }
}

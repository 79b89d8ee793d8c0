//! HTTP API for tuning agenda queries interactively against a prepared
//! workspace.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/session` | session id, loaded data and every draft |
//! | GET | `/neighbors?terms=a,b&k=50` | nearest words to the composed query vector |
//! | GET, POST | `/queries` | list drafts, start a draft |
//! | GET, PATCH | `/queries/{id}` | read a draft, add or remove a term, set the threshold |
//! | GET | `/queries/{id}/history` | edit history and its replayed state |
//! | GET | `/queries/{id}/hits?order=desc` | paragraphs at or above the threshold |
//! | POST | `/queries/{id}/descend` | lower the threshold one step; returns only new hits |
//! | POST | `/queries/{id}/accept` | freeze the draft and write its report |
//! | POST | `/classify/{id}` | document labels under the draft |
//! | GET | `/documents/{doc_id}/pages/{n}` | page text |
//!
//! Errors are JSON objects with `code`, `message` and `detail`.
//!
//! Corpus and embeddings are loaded once and only read afterwards, so
//! queries run without locking. Edits take the session lock, which orders
//! them.

mod api;
pub mod error;
pub mod session;

use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard, PoisonError};

use agenda_core::corpus::Corpus;
use agenda_core::pipeline::{PipelineError, StudyIndex};
use agenda_core::report::timestamp_now;
use agenda_core::retrieval::{DEFAULT_FLOOR, DEFAULT_STEP};
use agenda_core::skipgram::Embeddings;
use agenda_core::workspace::Workspace;
use sha2::{Digest, Sha256};

pub use api::router;
use session::Session;

/// Read-only data every request works against.
pub struct Engine {
    pub corpus: Corpus,
    pub embeddings: Embeddings,
    pub study: StudyIndex,
    pub corpus_id: String,
    pub embedding_id: String,
}

fn short_digest(path: &std::path::Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path).map_err(|source| PipelineError::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(Sha256::digest(bytes).iter().take(6).map(|b| format!("{b:02x}")).collect())
}

impl Engine {
    /// Loads the study corpus, embeddings and paragraph index of `ws`. The
    /// identifiers are file name plus a short content digest.
    pub fn from_workspace(ws: &Workspace) -> Result<Self, PipelineError> {
        let study = ws.load_study()?;
        let id = |p: PathBuf| -> Result<String, PipelineError> {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(format!("{name}@{}", short_digest(&p)?))
        };
        Ok(Engine {
            corpus_id: id(ws.documents())?,
            embedding_id: id(ws.embeddings())?,
            corpus: study.corpus,
            embeddings: study.embeddings,
            study: study.index,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Where accepted drafts write their reports; none disables reports.
    pub reports: Option<PathBuf>,
    pub step: f64,
    /// Descent stops here.
    pub floor: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            reports: None,
            step: DEFAULT_STEP,
            floor: DEFAULT_FLOOR,
        }
    }
}

type Clock = Arc<dyn Fn() -> String + Send + Sync>;

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Engine>,
    session: Arc<Mutex<Session>>,
    config: Arc<ServiceConfig>,
    clock: Clock,
}

impl AppState {
    pub fn new(engine: Engine, session: Session, config: ServiceConfig) -> Self {
        AppState {
            engine: Arc::new(engine),
            session: Arc::new(Mutex::new(session)),
            config: Arc::new(config),
            clock: Arc::new(timestamp_now),
        }
    }

    /// Replaces the wall clock used to stamp history events.
    pub fn with_clock(mut self, clock: impl Fn() -> String + Send + Sync + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    fn session(&self) -> MutexGuard<'_, Session> {
        self.session.lock().unwrap_or_else(PoisonError::into_inner)
    }

    fn now(&self) -> String {
        (self.clock)()
    }
}

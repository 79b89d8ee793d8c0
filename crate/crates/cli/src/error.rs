use std::fmt;
use std::io;
use std::path::Path;

use agenda_core::corpus::CorpusError;
use agenda_core::evaluation::EvalError;
use agenda_core::phraser::PhraseError;
use agenda_core::pipeline::PipelineError;
use agenda_core::retrieval::RetrievalError;
use agenda_core::skipgram::SkipGramError;
use agenda_core::vectorizer::VectorizeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Internal,
    MissingInput,
    Validation,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Internal => 1,
            Kind::MissingInput => 2,
            Kind::Validation => 3,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kind::Internal => "internal",
            Kind::MissingInput => "missing_input",
            Kind::Validation => "validation",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: Kind, message: impl fmt::Display) -> Self {
        CliError {
            kind,
            message: message.to_string(),
        }
    }

    pub fn validation(message: impl fmt::Display) -> Self {
        CliError::new(Kind::Validation, message)
    }

    pub fn internal(message: impl fmt::Display) -> Self {
        CliError::new(Kind::Internal, message)
    }

    /// The single stderr line: a JSON object with `error`, `exit_code` and
    /// `message`.
    pub fn to_line(&self) -> String {
        serde_json::json!({
            "error": self.kind.name(),
            "exit_code": self.kind.exit_code(),
            "message": self.message,
        })
        .to_string()
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Fails with a missing-input error unless `path` exists.
pub fn require(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::new(Kind::MissingInput, format!("{} does not exist", path.display())))
    }
}

fn io_kind(e: &io::Error) -> Kind {
    if e.kind() == io::ErrorKind::NotFound {
        Kind::MissingInput
    } else {
        Kind::Internal
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::new(io_kind(&e), e)
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        let kind = match &e {
            CorpusError::Io { source, .. } => io_kind(source),
            _ => Kind::Validation,
        };
        CliError::new(kind, e)
    }
}

impl From<PhraseError> for CliError {
    fn from(e: PhraseError) -> Self {
        let kind = match &e {
            PhraseError::Io { source, .. } => io_kind(source),
            _ => Kind::Validation,
        };
        CliError::new(kind, e)
    }
}

impl From<SkipGramError> for CliError {
    fn from(e: SkipGramError) -> Self {
        let kind = match &e {
            SkipGramError::Io { source, .. } => io_kind(source),
            _ => Kind::Validation,
        };
        CliError::new(kind, e)
    }
}

impl From<VectorizeError> for CliError {
    fn from(e: VectorizeError) -> Self {
        let kind = match &e {
            VectorizeError::Io { source, .. } => io_kind(source),
            _ => Kind::Validation,
        };
        CliError::new(kind, e)
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        let kind = match &e {
            RetrievalError::Io { source, .. } => io_kind(source),
            _ => Kind::Validation,
        };
        CliError::new(kind, e)
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        let kind = match &e {
            EvalError::Io { .. } => Kind::Internal,
            _ => Kind::Validation,
        };
        CliError::new(kind, e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Corpus(e) => e.into(),
            PipelineError::Phrase(e) => e.into(),
            PipelineError::SkipGram(e) => e.into(),
            PipelineError::Vectorize(e) => e.into(),
            PipelineError::Retrieval(e) => e.into(),
            PipelineError::Eval(e) => e.into(),
            PipelineError::Io { path, source } => {
                CliError::new(io_kind(&source), format!("{}: {source}", path.display()))
            }
        }
    }
}

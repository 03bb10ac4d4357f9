use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: duplicate frame id {frame_id:?}")]
    DuplicateFrameId { frame_id: String, line: u64 },
    #[error("line {line}: empty label set")]
    EmptyLabelSet { line: u64 },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("consistency check failed: {0}")]
    Consistency(String),
    #[error(transparent)]
    Core(#[from] capsule_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub(crate) fn from_core(e: capsule_core::Error) -> Error {
        match e {
            capsule_core::Error::Consistency(m) => Error::Consistency(m),
            e => Error::Core(e),
        }
    }
}

/// Maps a CSV error to an IO error or a malformed-row error with its line.
pub(crate) fn csv_error(path: &std::path::Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: path.into(), source },
        kind => Error::MalformedRow {
            line,
            reason: format!("{kind:?}"),
        },
    }
}

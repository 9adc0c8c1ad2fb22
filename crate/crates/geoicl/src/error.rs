use std::io;
use std::path::PathBuf;

use geoicl_core::augment::AugmentError;
use geoicl_core::compose::ComposeError;
use geoicl_core::eval::EvalError;
use geoicl_core::featurize::FeaturizeError;
use geoicl_core::image::ImageError;
use geoicl_core::index::IndexError;
use geoicl_core::normalize::TableError;
use geoicl_core::train::TrainError;
use serde::Serialize;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("line {line}: image for `{id}` not found: {reason}")]
    MissingImage { id: String, line: usize, reason: String },
    #[error("unsupported schema `{found}`, expected `{expected}`")]
    Schema { expected: String, found: String },
    #[error("embedding `{id}` has dimension {actual}, expected {expected}")]
    DimMismatch { id: String, expected: usize, actual: usize },
    #[error("id `{0}` is not in the dataset")]
    UnknownId(String),
    #[error("png: {0}")]
    Png(String),
    #[error("config: {0}")]
    Config(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Featurize(#[from] FeaturizeError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    /// Stable machine-readable kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MalformedRecord { .. } => "malformed_record",
            Error::DuplicateId(_) => "duplicate_id",
            Error::MissingImage { .. } => "missing_image",
            Error::Schema { .. } => "schema",
            Error::DimMismatch { .. } => "dim_mismatch",
            Error::UnknownId(_) => "unknown_id",
            Error::Png(_) => "png",
            Error::Config(_) => "config",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Image(_) => "image",
            Error::Featurize(_) => "featurize",
            Error::Table(_) => "symbol_table",
            Error::Train(TrainError::DivergedLoss { .. }) => "diverged_loss",
            Error::Train(_) => "train",
            Error::Index(IndexError::EmptyIndex) => "empty_index",
            Error::Index(_) => "index",
            Error::Compose(ComposeError::TestLeak { .. }) => "test_leak",
            Error::Compose(ComposeError::SelfInContext(_)) => "self_in_context",
            Error::Compose(_) => "compose",
            Error::Augment(AugmentError::ClientUnavailable(_)) => "client_unavailable",
            Error::Augment(AugmentError::ValidationFailed { .. }) => "validation_failed",
            Error::Augment(_) => "augment",
            Error::Eval(EvalError::BackendUnavailable { .. }) => "backend_unavailable",
            Error::Eval(EvalError::EmptySplit) => "empty_split",
            Error::Eval(_) => "eval",
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport { schema: ERROR_SCHEMA, error: ErrorBody { code: self.code(), message: self.to_string() } }
    }
}

pub const ERROR_SCHEMA: &str = "geoicl.error.v1";

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub schema: &'static str,
    pub error: ErrorBody,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
}

use thiserror::Error;

use crate::classifiers::ClassifierError;
use crate::data::DataError;
use crate::diversity::DiversityError;
use crate::evaluation::EvalError;
use crate::resampling::ResampleError;
use crate::sort::SortError;

/// Crate-level error, wrapping the per-module error enums.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Diversity(#[from] DiversityError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sort(#[from] SortError),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

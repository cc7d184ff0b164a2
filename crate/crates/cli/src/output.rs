use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] divsample::Error),
    #[error("Io: {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("InvalidConfig: {path}: {message}")]
    Json { path: String, message: String },
    #[error("InvalidArgument: {0}")]
    Usage(String),
}

macro_rules! from_module_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

from_module_error!(
    divsample::data::DataError,
    divsample::diversity::DiversityError,
    divsample::resampling::ResampleError,
    divsample::classifiers::ClassifierError,
    divsample::evaluation::EvalError,
    divsample::sort::SortError
);

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn json(path: &Path, e: serde_json::Error) -> Self {
        CliError::Json {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn usage(message: &str) -> Self {
        CliError::Usage(message.to_string())
    }
}

/// `<out>.config.json` next to `out`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".config.json");
    out.with_file_name(name)
}

/// Writes through a temporary file in the target directory, then renames,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let err = |e| CliError::io(path, e);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(contents).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

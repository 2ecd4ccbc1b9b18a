use std::path::PathBuf;

use sumcal::ErrorKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: sumcal::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("experiments {0:?} did not reach the consistency tolerance (rerun with --allow-inconsistent to accept)")]
    Inconsistent(Vec<u32>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage { source, .. } => match source.kind() {
                ErrorKind::Numerical => 3,
                ErrorKind::Validation | ErrorKind::Io => 2,
            },
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Inconsistent(_) => 4,
        }
    }
}

/// Attaches a stage name to library errors.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for sumcal::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}

pub fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create_dir(path: &std::path::Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

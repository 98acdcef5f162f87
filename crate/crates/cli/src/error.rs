use std::path::PathBuf;

/// Process exit code for each failure class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const SPEC: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const INFEASIBLE: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// Malformed file; the message carries line and field.
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("invalid spec:\n  {}", .0.join("\n  "))]
    Spec(Vec<String>),

    #[error(transparent)]
    Core(#[from] fieldtrial_core::Error),

    #[error("{0}")]
    Other(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        source: Box<CliError>,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Self::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Spec(_) => exit::SPEC,
            Self::Core(e) if e.is_numerical() => exit::NUMERICAL,
            Self::Core(e) if e.is_infeasible() => exit::INFEASIBLE,
            Self::Core(fieldtrial_core::Error::InvalidSpec(_) | fieldtrial_core::Error::Config(_)) => {
                exit::SPEC
            }
            Self::Context { source, .. } => source.exit_code(),
            _ => exit::OTHER,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

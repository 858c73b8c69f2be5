use std::fmt;
use std::io;
use std::path::Path;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    MissingFile,
    Format,
    Invalid,
    Numeric,
    Io,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Usage => 2,
            Kind::MissingFile => 3,
            Kind::Format => 4,
            Kind::Invalid => 5,
            Kind::Numeric => 6,
            Kind::Io => 7,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Kind::Usage => "usage",
            Kind::MissingFile => "missing-file",
            Kind::Format => "format",
            Kind::Invalid => "invalid-input",
            Kind::Numeric => "numeric",
            Kind::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: io::Error) -> Self {
        let kind = if err.kind() == io::ErrorKind::NotFound {
            Kind::MissingFile
        } else {
            Kind::Io
        };
        CliError::new(kind, format!("{}: {err}", path.display()))
    }

    pub fn json(path: &Path, err: serde_json::Error) -> Self {
        if err.is_io() {
            return CliError::io(path, err.into());
        }
        CliError::new(Kind::Format, format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    /// `<kind>: <message>` on one line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self.message.replace(['\n', '\r'], " ");
        write!(f, "{}: {msg}", self.kind.label())
    }
}

impl From<sqsim::Error> for CliError {
    fn from(err: sqsim::Error) -> Self {
        use sqsim::Error as E;
        let kind = match &err {
            E::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => Kind::MissingFile,
            E::Io { .. } => Kind::Io,
            E::Malformed { .. } | E::ModelFormat(_) | E::VersionMismatch { .. } => Kind::Format,
            E::InvalidInput(_) | E::InvalidDataset(_) | E::ShapeMismatch { .. } | E::MissingEmbedding(_) => {
                Kind::Invalid
            }
            E::NonFinite(_) => Kind::Numeric,
        };
        CliError::new(kind, err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

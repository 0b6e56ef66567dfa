use std::fmt;
use std::path::Path;

use tssn_core::embed::EmbedError;
use tssn_core::{EvalError, IngestError, SamplerError, StatsError, TssnError};

/// A failure, sorted by the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration values.
    Usage(String),
    /// Input that cannot be read or does not support the request.
    Data(String),
    /// The computation or output failed.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn missing(path: &Path, hint: &str) -> CliError {
        CliError::Data(format!("{} does not exist; {hint}", path.display()))
    }

    pub fn write(path: &Path, e: std::io::Error) -> CliError {
        CliError::Runtime(format!("cannot write {}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TssnError> for CliError {
    fn from(e: TssnError) -> Self {
        match e {
            TssnError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            SamplerError::Graph(g) => g.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            EmbedError::EmptyCorpus | EmbedError::Format { .. } => CliError::Data(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Invalid(_) => CliError::Usage(e.to_string()),
            EvalError::Graph(g) => g.into(),
            EvalError::Sampler(s) => s.into(),
            EvalError::Embed(m) => m.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::InvalidSpec(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

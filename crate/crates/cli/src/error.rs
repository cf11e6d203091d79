use std::fmt;
use std::path::Path;

use dbap::agreement::AgreementError;
use dbap::argeval::EvalError;
use dbap::corpus::CorpusError;
use dbap::encoder::EncoderError;
use dbap::parser::ParserError;
use dbap::rst::RstError;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Divergence,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::Data => 3,
            ErrorKind::Divergence => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
            ErrorKind::Divergence => "divergence",
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl fmt::Display) -> CliError {
        CliError {
            kind: ErrorKind::Usage,
            message: message.to_string(),
        }
    }

    pub fn data(message: impl fmt::Display) -> CliError {
        CliError {
            kind: ErrorKind::Data,
            message: message.to_string(),
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> CliError {
        CliError::data(format!("{}: {err}", path.display()))
    }

    pub fn to_json(&self) -> String {
        json!({
            "error": {
                "kind": self.kind.as_str(),
                "code": self.kind.exit_code(),
                "message": self.message,
            }
        })
        .to_string()
    }
}

impl From<ParserError> for CliError {
    fn from(e: ParserError) -> CliError {
        let kind = match e {
            ParserError::Divergence { .. } => ErrorKind::Divergence,
            ParserError::Config(_) | ParserError::UnsupportedMode(_) => ErrorKind::Usage,
            _ => ErrorKind::Data,
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        match e {
            EvalError::Parser(p) => p.into(),
            other => CliError::data(other),
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> CliError {
                CliError::data(e)
            }
        })*
    };
}

data_errors!(CorpusError, RstError, EncoderError, AgreementError);

pub type Result<T> = std::result::Result<T, CliError>;

//! Biaffine argument parser with optional discourse-coefficient modulation.

mod checkpoint;
mod coeffs;
mod decode;
mod instance;
mod model;
mod roles;
mod same_arg;
mod train;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ArgumentFunction, CorpusError};
use crate::encoder::EncoderError;
use crate::nnet::NnetError;
use crate::rst::RstError;

pub use checkpoint::{load_model, read_model, save_model, write_model};
pub use coeffs::{
    aggregate_coefficients, bucket, coefficients_tsv, export_coefficients, Bucket, CoefficientRow,
    CoefficientSummary, COEFF_TSV_HEADER, DEFAULT_BUCKET_THRESHOLD,
};
pub use decode::{brute_force_heads, decode_heads, greedy_heads, tree_score, Decoder};
pub use instance::{edu_document, Instance};
pub use model::decode_scored;
pub use model::{CoefficientParams, Model, ModelConfig, ScoredParse};
pub use roles::{infer_roles, infer_roles_lenient};
pub use same_arg::attach_same_arg;
pub use train::{train, EpochRecord, History, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Bap,
    Dbap5,
    Dbap6,
    Dbap7,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Bap, Mode::Dbap5, Mode::Dbap6, Mode::Dbap7];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Bap => "bap",
            Mode::Dbap5 => "dbap5",
            Mode::Dbap6 => "dbap6",
            Mode::Dbap7 => "dbap7",
        }
    }

    pub fn uses_rst(self) -> bool {
        self != Mode::Bap
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown mode {s:?} (expected bap, dbap5, dbap6 or dbap7)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentationMode {
    #[serde(rename = "gold")]
    Gold,
    #[serde(rename = "e2e")]
    EndToEnd,
}

impl SegmentationMode {
    /// Function inventory in label-index order.
    pub fn functions(self) -> &'static [ArgumentFunction] {
        match self {
            SegmentationMode::Gold => &ArgumentFunction::ALL[..3],
            SegmentationMode::EndToEnd => &ArgumentFunction::ALL,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SegmentationMode::Gold => "gold",
            SegmentationMode::EndToEnd => "e2e",
        }
    }
}

impl fmt::Display for SegmentationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SegmentationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gold" => Ok(SegmentationMode::Gold),
            "e2e" | "end-to-end" => Ok(SegmentationMode::EndToEnd),
            other => Err(format!(
                "unknown segmentation {other:?} (expected gold or e2e)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum ParserError {
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Rst(#[from] RstError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("structure error: {0}")]
    Structure(String),
    #[error("document {0} has no RST dependencies but the mode needs them")]
    MissingRst(String),
    #[error("coefficient export is not available in mode {0}")]
    UnsupportedMode(Mode),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("non-finite loss at epoch {epoch}; parameters restored to the last finite state")]
    Divergence { epoch: usize },
    #[error("negative discourse coefficient {0} in a ReLU mode")]
    NegativeCoefficient(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

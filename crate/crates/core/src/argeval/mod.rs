//! Evaluation: per-document counts, fold scores, cross-validation and
//! significance testing.

mod cv;
mod metrics;
mod report;
mod stats;

use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::encoder::EncoderError;
use crate::parser::ParserError;

pub use cv::{
    cross_validate, dev_split, kfold_splits, load_splits, save_splits, CvConfig, CvOutcome,
    Dataset, FoldOutcome, Split, DEV_FRACTION,
};
pub use metrics::{evaluate, Counts, Prf, Scores, METRICS};
pub use report::{compare, report_markdown, report_tsv, EvalReport, ReportRow, REPORT_COLUMNS};
pub use stats::{paired_ttest, significance_marker, TTest};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("argument error: {0}")]
    Argument(String),
    #[error("split error: {0}")]
    Split(String),
    #[error(transparent)]
    Parser(#[from] ParserError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
}

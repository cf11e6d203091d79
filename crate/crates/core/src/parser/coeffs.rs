use std::fmt;

use serde::{Deserialize, Serialize};

use crate::agreement::mean_std;
use crate::rst::Direction;

use super::{CoefficientParams, Model, ParserError};

/// Dispersion (std across folds) above which a coefficient counts as vague.
pub const DEFAULT_BUCKET_THRESHOLD: f64 = 0.3;

pub const COEFF_TSV_HEADER: &str = "relation\tdirection\tmean\tstd\tbucket";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bucket {
    Companion,
    Opposing,
    VaguelyCorrelated,
    VaguelyOpposed,
}

impl Bucket {
    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::Companion => "companion",
            Bucket::Opposing => "opposing",
            Bucket::VaguelyCorrelated => "vaguely-correlated",
            Bucket::VaguelyOpposed => "vaguely-opposed",
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Coefficients above 1 amplify arcs, those at or below 1 damp them; a
/// spread above `threshold` marks the tendency as vague.
pub fn bucket(mean: f64, std: f64, threshold: f64) -> Bucket {
    match (std <= threshold, mean > 1.0) {
        (true, true) => Bucket::Companion,
        (true, false) => Bucket::Opposing,
        (false, true) => Bucket::VaguelyCorrelated,
        (false, false) => Bucket::VaguelyOpposed,
    }
}

fn direction_str(d: Direction) -> &'static str {
    match d {
        Direction::Forward => "forward",
        Direction::Inverted => "inverted",
    }
}

/// Coefficient of one relation label in one direction for a single model.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRow {
    pub relation: String,
    pub direction: Direction,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSummary {
    pub relation: String,
    pub direction: Direction,
    pub mean: f64,
    pub std: f64,
    pub bucket: Bucket,
}

/// `ReLU(theta + bias)` for every relation in both directions. Forward rows
/// come first, in inventory order.
pub fn export_coefficients(model: &Model) -> Result<Vec<CoefficientRow>, ParserError> {
    let (fwd, bf, inv, bi) = match model.coefficients {
        CoefficientParams::Labeled { theta, bias } => (theta, bias, theta, bias),
        CoefficientParams::Directed {
            theta_fwd,
            bias_fwd,
            theta_inv,
            bias_inv,
        } => (theta_fwd, bias_fwd, theta_inv, bias_inv),
        _ => return Err(ParserError::UnsupportedMode(model.config.mode)),
    };
    let s = &model.store;
    let l = model.inventory.len();
    let mut rows = Vec::with_capacity(2 * l);
    for (dir, theta, bias, offset) in [
        (Direction::Forward, fwd, bf, 0),
        (Direction::Inverted, inv, bi, l),
    ] {
        let b = s.get(bias).item();
        for (r, label) in model.inventory.labels.iter().enumerate() {
            rows.push(CoefficientRow {
                relation: label.clone(),
                direction: dir,
                value: (s.get(theta).data()[offset + r] + b).max(0.0),
            });
        }
    }
    Ok(rows)
}

/// Mean and population std of each coefficient across models (folds).
pub fn aggregate_coefficients(
    runs: &[Vec<CoefficientRow>],
    threshold: f64,
) -> Result<Vec<CoefficientSummary>, ParserError> {
    let Some(first) = runs.first() else {
        return Ok(Vec::new());
    };
    for run in runs {
        let same = run.len() == first.len()
            && run
                .iter()
                .zip(first)
                .all(|(a, b)| a.relation == b.relation && a.direction == b.direction);
        if !same {
            return Err(ParserError::Config(
                "coefficient tables have different relation sets".into(),
            ));
        }
    }
    Ok(first
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let values: Vec<f64> = runs.iter().map(|r| r[i].value).collect();
            let ms = mean_std(&values);
            CoefficientSummary {
                relation: row.relation.clone(),
                direction: row.direction,
                mean: ms.mean,
                std: ms.std,
                bucket: bucket(ms.mean, ms.std, threshold),
            }
        })
        .collect())
}

pub fn coefficients_tsv(rows: &[CoefficientSummary]) -> String {
    let mut out = String::from(COEFF_TSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{:.4}\t{:.4}\t{}\n",
            r.relation,
            direction_str(r.direction),
            r.mean,
            r.std,
            r.bucket
        ));
    }
    out
}

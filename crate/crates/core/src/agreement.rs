//! Pairwise agreement between RST structure variants of the same text.
//!
//! Each unit of the (reduced) segmentation is an item rated by two
//! "annotators", one per variant, along three dimensions:
//!
//! * constituent: the unit's head index;
//! * nuclearity: whether the unit attaches as a satellite or as a nucleus
//!   (top nucleus and co-nuclei of multinuclear relations);
//! * relation: the incoming relation label together with the head, so that
//!   relation agreement on a unit implies attachment agreement.
//!
//! Agreement is Fleiss' kappa with two raters.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::hash::Hash;

use thiserror::Error;

use crate::corpus::Language;
use crate::rst::{Nuclearity, RstDependencies};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("variants cover {0} and {1} units")]
    UnitCount(usize, usize),
    #[error("no group has two or more variants")]
    EmptyReport,
}

/// Kappa value plus a flag for the degenerate chance-agreement case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa {
    pub value: f64,
    /// Set when expected agreement is 1 and observed agreement is not.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementReport {
    pub constituent: f64,
    pub nuclearity: f64,
    pub relation: f64,
    pub avg: f64,
    pub degenerate: bool,
}

/// Fleiss' kappa for items each rated by exactly two raters.
pub fn fleiss_kappa_two_raters<C: Eq + Hash + Clone>(ratings: &[(C, C)]) -> Kappa {
    let n_items = ratings.len() as f64;
    if ratings.is_empty() {
        return Kappa {
            value: 1.0,
            degenerate: false,
        };
    }
    let mut totals: HashMap<C, f64> = HashMap::new();
    let mut observed = 0.0;
    for (a, b) in ratings {
        *totals.entry(a.clone()).or_default() += 1.0;
        *totals.entry(b.clone()).or_default() += 1.0;
        // P_i = (sum_j n_ij^2 - m) / (m (m - 1)) with m = 2
        observed += if a == b { 1.0 } else { 0.0 };
    }
    let p_obs = observed / n_items;
    let p_exp: f64 = totals
        .values()
        .map(|&c| {
            let p = c / (2.0 * n_items);
            p * p
        })
        .sum();
    if (1.0 - p_exp).abs() < 1e-12 {
        let perfect = (p_obs - 1.0).abs() < 1e-12;
        return Kappa {
            value: if perfect { 1.0 } else { 0.0 },
            degenerate: !perfect,
        };
    }
    Kappa {
        value: (p_obs - p_exp) / (1.0 - p_exp),
        degenerate: false,
    }
}

fn status(dep: &RstDependencies, i: usize) -> Nuclearity {
    match &dep.relations[i] {
        Some(r) => r.dependent,
        None => Nuclearity::Nucleus,
    }
}

fn relation_rating(dep: &RstDependencies, i: usize) -> (usize, String) {
    let label = dep.relations[i]
        .as_ref()
        .map(|r| r.label.to_ascii_lowercase())
        .unwrap_or_else(|| "ROOT".to_string());
    (dep.heads[i], label)
}

pub fn pairwise_kappa(
    a: &RstDependencies,
    b: &RstDependencies,
) -> Result<AgreementReport, AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::UnitCount(a.len(), b.len()));
    }
    let n = a.len();
    let constituent: Vec<_> = (0..n).map(|i| (a.heads[i], b.heads[i])).collect();
    let nuclearity: Vec<_> = (0..n).map(|i| (status(a, i), status(b, i))).collect();
    let relation: Vec<_> = (0..n)
        .map(|i| (relation_rating(a, i), relation_rating(b, i)))
        .collect();
    let c = fleiss_kappa_two_raters(&constituent);
    let nu = fleiss_kappa_two_raters(&nuclearity);
    let r = fleiss_kappa_two_raters(&relation);
    Ok(AgreementReport {
        constituent: c.value,
        nuclearity: nu.value,
        relation: r.value,
        avg: (c.value + nu.value + r.value) / 3.0,
        degenerate: c.degenerate || nu.degenerate || r.degenerate,
    })
}

/// Whether two dependency structures are identical in heads, labels and
/// nuclearity.
pub fn identical(a: &RstDependencies, b: &RstDependencies) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|i| {
            a.heads[i] == b.heads[i]
                && status(a, i) == status(b, i)
                && relation_rating(a, i) == relation_rating(b, i)
        })
}

/// RST variants of one text in one language, all over the same segmentation.
#[derive(Debug, Clone)]
pub struct RstVariantSet {
    pub group_id: String,
    pub language: Language,
    pub variants: Vec<RstDependencies>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> MeanStd {
    if values.is_empty() {
        return MeanStd {
            mean: f64::NAN,
            std: f64::NAN,
        };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementRow {
    pub language: Language,
    pub pairs: usize,
    pub constituent: MeanStd,
    pub nuclearity: MeanStd,
    pub relation: MeanStd,
    pub avg: MeanStd,
    /// Fraction of pairs whose constituent kappa is exactly 1.
    pub constituent_one_frac: f64,
    /// Fraction of pairs with fully identical structures.
    pub identical_frac: f64,
}

pub fn corpus_agreement(sets: &[RstVariantSet]) -> Result<Vec<AgreementRow>, AgreementError> {
    let mut by_lang: BTreeMap<Language, Vec<(AgreementReport, bool)>> = BTreeMap::new();
    for set in sets.iter().filter(|s| s.variants.len() >= 2) {
        for i in 0..set.variants.len() {
            for j in i + 1..set.variants.len() {
                let (a, b) = (&set.variants[i], &set.variants[j]);
                let report = pairwise_kappa(a, b)?;
                by_lang
                    .entry(set.language)
                    .or_default()
                    .push((report, identical(a, b)));
            }
        }
    }
    if by_lang.is_empty() {
        return Err(AgreementError::EmptyReport);
    }
    Ok(by_lang
        .into_iter()
        .map(|(language, pairs)| {
            let col = |f: fn(&AgreementReport) -> f64| {
                mean_std(&pairs.iter().map(|(r, _)| f(r)).collect::<Vec<_>>())
            };
            let n = pairs.len() as f64;
            AgreementRow {
                language,
                pairs: pairs.len(),
                constituent: col(|r| r.constituent),
                nuclearity: col(|r| r.nuclearity),
                relation: col(|r| r.relation),
                avg: col(|r| r.avg),
                constituent_one_frac: pairs
                    .iter()
                    .filter(|(r, _)| (r.constituent - 1.0).abs() < 1e-12)
                    .count() as f64
                    / n,
                identical_frac: pairs.iter().filter(|(_, same)| *same).count() as f64 / n,
            }
        })
        .collect())
}

pub const TSV_HEADER: &str = "language\tpairs\tconstituent_mean\tconstituent_std\tnuclearity_mean\tnuclearity_std\trelation_mean\trelation_std\tavg_mean\tavg_std\tconstituent_one_frac\tidentical_frac";

pub fn to_tsv(rows: &[AgreementRow]) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
            r.language,
            r.pairs,
            r.constituent.mean,
            r.constituent.std,
            r.nuclearity.mean,
            r.nuclearity.std,
            r.relation.mean,
            r.relation.std,
            r.avg.mean,
            r.avg.std,
            r.constituent_one_frac,
            r.identical_frac
        );
    }
    out
}

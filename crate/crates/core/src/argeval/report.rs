use serde::{Deserialize, Serialize};

use crate::agreement::mean_std;

use super::{paired_ttest, significance_marker, EvalError, Scores, TTest};

pub const REPORT_COLUMNS: [&str; 6] = ["cc", "ro", "fu", "at", "UAS", "LAS"];

/// Per-fold scores with their mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_fold: Vec<Scores>,
    pub mean: Scores,
    pub std: Scores,
}

impl EvalReport {
    pub fn from_folds(per_fold: Vec<Scores>) -> EvalReport {
        let mut mean = [0.0; 6];
        let mut std = [0.0; 6];
        for m in 0..6 {
            let values: Vec<f64> = per_fold.iter().map(|s| s.as_array()[m]).collect();
            let ms = mean_std(&values);
            mean[m] = ms.mean;
            std[m] = ms.std;
        }
        EvalReport {
            per_fold,
            mean: Scores::from_array(mean),
            std: Scores::from_array(std),
        }
    }

    /// Per-fold values of metric `m` (index into the report columns).
    pub fn metric(&self, m: usize) -> Vec<f64> {
        self.per_fold.iter().map(|s| s.as_array()[m]).collect()
    }
}

/// Paired t-tests of `other` against `baseline`, one per metric.
pub fn compare(baseline: &EvalReport, other: &EvalReport) -> Result<[TTest; 6], EvalError> {
    let mut out = Vec::with_capacity(6);
    for m in 0..6 {
        out.push(paired_ttest(&other.metric(m), &baseline.metric(m))?);
    }
    Ok(out.try_into().expect("six metrics"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub report: EvalReport,
    /// Tests against the baseline row, when this row is compared to one.
    pub versus: Option<[TTest; 6]>,
}

fn cells(row: &ReportRow) -> Vec<String> {
    let mean = row.report.mean.as_array();
    let std = row.report.std.as_array();
    (0..6)
        .map(|m| {
            let marker = row.versus.map_or("", |t| significance_marker(t[m].p));
            format!("{:.1} ± {:.1}{marker}", mean[m], std[m])
        })
        .collect()
}

pub fn report_tsv(rows: &[ReportRow]) -> String {
    let mut out = format!("model\t{}\n", REPORT_COLUMNS.join("\t"));
    for row in rows {
        out.push_str(&format!("{}\t{}\n", row.name, cells(row).join("\t")));
    }
    out
}

pub fn report_markdown(rows: &[ReportRow]) -> String {
    let mut out = format!("| model | {} |\n", REPORT_COLUMNS.join(" | "));
    out.push_str(&format!("|---|{}\n", "---:|".repeat(6)));
    for row in rows {
        out.push_str(&format!("| {} | {} |\n", row.name, cells(row).join(" | ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(v: f64) -> Scores {
        Scores::from_array([v; 6])
    }

    #[test]
    fn identical_folds_have_zero_std() {
        let r = EvalReport::from_folds(vec![scores(70.0), scores(70.0)]);
        assert_eq!(r.std.as_array(), [0.0; 6]);
        assert_eq!(r.mean.as_array(), [70.0; 6]);
    }

    #[test]
    fn mean_and_std_match_folds() {
        let r = EvalReport::from_folds(vec![scores(60.0), scores(70.0), scores(80.0)]);
        assert!((r.mean.uas - 70.0).abs() < 1e-9);
        assert!((r.std.uas - (200.0f64 / 3.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn table_shape_and_markers() {
        let base = EvalReport::from_folds(vec![scores(50.0), scores(52.0), scores(51.0)]);
        let better = EvalReport::from_folds(vec![scores(60.0), scores(63.0), scores(61.0)]);
        let rows = vec![
            ReportRow {
                name: "BAP".into(),
                report: base.clone(),
                versus: None,
            },
            ReportRow {
                name: "DBAP6".into(),
                versus: Some(compare(&base, &better).unwrap()),
                report: better,
            },
        ];
        let tsv = report_tsv(&rows);
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], "model\tcc\tro\tfu\tat\tUAS\tLAS");
        assert_eq!(lines[1].split('\t').count(), 7);
        assert!(lines[1].starts_with("BAP\t51.0 ± 0.8\t"));
        assert!(lines[2].contains('*'));
        let md = report_markdown(&rows);
        assert!(md.starts_with("| model | cc | ro | fu | at | UAS | LAS |\n|---|"));
    }
}

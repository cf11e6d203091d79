use std::collections::BTreeMap;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::corpus::{ArgumentFunction, ArgumentTree, Role};
use crate::parser::infer_roles_lenient;

use super::EvalError;

/// Metric names in report order.
pub const METRICS: [&str; 6] = ["cc", "ro", "fu", "at", "uas", "las"];

/// True positives, false positives and false negatives of one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prf {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Prf {
    /// F1 in [0, 1], or `None` when the class never occurs in gold or
    /// prediction.
    pub fn f1(&self) -> Option<f64> {
        if self.tp + self.fp + self.fn_ == 0 {
            return None;
        }
        Some(2.0 * self.tp as f64 / (2 * self.tp + self.fp + self.fn_) as f64)
    }

    pub fn precision(&self) -> Option<f64> {
        (self.tp + self.fp > 0).then(|| self.tp as f64 / (self.tp + self.fp) as f64)
    }

    fn record(classes: &mut BTreeMap<String, Prf>, gold: String, pred: String) {
        if gold == pred {
            classes.entry(gold).or_default().tp += 1;
        } else {
            classes.entry(gold).or_default().fn_ += 1;
            classes.entry(pred).or_default().fp += 1;
        }
    }
}

impl AddAssign for Prf {
    fn add_assign(&mut self, o: Prf) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Raw tallies of one or more documents; sum them to pool a fold.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub cc: BTreeMap<String, Prf>,
    pub ro: BTreeMap<String, Prf>,
    pub fu: BTreeMap<String, Prf>,
    pub at: Prf,
    pub attached: usize,
    pub heads_correct: usize,
    pub labeled_correct: usize,
}

impl AddAssign<&Counts> for Counts {
    fn add_assign(&mut self, o: &Counts) {
        for (mine, theirs) in [
            (&mut self.cc, &o.cc),
            (&mut self.ro, &o.ro),
            (&mut self.fu, &o.fu),
        ] {
            for (k, v) in theirs {
                *mine.entry(k.clone()).or_default() += *v;
            }
        }
        self.at += o.at;
        self.attached += o.attached;
        self.heads_correct += o.heads_correct;
        self.labeled_correct += o.labeled_correct;
    }
}

/// Percentages for the six reported metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub cc: f64,
    pub ro: f64,
    pub fu: f64,
    pub at: f64,
    pub uas: f64,
    pub las: f64,
}

impl Scores {
    pub fn as_array(&self) -> [f64; 6] {
        [self.cc, self.ro, self.fu, self.at, self.uas, self.las]
    }

    pub fn from_array(v: [f64; 6]) -> Scores {
        Scores {
            cc: v[0],
            ro: v[1],
            fu: v[2],
            at: v[3],
            uas: v[4],
            las: v[5],
        }
    }
}

fn macro_f1(classes: &BTreeMap<String, Prf>) -> f64 {
    let f: Vec<f64> = classes.values().filter_map(Prf::f1).collect();
    if f.is_empty() {
        100.0
    } else {
        100.0 * f.iter().sum::<f64>() / f.len() as f64
    }
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        100.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

impl Counts {
    pub fn scores(&self) -> Scores {
        Scores {
            cc: macro_f1(&self.cc),
            ro: macro_f1(&self.ro),
            fu: macro_f1(&self.fu),
            at: self.at.f1().map_or(100.0, |f| 100.0 * f),
            uas: percent(self.heads_correct, self.attached),
            las: percent(self.labeled_correct, self.attached),
        }
    }
}

fn role_name(r: Role) -> String {
    match r {
        Role::Pro => "pro".into(),
        Role::Opp => "opp".into(),
    }
}

/// Tallies of one predicted tree against its gold tree.
///
/// Attachment (`at`) counts directed non-root arcs. UAS and LAS are over
/// units whose gold head is not the root. With `exclude_same_arg`, units
/// whose gold function is `SameArg` leave the attachment, UAS/LAS and
/// function tallies.
pub fn evaluate(
    pred: &ArgumentTree,
    gold: &ArgumentTree,
    exclude_same_arg: bool,
) -> Result<Counts, EvalError> {
    let n = gold.len();
    if pred.len() != n || pred.functions.len() != n || gold.functions.len() != n {
        return Err(EvalError::Argument(format!(
            "{}: predicted tree has {} units, gold has {n}",
            gold.doc_id,
            pred.len()
        )));
    }
    let excluded = |i: usize| exclude_same_arg && gold.functions[i] == ArgumentFunction::SameArg;
    let mut c = Counts::default();

    for i in 0..n {
        let g = if gold.heads[i] == 0 { "cc" } else { "non-cc" };
        let p = if pred.heads[i] == 0 { "cc" } else { "non-cc" };
        Prf::record(&mut c.cc, g.into(), p.into());
    }

    let gold_roles = gold
        .roles
        .clone()
        .unwrap_or_else(|| infer_roles_lenient(gold));
    let pred_roles = pred
        .roles
        .clone()
        .unwrap_or_else(|| infer_roles_lenient(pred));
    for i in 0..n {
        Prf::record(
            &mut c.ro,
            role_name(gold_roles[i]),
            role_name(pred_roles[i]),
        );
    }

    for i in (0..n).filter(|&i| !excluded(i)) {
        Prf::record(
            &mut c.fu,
            gold.functions[i].to_string(),
            pred.functions[i].to_string(),
        );
        let (gh, ph) = (gold.heads[i], pred.heads[i]);
        match (gh != 0, ph != 0) {
            (true, true) if gh == ph => c.at.tp += 1,
            (true, true) => {
                c.at.fn_ += 1;
                c.at.fp += 1;
            }
            (true, false) => c.at.fn_ += 1,
            (false, true) => c.at.fp += 1,
            (false, false) => {}
        }
        if gh != 0 {
            c.attached += 1;
            if gh == ph {
                c.heads_correct += 1;
                if gold.functions[i] == pred.functions[i] {
                    c.labeled_correct += 1;
                }
            }
        }
    }
    Ok(c)
}

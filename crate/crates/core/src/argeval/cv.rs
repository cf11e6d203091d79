use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ArgumentTree, Document, VariantGroup};
use crate::encoder::{EmbeddingMatrix, EmbeddingProvider};
use crate::parser::{train, Decoder, History, Instance, Model, ModelConfig, TrainConfig};
use crate::rst::{RelationInventory, RstDependencies};

use super::{evaluate, Counts, EvalError, EvalReport, Scores};

/// Share of each fold's training documents held out for early stopping.
pub const DEV_FRACTION: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

pub fn load_splits(path: &Path) -> Result<Vec<Split>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| EvalError::Split(format!("{}: {e}", path.display())))
}

pub fn save_splits(path: &Path, splits: &[Split]) -> Result<(), EvalError> {
    let text = serde_json::to_string_pretty(splits).expect("splits serialize");
    std::fs::write(path, text + "\n").map_err(|e| EvalError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Shuffled `k`-fold partition of `ids`.
pub fn kfold_splits(ids: &[String], k: usize, seed: u64) -> Result<Vec<Split>, EvalError> {
    if k < 2 || k > ids.len() {
        return Err(EvalError::Split(format!(
            "cannot make {k} folds from {} documents",
            ids.len()
        )));
    }
    let mut order = ids.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<_>, Vec<_>) =
                order.iter().enumerate().partition(|(i, _)| i % k == f);
            Split {
                train: train.into_iter().map(|(_, id)| id.clone()).collect(),
                test: test.into_iter().map(|(_, id)| id.clone()).collect(),
            }
        })
        .collect())
}

/// Splits training ids into (train, dev); dev takes `round(fraction * n)`
/// ids, at least one when `fraction > 0` and at least two ids are given.
pub fn dev_split(ids: &[String], fraction: f64, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut order = ids.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut k = (fraction * ids.len() as f64).round() as usize;
    if fraction > 0.0 && ids.len() >= 2 {
        k = k.clamp(1, ids.len() - 1);
    } else {
        k = 0;
    }
    let dev = order.split_off(order.len() - k);
    (order, dev)
}

/// Documents with their vectors and, optionally, discourse dependencies.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub groups: Vec<VariantGroup>,
    pub embeddings: BTreeMap<String, EmbeddingMatrix>,
    pub rst: BTreeMap<String, RstDependencies>,
    pub inventory: RelationInventory,
    pub dim: usize,
}

impl Dataset {
    pub fn new<P: EmbeddingProvider + ?Sized>(
        groups: Vec<VariantGroup>,
        provider: &P,
        rst: BTreeMap<String, RstDependencies>,
        inventory: RelationInventory,
    ) -> Result<Dataset, EvalError> {
        let dim = provider.dim();
        let mut embeddings = BTreeMap::new();
        for doc in groups.iter().flat_map(VariantGroup::documents) {
            let rows = provider.embed(doc)?;
            embeddings.insert(
                doc.id.clone(),
                EmbeddingMatrix::new(&vec![0.0; dim], &rows)?,
            );
        }
        Ok(Dataset {
            groups,
            embeddings,
            rst,
            inventory,
            dim,
        })
    }

    pub fn original_ids(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.original.id.clone()).collect()
    }

    pub fn instance(
        &self,
        doc: &Document,
        tree: &ArgumentTree,
        with_rst: bool,
    ) -> Result<Instance, EvalError> {
        let emb = self
            .embeddings
            .get(&doc.id)
            .ok_or_else(|| EvalError::Argument(format!("no embeddings for {}", doc.id)))?
            .clone();
        let rst = if with_rst {
            Some(
                self.rst
                    .get(&doc.id)
                    .ok_or_else(|| crate::parser::ParserError::MissingRst(doc.id.clone()))?,
            )
        } else {
            None
        };
        let mut gold = tree.clone();
        gold.doc_id = doc.id.clone();
        Ok(Instance::new(
            doc.id.clone(),
            emb,
            rst,
            &self.inventory,
            Some(gold),
        )?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    /// Template; `d_lm` and `seed` are set per fold.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub augmented: bool,
    pub dev_fraction: f64,
    pub exclude_same_arg: bool,
    pub decoder: Decoder,
    pub jobs: usize,
    pub seed: u64,
}

impl CvConfig {
    pub fn new(model: ModelConfig) -> CvConfig {
        CvConfig {
            model,
            train: TrainConfig::default(),
            augmented: false,
            dev_fraction: DEV_FRACTION,
            exclude_same_arg: false,
            decoder: Decoder::Mst,
            jobs: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub train_instances: usize,
    pub dev_instances: usize,
    pub test_ids: Vec<String>,
    pub counts: Counts,
    pub scores: Scores,
    pub history: History,
    pub predictions: Vec<ArgumentTree>,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub folds: Vec<FoldOutcome>,
    pub report: EvalReport,
}

fn check_splits(data: &Dataset, splits: &[Split]) -> Result<(), EvalError> {
    let known: BTreeSet<&str> = data.groups.iter().map(|g| g.original.id.as_str()).collect();
    if splits.is_empty() {
        return Err(EvalError::Split("no folds".into()));
    }
    for (f, s) in splits.iter().enumerate() {
        if s.train.is_empty() || s.test.is_empty() {
            return Err(EvalError::Split(format!(
                "fold {} has an empty side",
                f + 1
            )));
        }
        for id in s.train.iter().chain(&s.test) {
            if !known.contains(id.as_str()) {
                return Err(EvalError::Split(format!(
                    "fold {} references unknown document {id}",
                    f + 1
                )));
            }
        }
        let train: BTreeSet<&String> = s.train.iter().collect();
        if let Some(id) = s.test.iter().find(|id| train.contains(id)) {
            return Err(EvalError::Split(format!(
                "fold {}: {id} is in both train and test",
                f + 1
            )));
        }
    }
    Ok(())
}

fn run_fold(
    data: &Dataset,
    split: &Split,
    fold: usize,
    cfg: &CvConfig,
) -> Result<FoldOutcome, EvalError> {
    let by_id: BTreeMap<&str, &VariantGroup> = data
        .groups
        .iter()
        .map(|g| (g.original.id.as_str(), g))
        .collect();
    let fold_seed = cfg.seed.wrapping_add(fold as u64);
    let with_rst = cfg.model.mode.uses_rst();
    let (train_ids, dev_ids) = dev_split(&split.train, cfg.dev_fraction, fold_seed);

    let mut train_set = Vec::new();
    for id in &train_ids {
        let g = by_id[id.as_str()];
        train_set.push(data.instance(&g.original, &g.tree, with_rst)?);
        if cfg.augmented {
            for v in &g.variants {
                train_set.push(data.instance(v, &g.tree, with_rst)?);
            }
        }
    }
    let dev_set = dev_ids
        .iter()
        .map(|id| {
            let g = by_id[id.as_str()];
            data.instance(&g.original, &g.tree, with_rst)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut model_cfg = cfg.model.clone();
    model_cfg.d_lm = data.dim;
    model_cfg.seed = fold_seed;
    let mut model = Model::new(model_cfg)?;
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = fold_seed;
    train_cfg.decoder = cfg.decoder;
    let history = train(&mut model, &train_set, &dev_set, &train_cfg)?;

    let mut counts = Counts::default();
    let mut predictions = Vec::with_capacity(split.test.len());
    for id in &split.test {
        let g = by_id[id.as_str()];
        let inst = data.instance(&g.original, &g.tree, with_rst)?;
        let (pred, _) = model.parse(&inst, cfg.decoder)?;
        counts += &evaluate(&pred, &g.tree, cfg.exclude_same_arg)?;
        predictions.push(pred);
    }
    Ok(FoldOutcome {
        fold,
        train_instances: train_set.len(),
        dev_instances: dev_set.len(),
        test_ids: split.test.clone(),
        scores: counts.scores(),
        counts,
        history,
        predictions,
    })
}

/// Trains and evaluates one model per fold. Only originals are tested;
/// paraphrases join the training side when `augmented` is set. Folds run
/// on up to `jobs` threads; results are ordered by fold.
pub fn cross_validate(
    data: &Dataset,
    splits: &[Split],
    cfg: &CvConfig,
) -> Result<CvOutcome, EvalError> {
    check_splits(data, splits)?;
    let jobs = cfg.jobs.clamp(1, splits.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<FoldOutcome, EvalError>>>> =
        Mutex::new((0..splits.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let f = next.fetch_add(1, Ordering::SeqCst);
                if f >= splits.len() {
                    break;
                }
                let r = run_fold(data, &splits[f], f, cfg);
                results.lock().expect("fold results lock")[f] = Some(r);
            });
        }
    });
    let folds = results
        .into_inner()
        .expect("fold results lock")
        .into_iter()
        .map(|r| r.expect("every fold ran"))
        .collect::<Result<Vec<_>, _>>()?;
    let report = EvalReport::from_folds(folds.iter().map(|f| f.scores).collect());
    Ok(CvOutcome { folds, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Language;
    use crate::encoder::HashEncoder;
    use crate::parser::Mode;
    use crate::synth::{generate, SynthConfig};

    fn dataset(docs: usize, paraphrases: bool) -> Dataset {
        let c = generate(&SynthConfig {
            docs,
            paraphrases,
            ..SynthConfig::default()
        });
        Dataset::new(
            c.groups,
            &HashEncoder::new(16, 0).unwrap(),
            c.rst,
            RelationInventory::for_language(Language::En),
        )
        .unwrap()
    }

    fn quick(mode: Mode) -> CvConfig {
        let mut m = ModelConfig::new(mode, 16);
        m.arc_dim = 8;
        m.tag_dim = 4;
        let mut cfg = CvConfig::new(m);
        cfg.train.max_epochs = 2;
        cfg
    }

    #[test]
    fn kfold_partitions_ids() {
        let ids: Vec<String> = (0..10).map(|i| format!("d{i}")).collect();
        let splits = kfold_splits(&ids, 5, 3).unwrap();
        let mut tested: Vec<String> = splits.iter().flat_map(|s| s.test.clone()).collect();
        tested.sort();
        let mut all = ids.clone();
        all.sort();
        assert_eq!(tested, all);
        assert!(splits
            .iter()
            .all(|s| s.train.len() == 8 && s.test.len() == 2));
    }

    #[test]
    fn dev_split_takes_fifteen_percent() {
        let ids: Vec<String> = (0..40).map(|i| format!("d{i}")).collect();
        let (train, dev) = dev_split(&ids, DEV_FRACTION, 0);
        assert_eq!(dev.len(), 6);
        assert_eq!(train.len(), 34);
        assert_eq!(dev_split(&ids[..1], DEV_FRACTION, 0).1.len(), 0);
    }

    #[test]
    fn augmentation_doubles_training_and_tests_originals() {
        let data = dataset(12, true);
        let splits = kfold_splits(&data.original_ids(), 3, 0).unwrap();
        let plain = cross_validate(&data, &splits, &quick(Mode::Bap)).unwrap();
        let mut cfg = quick(Mode::Bap);
        cfg.augmented = true;
        let aug = cross_validate(&data, &splits, &cfg).unwrap();
        for (p, a) in plain.folds.iter().zip(&aug.folds) {
            assert_eq!(a.train_instances, 2 * p.train_instances);
            assert_eq!(a.dev_instances, p.dev_instances);
            assert_eq!(a.test_ids, p.test_ids);
            assert!(a.predictions.iter().all(|t| !t.doc_id.ends_with("_p")));
        }
    }

    #[test]
    fn unknown_ids_are_split_errors() {
        let data = dataset(4, false);
        let splits = vec![Split {
            train: vec!["synth_000".into()],
            test: vec!["nope".into()],
        }];
        assert!(matches!(
            cross_validate(&data, &splits, &quick(Mode::Bap)),
            Err(EvalError::Split(_))
        ));
    }

    #[test]
    fn parallel_folds_match_sequential() {
        let data = dataset(9, false);
        let splits = kfold_splits(&data.original_ids(), 3, 1).unwrap();
        let seq = cross_validate(&data, &splits, &quick(Mode::Dbap6)).unwrap();
        let mut cfg = quick(Mode::Dbap6);
        cfg.jobs = 3;
        let par = cross_validate(&data, &splits, &cfg).unwrap();
        assert_eq!(seq.report, par.report);
    }
}

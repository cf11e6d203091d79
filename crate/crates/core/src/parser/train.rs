use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nnet::{Adam, AdamConfig, Gradients, NnetError};

use super::{Decoder, Instance, Model, ParserError};

const DROPOUT_SEED_SALT: u64 = 0xd1b5_4a32_d192_ed03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr_lm: f64,
    pub lr_head: f64,
    pub lr_coefficients: f64,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without dev LAS improvement before stopping.
    pub patience: usize,
    pub freeze_coefficients: bool,
    pub seed: u64,
    /// Stop as soon as training LAS reaches this value (percent). Enables
    /// per-epoch training evaluation.
    pub target_train_las: Option<f64>,
    pub decoder: Decoder,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_lm: 2e-5,
            lr_head: 2e-6,
            lr_coefficients: 2e-2,
            adam: AdamConfig::default(),
            batch_size: 4,
            max_epochs: 75,
            patience: 10,
            freeze_coefficients: false,
            seed: 0,
            target_train_las: None,
            decoder: Decoder::Mst,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train_las: Option<f64>,
    pub dev_uas: Option<f64>,
    pub dev_las: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub steps: u64,
}

/// Unlabeled and labeled attachment accuracy (percent) over units whose gold
/// head is not the root.
pub(crate) fn attachment(
    model: &Model,
    data: &[Instance],
    decoder: Decoder,
) -> Result<(f64, f64), ParserError> {
    let (mut total, mut heads, mut labeled) = (0usize, 0usize, 0usize);
    for inst in data {
        let Some(gold) = &inst.gold else { continue };
        let (pred, _) = model.parse(inst, decoder)?;
        for i in 0..gold.len() {
            if gold.heads[i] == 0 {
                continue;
            }
            total += 1;
            if pred.heads[i] == gold.heads[i] {
                heads += 1;
                if pred.functions[i] == gold.functions[i] {
                    labeled += 1;
                }
            }
        }
    }
    if total == 0 {
        return Ok((100.0, 100.0));
    }
    Ok((
        100.0 * heads as f64 / total as f64,
        100.0 * labeled as f64 / total as f64,
    ))
}

fn overflowed(e: &ParserError) -> bool {
    matches!(e, ParserError::Nnet(NnetError::NonFinite(_)))
}

/// Mini-batch training with per-document gradient accumulation, dev-LAS
/// early stopping and best-epoch restore.
///
/// On a non-finite loss or gradient the parameters are reset to the state
/// at the start of the failing epoch and `Divergence` is returned.
pub fn train(
    model: &mut Model,
    train: &[Instance],
    dev: &[Instance],
    cfg: &TrainConfig,
) -> Result<History, ParserError> {
    if train.is_empty() {
        return Err(ParserError::EmptyTrainingSet);
    }
    if cfg.batch_size == 0 {
        return Err(ParserError::Config("batch size must be positive".into()));
    }
    if train.iter().any(|i| i.gold.is_none()) {
        return Err(ParserError::Structure(
            "training instance without gold tree".into(),
        ));
    }
    let groups = model.param_groups(
        cfg.lr_lm,
        cfg.lr_head,
        cfg.lr_coefficients,
        cfg.freeze_coefficients,
    );
    let mut adam = Adam::new(cfg.adam, groups);
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ DROPOUT_SEED_SALT);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::default();
    let mut best: Option<(f64, crate::nnet::ParamStore)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        let last_good = model.store.clone();
        order.shuffle(&mut order_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = Gradients::default();
            for &i in batch {
                let step =
                    model
                        .loss_graph(&train[i], Some(&mut drop_rng))
                        .and_then(|(g, loss)| {
                            Ok((g.value(loss).item(), g.backward(loss, &model.store)?))
                        });
                let (value, doc_grads) = match step {
                    Err(e) if overflowed(&e) => (f64::NAN, Gradients::default()),
                    other => other?,
                };
                if !value.is_finite() || !doc_grads.is_finite() {
                    model.store = last_good;
                    return Err(ParserError::Divergence { epoch });
                }
                epoch_loss += value;
                grads.accumulate(&doc_grads);
            }
            adam.step(&mut model.store, &grads);
        }
        if !model.store.named_tensors().all(|(_, t)| t.is_finite()) {
            model.store = last_good;
            return Err(ParserError::Divergence { epoch });
        }

        let measured = (|| {
            let train_las = match cfg.target_train_las {
                Some(_) => Some(attachment(model, train, cfg.decoder)?.1),
                None => None,
            };
            let dev = if dev.is_empty() {
                None
            } else {
                Some(attachment(model, dev, cfg.decoder)?)
            };
            Ok((train_las, dev))
        })();
        let (train_las, dev_scores) = match measured {
            Err(e) if overflowed(&e) => {
                model.store = last_good;
                return Err(ParserError::Divergence { epoch });
            }
            other => other?,
        };
        let (dev_uas, dev_las) = (dev_scores.map(|d| d.0), dev_scores.map(|d| d.1));
        history.epochs.push(EpochRecord {
            epoch,
            loss: epoch_loss,
            train_las,
            dev_uas,
            dev_las,
        });
        history.steps = adam.steps();
        history.best_epoch = epoch;

        if let Some(las) = dev_las {
            if best.as_ref().is_none_or(|(b, _)| las > *b) {
                best = Some((las, model.store.clone()));
                since_best = 0;
            } else {
                since_best += 1;
            }
        }
        if let (Some(target), Some(las)) = (cfg.target_train_las, train_las) {
            if las >= target {
                history.stopped_early = epoch < cfg.max_epochs;
                break;
            }
        }
        if dev_las.is_some() && since_best >= cfg.patience {
            history.stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }
    if let Some((las, store)) = best {
        history.best_epoch = history
            .epochs
            .iter()
            .find(|r| r.dev_las == Some(las))
            .map_or(history.best_epoch, |r| r.epoch);
        model.store = store;
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ArgumentFunction::*, ArgumentTree, Language};
    use crate::encoder::EmbeddingMatrix;
    use crate::parser::{Mode, ModelConfig};
    use crate::rst::RelationInventory;
    use rand::Rng;

    fn toy(seed: u64, n: usize, d: usize) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let emb = EmbeddingMatrix::new(&vec![0.0; d], &rows).unwrap();
        let heads: Vec<usize> = (0..n).collect();
        let mut functions = vec![Support; n];
        functions[0] = Cc;
        if n > 2 {
            functions[2] = Attack;
        }
        let gold = ArgumentTree::new(format!("t{seed}"), heads, functions).unwrap();
        Instance::new(
            format!("t{seed}"),
            emb,
            None,
            &RelationInventory::for_language(Language::En),
            Some(gold),
        )
        .unwrap()
    }

    fn loss(model: &Model, data: &[Instance]) -> f64 {
        data.iter()
            .map(|i| {
                let (g, l) = model.loss_graph(i, None).unwrap();
                g.value(l).item()
            })
            .sum()
    }

    #[test]
    fn one_step_reduces_loss() {
        let mut cfg = ModelConfig::new(Mode::Bap, 8);
        cfg.dropout = 0.0;
        let mut model = Model::new(cfg).unwrap();
        let data: Vec<Instance> = (0..4).map(|s| toy(s, 4, 8)).collect();
        let before = loss(&model, &data);
        let tc = TrainConfig {
            max_epochs: 1,
            ..TrainConfig::default()
        };
        train(&mut model, &data, &[], &tc).unwrap();
        assert!(loss(&model, &data) < before);
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let mut model = Model::new(ModelConfig::new(Mode::Bap, 8)).unwrap();
        assert!(matches!(
            train(&mut model, &[], &[], &TrainConfig::default()),
            Err(ParserError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn divergence_restores_last_good_state() {
        let mut model = Model::new(ModelConfig::new(Mode::Bap, 8)).unwrap();
        let data = vec![toy(1, 3, 8)];
        let tc = TrainConfig {
            max_epochs: 3,
            lr_head: 1e300,
            ..TrainConfig::default()
        };
        let result = train(&mut model, &data, &[], &tc);
        assert!(
            matches!(result, Err(ParserError::Divergence { .. })),
            "{result:?}"
        );
        assert!(model.store.named_tensors().all(|(_, t)| t.is_finite()));
    }

    #[test]
    fn overflowing_dev_scores_count_as_divergence() {
        let mut model = Model::new(ModelConfig::new(Mode::Bap, 8)).unwrap();
        let data: Vec<Instance> = (0..4).map(|s| toy(s, 4, 8)).collect();
        let dev = vec![toy(9, 4, 8)];
        let tc = TrainConfig {
            max_epochs: 3,
            lr_head: 1e300,
            lr_lm: 1e300,
            ..TrainConfig::default()
        };
        let result = train(&mut model, &data, &dev, &tc);
        assert!(
            matches!(result, Err(ParserError::Divergence { .. })),
            "{result:?}"
        );
    }

    #[test]
    fn early_stopping_keeps_best_dev_epoch() {
        let mut model = Model::new(ModelConfig::new(Mode::Bap, 8)).unwrap();
        let data: Vec<Instance> = (0..4).map(|s| toy(s, 4, 8)).collect();
        let dev = vec![toy(9, 4, 8)];
        let tc = TrainConfig {
            max_epochs: 30,
            patience: 2,
            ..TrainConfig::default()
        };
        let h = train(&mut model, &data, &dev, &tc).unwrap();
        let best = h
            .epochs
            .iter()
            .filter_map(|r| r.dev_las)
            .fold(f64::MIN, f64::max);
        assert_eq!(h.epochs[h.best_epoch - 1].dev_las, Some(best));
        assert_eq!(attachment(&model, &dev, Decoder::Mst).unwrap().1, best);
    }
}

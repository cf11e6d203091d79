//! Acceptance gate. Runs every criterion in order, prints one PASS/FAIL line
//! each and exits non-zero if any fails.
//!
//! `cargo test -p dbap --test acceptance` runs all of them; a free argument
//! selects criteria whose name contains it.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dbap::agreement::{corpus_agreement, pairwise_kappa, RstVariantSet};
use dbap::argeval::{
    cross_validate, evaluate, kfold_splits, paired_ttest, CvConfig, Dataset, Prf, Split,
};
use dbap::corpus::ArgumentFunction::{self, Attack, Cc, SameArg, Support};
use dbap::encoder::{EmbeddingMatrix, EmbeddingProvider, HashEncoder, DEFAULT_HASH_DIM};
use dbap::nnet::{
    bilinear_scores, check_gradients, dropout, read_checkpoint, Activation, FFLayer,
    GradCheckOptions, GradCheckReport, Graph, NnetError, ParamId, ParamStore, Tensor, Var,
};
use dbap::parser::{
    attach_same_arg, brute_force_heads, decode_heads, edu_document, infer_roles, train, tree_score,
    Instance, Mode, Model, ModelConfig, ParserError, TrainConfig,
};
use dbap::rst::{Direction, Nuclearity, RstRelation};
use dbap::synth::{generate, micro_k002, overfit_corpus, random_tree, SynthConfig};
use dbap::{ArgumentTree, Language, RelationInventory, Role, RstDependencies};

const GRAD_H: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
const GRAD_SEEDS: u64 = 100;
const GRAD_BUDGET: Duration = Duration::from_secs(30);
const DECODER_MATRICES: usize = 200;
const DECODER_BUDGET: Duration = Duration::from_secs(10);
const ROLE_TREES: usize = 1000;
const OVERFIT_EPOCHS: usize = 200;
const OVERFIT_BUDGET: Duration = Duration::from_secs(120);
const BENEFIT_SEEDS: u64 = 5;
const BENEFIT_MIN_UAS_GAIN: f64 = 5.0;
const BENEFIT_MAX_P: f64 = 0.05;
const METRIC_PAIRS: usize = 1000;
const FLOAT_TOL: f64 = 1e-12;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= FLOAT_TOL
}

// ---------------------------------------------------------------------------
// gradients

fn random_param(
    store: &mut ParamStore,
    name: &str,
    shape: &[usize],
    rng: &mut ChaCha8Rng,
) -> ParamId {
    store.add(name, Tensor::uniform(shape, -1.0, 1.0, rng))
}

/// `sum(out * R)` for a fixed random `R`, so every output entry carries a
/// distinct weight.
fn weighted(g: &mut Graph, out: Var, seed: u64) -> Result<Var, NnetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let r = (0..g.value(out).numel())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let y = g.mul_const(out, r)?;
    Ok(g.sum(y))
}

type OpLoss = Box<dyn Fn(&ParamStore) -> Result<(Graph, Var), NnetError>>;

/// One small graph per op: the store, its parameters and a loss closure.
fn op_case(op: &str, seed: u64) -> (ParamStore, Vec<ParamId>, OpLoss) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ParamStore::new();
    let m = rng.random_range(2..5);
    let k = rng.random_range(2..5);
    let n = rng.random_range(2..5);
    let a = random_param(&mut s, "a", &[m, k], &mut rng);
    let loss: OpLoss = match op {
        "matmul" => {
            let b = random_param(&mut s, "b", &[k, n], &mut rng);
            Box::new(move |st| {
                let mut g = Graph::new();
                let (x, y) = (g.param(st, a)?, g.param(st, b)?);
                let z = g.matmul(x, y)?;
                let l = weighted(&mut g, z, seed)?;
                Ok((g, l))
            })
        }
        "matmul_nt" => {
            let b = random_param(&mut s, "b", &[n, k], &mut rng);
            Box::new(move |st| {
                let mut g = Graph::new();
                let (x, y) = (g.param(st, a)?, g.param(st, b)?);
                let z = g.matmul_nt(x, y)?;
                let l = weighted(&mut g, z, seed)?;
                Ok((g, l))
            })
        }
        "add_row_bias" => {
            let b = random_param(&mut s, "b", &[k], &mut rng);
            Box::new(move |st| {
                let mut g = Graph::new();
                let (x, y) = (g.param(st, a)?, g.param(st, b)?);
                let z = g.add_row_bias(x, y)?;
                let l = weighted(&mut g, z, seed)?;
                Ok((g, l))
            })
        }
        "add_scalar" => {
            let b = random_param(&mut s, "b", &[1], &mut rng);
            Box::new(move |st| {
                let mut g = Graph::new();
                let (x, y) = (g.param(st, a)?, g.param(st, b)?);
                let z = g.add_scalar(x, y)?;
                let l = weighted(&mut g, z, seed)?;
                Ok((g, l))
            })
        }
        "add" | "mul" => {
            let b = random_param(&mut s, "b", &[m, k], &mut rng);
            let mul = op == "mul";
            Box::new(move |st| {
                let mut g = Graph::new();
                let (x, y) = (g.param(st, a)?, g.param(st, b)?);
                let z = if mul { g.mul(x, y)? } else { g.add(x, y)? };
                let l = weighted(&mut g, z, seed)?;
                Ok((g, l))
            })
        }
        "relu" => Box::new(move |st| {
            let mut g = Graph::new();
            let x = g.param(st, a)?;
            let z = g.relu(x);
            let l = weighted(&mut g, z, seed)?;
            Ok((g, l))
        }),
        "augment_ones" => Box::new(move |st| {
            let mut g = Graph::new();
            let x = g.param(st, a)?;
            let z = g.augment_ones(x);
            let l = weighted(&mut g, z, seed)?;
            Ok((g, l))
        }),
        "slice_rows" => {
            let start = rng.random_range(0..m);
            let count = rng.random_range(1..=m - start);
            Box::new(move |st| {
                let mut g = Graph::new();
                let x = g.param(st, a)?;
                let z = g.slice_rows(x, start, count)?;
                let l = weighted(&mut g, z, seed)?;
                Ok((g, l))
            })
        }
        "gather" => {
            let idx: Vec<Option<usize>> = (0..n * 3)
                .map(|_| rng.random_bool(0.8).then(|| rng.random_range(0..m * k)))
                .collect();
            Box::new(move |st| {
                let mut g = Graph::new();
                let x = g.param(st, a)?;
                let z = g.gather(x, idx.clone(), &[n, 3])?;
                let l = weighted(&mut g, z, seed)?;
                Ok((g, l))
            })
        }
        "fix" => {
            let fixed: Vec<Option<f64>> = (0..m * k)
                .map(|_| rng.random_bool(0.3).then_some(1.0))
                .collect();
            Box::new(move |st| {
                let mut g = Graph::new();
                let x = g.param(st, a)?;
                let z = g.fix(x, fixed.clone())?;
                let l = weighted(&mut g, z, seed)?;
                Ok((g, l))
            })
        }
        "pair_dot" => {
            let b = random_param(&mut s, "b", &[n, k], &mut rng);
            let pairs: Vec<(usize, usize)> = (0..5)
                .map(|_| (rng.random_range(0..m), rng.random_range(0..n)))
                .collect();
            Box::new(move |st| {
                let mut g = Graph::new();
                let (x, y) = (g.param(st, a)?, g.param(st, b)?);
                let z = g.pair_dot(x, y, pairs.clone())?;
                let l = weighted(&mut g, z, seed)?;
                Ok((g, l))
            })
        }
        "stack_cols" => {
            let b = random_param(&mut s, "b", &[m, k], &mut rng);
            Box::new(move |st| {
                let mut g = Graph::new();
                let (x, y) = (g.param(st, a)?, g.param(st, b)?);
                let z = g.stack_cols(&[x, y, x])?;
                let l = weighted(&mut g, z, seed)?;
                Ok((g, l))
            })
        }
        "softmax_xent" => {
            let gold: Vec<usize> = (0..m).map(|_| rng.random_range(0..k)).collect();
            let mask: Vec<bool> = (0..m * k)
                .map(|i| i % k == gold[i / k] || rng.random_bool(0.7))
                .collect();
            Box::new(move |st| {
                let mut g = Graph::new();
                let x = g.param(st, a)?;
                let l = g.softmax_xent(x, gold.clone(), Some(mask.clone()))?;
                Ok((g, l))
            })
        }
        "mul_const" => {
            let c: Vec<f64> = (0..m * k).map(|_| rng.random_range(-2.0..2.0)).collect();
            Box::new(move |st| {
                let mut g = Graph::new();
                let x = g.param(st, a)?;
                let z = g.mul_const(x, c.clone())?;
                let y = g.mul(z, x)?;
                let l = g.sum(y);
                Ok((g, l))
            })
        }
        "sum" => Box::new(move |st| {
            let mut g = Graph::new();
            let x = g.param(st, a)?;
            let y = g.mul(x, x)?;
            let l = g.sum(y);
            Ok((g, l))
        }),
        "bilinear" => {
            let hp = random_param(&mut s, "hp", &[n, k], &mut rng);
            let u = random_param(&mut s, "u", &[k + 1, k + 1], &mut rng);
            let b = random_param(&mut s, "b", &[1], &mut rng);
            Box::new(move |st| {
                let mut g = Graph::new();
                let (x, y, uu, bb) = (
                    g.param(st, a)?,
                    g.param(st, hp)?,
                    g.param(st, u)?,
                    g.param(st, b)?,
                );
                let z = bilinear_scores(&mut g, x, y, uu, Some(bb))?;
                let l = weighted(&mut g, z, seed)?;
                Ok((g, l))
            })
        }
        "feedforward" => {
            let layer = FFLayer::init(&mut s, "ff", k, n, 1.0, Activation::Relu, &mut rng);
            Box::new(move |st| {
                let mut g = Graph::new();
                let x = g.param(st, a)?;
                let z = layer.forward(&mut g, st, x)?;
                let l = weighted(&mut g, z, seed)?;
                Ok((g, l))
            })
        }
        "dropout" => Box::new(move |st| {
            let mut g = Graph::new();
            let x = g.param(st, a)?;
            let mut mask_rng = ChaCha8Rng::seed_from_u64(seed);
            let z = dropout(&mut g, x, 0.3, true, &mut mask_rng)?;
            let l = weighted(&mut g, z, seed)?;
            Ok((g, l))
        }),
        other => panic!("unknown op {other}"),
    };
    let params = s.ids().collect();
    (s, params, loss)
}

const OPS: [&str; 19] = [
    "matmul",
    "matmul_nt",
    "add_row_bias",
    "add_scalar",
    "add",
    "mul",
    "relu",
    "augment_ones",
    "slice_rows",
    "gather",
    "fix",
    "pair_dot",
    "stack_cols",
    "softmax_xent",
    "sum",
    "bilinear",
    "feedforward",
    "dropout",
    "mul_const",
];

fn grad_opts(seed: u64) -> GradCheckOptions {
    GradCheckOptions {
        h: GRAD_H,
        max_elements: 64,
        directions: 2,
        seed,
    }
}

/// A DBAP7 model moved off its neutral start, with a random discourse
/// structure and gold tree.
fn dbap7_case(seed: u64, n: usize, d: usize) -> (Model, Instance) {
    let mut cfg = ModelConfig::new(Mode::Dbap7, d);
    cfg.seed = seed;
    cfg.arc_dim = 8;
    cfg.tag_dim = 4;
    // unit-scale weights keep the softmaxes away from saturation, where
    // finite differences only see rounding noise
    cfg.init_scale = 1.0;
    let mut model = Model::new(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7919));
    for id in model.store.ids().collect::<Vec<_>>() {
        for x in model.store.get_mut(id).data_mut() {
            *x += rng.random_range(-0.5..0.5);
        }
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let emb = EmbeddingMatrix::new(&vec![0.0; d], &rows).unwrap();
    let labels = model.inventory.labels.clone();
    let arcs: Vec<(usize, Option<&str>)> = (0..n)
        .map(|i| {
            if i == 0 {
                (0, None)
            } else {
                (
                    rng.random_range(1..=i),
                    Some(labels[rng.random_range(0..labels.len())].as_str()),
                )
            }
        })
        .collect();
    let rst = RstDependencies::from_arcs(&arcs).unwrap();
    let gold = random_tree("g", n, 0.4, &mut rng);
    let inst = Instance::new("g", emb, Some(&rst), &model.inventory, Some(gold)).unwrap();
    (model, inst)
}

fn worse(acc: &mut (f64, String), r: &GradCheckReport, label: &str) {
    if r.max_rel_error > acc.0 || acc.1.is_empty() {
        acc.0 = acc.0.max(r.max_rel_error);
        acc.1 = format!("{label}/{}", r.worst);
    }
}

fn gradient_correctness() -> Check {
    let start = Instant::now();
    let mut worst = (0.0, String::new());
    let mut checked = 0;
    for seed in 0..GRAD_SEEDS {
        for op in OPS {
            let (mut store, params, loss) = op_case(op, seed);
            let r = check_gradients(&mut store, &params, &loss, grad_opts(seed))
                .map_err(|e| format!("{op}: {e}"))?;
            checked += r.checked;
            worse(&mut worst, &r, op);
        }
        let n = 2 + (seed as usize % 4);
        let (mut model, inst) = dbap7_case(seed, n, 16);
        let params: Vec<ParamId> = model.store.ids().collect();
        let probe = model.clone();
        let r = check_gradients(
            &mut model.store,
            &params,
            |st| {
                probe.loss_graph_with(st, &inst, None).map_err(|e| match e {
                    ParserError::Nnet(n) => n,
                    other => NnetError::Shape(other.to_string()),
                })
            },
            GradCheckOptions {
                max_elements: 16,
                ..grad_opts(seed)
            },
        )
        .map_err(|e| format!("dbap7: {e}"))?;
        checked += r.checked;
        worse(&mut worst, &r, "dbap7");
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "{} ops + dbap7 x {GRAD_SEEDS} seeds, {checked} probes, max rel err {:.2e} ({}), {:.1}s",
        OPS.len(),
        worst.0,
        worst.1,
        elapsed.as_secs_f64()
    );
    ensure(worst.0 < GRAD_TOL, || detail.clone())?;
    ensure(elapsed < GRAD_BUDGET, || {
        format!("over time budget: {detail}")
    })?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// decoder

/// Every head vector with exactly one root child and no cycles.
fn exhaustive_best(scores: &[Vec<f64>]) -> f64 {
    let n = scores.len();
    let mut heads = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    loop {
        let valid = heads.iter().filter(|&&h| h == 0).count() == 1
            && (0..n).all(|i| {
                let mut cur = i + 1;
                for _ in 0..=n {
                    cur = heads[cur - 1];
                    if cur == 0 {
                        return true;
                    }
                }
                false
            });
        if valid {
            best = best.max(tree_score(scores, &heads));
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            heads[i] += 1;
            if heads[i] == i + 1 {
                heads[i] += 1;
            }
            if heads[i] <= n {
                break;
            }
            heads[i] = 0;
            i += 1;
        }
    }
}

fn decoder_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut total = 0;
    for n in 2..=6 {
        for case in 0..DECODER_MATRICES {
            let scores: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..=n).map(|_| rng.random_range(-5.0..5.0)).collect())
                .collect();
            let heads = decode_heads(&scores);
            dbap::tree::validate_heads(&heads).map_err(|e| format!("n={n} case {case}: {e}"))?;
            ensure(heads.iter().filter(|&&h| h == 0).count() == 1, || {
                format!("n={n} case {case}: {heads:?}")
            })?;
            let got = tree_score(&scores, &heads);
            let want = exhaustive_best(&scores);
            ensure((got - want).abs() < 1e-9, || {
                format!("n={n} case {case}: {got} vs {want}")
            })?;
            let (bf_heads, _) = brute_force_heads(&scores);
            ensure(bf_heads == heads, || {
                format!("n={n} case {case}: {heads:?} vs {bf_heads:?}")
            })?;
            total += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < DECODER_BUDGET, || {
        format!("{:.1}s", elapsed.as_secs_f64())
    })?;
    Ok(format!(
        "{total} matrices, n in 2..=6, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------
// roles

fn recursive_role(tree: &ArgumentTree, unit: usize) -> Role {
    let parent = tree.heads[unit - 1];
    if parent == 0 {
        return Role::Pro;
    }
    let above = recursive_role(tree, parent);
    match (tree.functions[unit - 1], above) {
        (Attack, Role::Pro) => Role::Opp,
        (Attack, Role::Opp) => Role::Pro,
        _ => above,
    }
}

fn role_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..ROLE_TREES {
        let n = rng.random_range(1..=10);
        let tree = random_tree("r", n, 0.4, &mut rng);
        let got = infer_roles(&tree).map_err(|e| e.to_string())?;
        let want: Vec<Role> = (1..=n).map(|u| recursive_role(&tree, u)).collect();
        ensure(got == want, || {
            format!("case {case}: {tree:?}: {got:?} vs {want:?}")
        })?;
    }
    let k002 = micro_k002().tree;
    ensure(k002.heads == [0, 1, 1, 1, 1], || {
        format!("micro_k002 heads {:?}", k002.heads)
    })?;
    let roles = infer_roles(&k002).map_err(|e| e.to_string())?;
    ensure(roles.iter().all(|&r| r == Role::Pro), || {
        format!("micro_k002 roles {roles:?}")
    })?;
    Ok(format!(
        "{ROLE_TREES} random trees match; micro_k002 is all pro"
    ))
}

// ---------------------------------------------------------------------------
// BAP/DBAP equivalence

fn en() -> RelationInventory {
    RelationInventory::for_language(Language::En)
}

fn synthetic_dataset(cfg: &SynthConfig, dim: usize) -> Dataset {
    let c = generate(cfg);
    Dataset::new(
        c.groups,
        &HashEncoder::new(dim, cfg.seed).unwrap(),
        c.rst,
        en(),
    )
    .unwrap()
}

fn bap_dbap_equivalence() -> Check {
    let dim = 32;
    let data = synthetic_dataset(
        &SynthConfig {
            docs: 12,
            ..SynthConfig::default()
        },
        dim,
    );
    let instances: Vec<Instance> = data
        .groups
        .iter()
        .map(|g| data.instance(&g.original, &g.tree, true).unwrap())
        .collect();
    let (train_set, dev_set) = instances.split_at(9);
    let tc = TrainConfig {
        max_epochs: 4,
        freeze_coefficients: true,
        seed: 11,
        ..TrainConfig::default()
    };
    let fit = |mode: Mode| -> Result<(Model, Vec<u8>), String> {
        let mut cfg = ModelConfig::new(mode, dim);
        cfg.seed = 11;
        let mut model = Model::new(cfg).map_err(|e| e.to_string())?;
        train(&mut model, train_set, dev_set, &tc).map_err(|e| e.to_string())?;
        let mut bytes = Vec::new();
        dbap::parser::write_model(&model, &mut bytes, None).map_err(|e| e.to_string())?;
        Ok((model, bytes))
    };
    let (bap, bap_bytes) = fit(Mode::Bap)?;
    let (_, bap_tensors) = read_checkpoint(&mut bap_bytes.as_slice()).map_err(|e| e.to_string())?;
    let mut shared_checked = 0;
    for mode in [Mode::Dbap5, Mode::Dbap6, Mode::Dbap7] {
        let (dbap, bytes) = fit(mode)?;
        let (_, tensors) = read_checkpoint(&mut bytes.as_slice()).map_err(|e| e.to_string())?;
        let theirs: BTreeMap<&str, &Tensor> =
            tensors.iter().map(|(n, t)| (n.as_str(), t)).collect();
        for (name, t) in &bap_tensors {
            let other = theirs
                .get(name.as_str())
                .ok_or_else(|| format!("{mode}: no tensor {name}"))?;
            let same = t.shape() == other.shape()
                && t.data()
                    .iter()
                    .zip(other.data())
                    .all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(same, || format!("{mode}: tensor {name} differs"))?;
            shared_checked += 1;
        }
        let fresh = Model::new(dbap.config.clone()).map_err(|e| e.to_string())?;
        for id in dbap.coefficients.ids() {
            ensure(dbap.store.get(id) == fresh.store.get(id), || {
                format!("{mode}: frozen coefficient {} moved", dbap.store.name(id))
            })?;
        }
        for inst in &instances {
            let (a, _) = bap
                .parse(inst, Default::default())
                .map_err(|e| e.to_string())?;
            let (b, _) = dbap
                .parse(inst, Default::default())
                .map_err(|e| e.to_string())?;
            ensure(a.heads == b.heads && a.functions == b.functions, || {
                format!("{mode}: parse of {} differs", inst.doc_id)
            })?;
        }
    }
    Ok(format!(
        "DBAP5/6/7 with frozen coefficients: {shared_checked} shared tensors bit-identical, {} parses identical",
        3 * instances.len()
    ))
}

// ---------------------------------------------------------------------------
// overfit

fn overfit_capacity() -> Check {
    let start = Instant::now();
    let corpus = overfit_corpus(0);
    let enc = HashEncoder::new(DEFAULT_HASH_DIM, 0).map_err(|e| e.to_string())?;
    let mut instances = Vec::new();
    for g in &corpus.groups {
        let rows = enc.embed(&g.original).map_err(|e| e.to_string())?;
        let emb = EmbeddingMatrix::new(&vec![0.0; enc.dim()], &rows).map_err(|e| e.to_string())?;
        instances.push(
            Instance::new(
                g.original.id.clone(),
                emb,
                None,
                &en(),
                Some(g.tree.clone()),
            )
            .map_err(|e| e.to_string())?,
        );
    }
    let mut model =
        Model::new(ModelConfig::new(Mode::Bap, enc.dim())).map_err(|e| e.to_string())?;
    let tc = TrainConfig {
        max_epochs: OVERFIT_EPOCHS,
        target_train_las: Some(100.0),
        ..TrainConfig::default()
    };
    let history = train(&mut model, &instances, &[], &tc).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let last = history.epochs.last().ok_or("no epochs")?;
    let las = last.train_las.ok_or("train LAS not measured")?;
    let detail = format!(
        "{} docs, train LAS {:.1} after {} epochs, {:.1}s",
        instances.len(),
        las,
        last.epoch,
        elapsed.as_secs_f64()
    );
    ensure(las >= 100.0 - 1e-9, || detail.clone())?;
    ensure(elapsed < OVERFIT_BUDGET, || {
        format!("over time budget: {detail}")
    })?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// directional benefit

fn dbap_benefit() -> Check {
    let mut bap = Vec::new();
    let mut dbap = Vec::new();
    for seed in 0..BENEFIT_SEEDS {
        let data = synthetic_dataset(
            &SynthConfig {
                docs: 60,
                rst_agreement: 0.8,
                seed,
                ..SynthConfig::default()
            },
            DEFAULT_HASH_DIM,
        );
        let ids = data.original_ids();
        let cut = ids.len() * 4 / 5;
        let split = vec![Split {
            train: ids[..cut].to_vec(),
            test: ids[cut..].to_vec(),
        }];
        for (mode, out) in [(Mode::Bap, &mut bap), (Mode::Dbap6, &mut dbap)] {
            let mut cfg = CvConfig::new(ModelConfig::new(mode, data.dim));
            cfg.seed = seed;
            let outcome = cross_validate(&data, &split, &cfg).map_err(|e| e.to_string())?;
            out.push(outcome.folds[0].scores.uas);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let gain = mean(&dbap) - mean(&bap);
    let t = paired_ttest(&dbap, &bap).map_err(|e| e.to_string())?;
    let detail = format!(
        "held-out UAS BAP {:.1}, DBAP6 {:.1}, gain {gain:.1}, t={:.2} df={} p={:.2e}",
        mean(&bap),
        mean(&dbap),
        t.t,
        t.df,
        t.p
    );
    ensure(gain >= BENEFIT_MIN_UAS_GAIN && t.p < BENEFIT_MAX_P, || {
        detail.clone()
    })?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// augmentation

fn augmentation_accounting() -> Check {
    let data = synthetic_dataset(
        &SynthConfig {
            docs: 20,
            paraphrases: true,
            ..SynthConfig::default()
        },
        16,
    );
    let originals: std::collections::BTreeSet<String> = data.original_ids().into_iter().collect();
    let splits = kfold_splits(&data.original_ids(), 4, 0).map_err(|e| e.to_string())?;
    let run = |augmented: bool| {
        let mut m = ModelConfig::new(Mode::Bap, data.dim);
        m.arc_dim = 16;
        m.tag_dim = 8;
        let mut cfg = CvConfig::new(m);
        cfg.augmented = augmented;
        cfg.train.max_epochs = 1;
        cross_validate(&data, &splits, &cfg).map_err(|e| e.to_string())
    };
    let plain = run(false)?;
    let aug = run(true)?;
    for (p, a) in plain.folds.iter().zip(&aug.folds) {
        ensure(a.train_instances == 2 * p.train_instances, || {
            format!(
                "fold {}: {} vs {}",
                p.fold, a.train_instances, p.train_instances
            )
        })?;
        ensure(a.dev_instances == p.dev_instances, || {
            format!("fold {}: dev sizes differ", p.fold)
        })?;
        for t in a.test_ids.iter().chain(&p.test_ids) {
            ensure(originals.contains(t), || {
                format!("fold {}: {t} is not an original", p.fold)
            })?;
        }
        for pred in &a.predictions {
            ensure(originals.contains(&pred.doc_id), || {
                format!("fold {}: tested {}", p.fold, pred.doc_id)
            })?;
        }
    }
    Ok(format!(
        "{} folds: training instances {} -> {}, tests originals only",
        plain.folds.len(),
        plain.folds.iter().map(|f| f.train_instances).sum::<usize>(),
        aug.folds.iter().map(|f| f.train_instances).sum::<usize>()
    ))
}

// ---------------------------------------------------------------------------
// metrics

fn tree(heads: &[usize], functions: &[ArgumentFunction]) -> ArgumentTree {
    ArgumentTree::new("m", heads.to_vec(), functions.to_vec()).unwrap()
}

fn metric_fidelity() -> Check {
    let star = tree(&[0, 1, 1, 1, 1], &[Cc, Support, Support, Support, Support]);

    // unit 5 moves to unit 2 as an attack: arcs tp 3 fp 1 fn 1; roles pro
    // tp 4 fn 1, opp fp 1; functions cc 1/1, support tp 3 fn 1, attack fp 1
    let moved = tree(&[0, 1, 1, 1, 2], &[Cc, Support, Support, Support, Attack]);
    let c = evaluate(&moved, &star, false).map_err(|e| e.to_string())?;
    let s = c.scores();
    ensure(
        c.at == Prf {
            tp: 3,
            fp: 1,
            fn_: 1,
        },
        || format!("case 1 at {:?}", c.at),
    )?;
    ensure(
        close(s.uas, 75.0) && close(s.las, 75.0) && close(s.at, 75.0) && close(s.cc, 100.0),
        || format!("case 1 {s:?}"),
    )?;
    ensure(close(s.ro, 100.0 * (8.0 / 9.0) / 2.0), || {
        format!("case 1 ro {}", s.ro)
    })?;
    ensure(close(s.fu, 100.0 * (1.0 + 6.0 / 7.0) / 3.0), || {
        format!("case 1 fu {}", s.fu)
    })?;

    // chain 1 <- 2 <- 3 predicted as 2 -> 3 -> root: no head right; cc
    // classes: cc tp 0 fp 1 fn 1, non-cc tp 1 fp 1 fn 1
    let chain = tree(&[0, 1, 2], &[Cc, Support, Attack]);
    let flipped = tree(&[2, 3, 0], &[Support, Support, Cc]);
    let s = evaluate(&flipped, &chain, false)
        .map_err(|e| e.to_string())?
        .scores();
    ensure(s.uas == 0.0 && s.las == 0.0 && s.at == 0.0, || {
        format!("case 2 {s:?}")
    })?;
    ensure(close(s.cc, 25.0), || format!("case 2 cc {}", s.cc))?;

    // right heads, one wrong function: LAS drops, UAS does not
    let relabeled = tree(&[0, 1, 1, 1, 1], &[Cc, Support, Attack, Support, Support]);
    let s = evaluate(&relabeled, &star, false)
        .map_err(|e| e.to_string())?
        .scores();
    ensure(
        s.uas == 100.0 && close(s.las, 75.0) && s.at == 100.0,
        || format!("case 3 {s:?}"),
    )?;
    // functions: cc 1, support tp 3 fn 1 (6/7), attack fp 1 (0)
    ensure(close(s.fu, 100.0 * (1.0 + 6.0 / 7.0) / 3.0), || {
        format!("case 3 fu {}", s.fu)
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..METRIC_PAIRS {
        let n = rng.random_range(1..=10);
        let gold = random_tree("g", n, 0.3, &mut rng);
        let pred = random_tree("p", n, 0.3, &mut rng);
        let own = evaluate(&gold, &gold, false)
            .map_err(|e| e.to_string())?
            .scores();
        ensure(own.as_array() == [100.0; 6], || {
            format!("self-eval case {case}: {own:?}")
        })?;
        let s = evaluate(&pred, &gold, false)
            .map_err(|e| e.to_string())?
            .scores();
        ensure(s.las <= s.uas, || {
            format!("pair {case}: LAS {} > UAS {}", s.las, s.uas)
        })?;
    }
    Ok(format!(
        "3 crafted cases exact; self-eval 100 and LAS <= UAS on {METRIC_PAIRS} random pairs"
    ))
}

// ---------------------------------------------------------------------------
// agreement

fn deps(arcs: &[(usize, Option<(&str, Nuclearity)>)]) -> RstDependencies {
    RstDependencies {
        heads: arcs.iter().map(|a| a.0).collect(),
        relations: arcs
            .iter()
            .map(|a| {
                a.1.map(|(label, dependent)| RstRelation {
                    label: label.into(),
                    direction: Direction::Forward,
                    dependent,
                })
            })
            .collect(),
    }
}

/// Reference per-dimension English means (constituent, nuclearity,
/// relation) reported for the original corpus.
const REFERENCE_EN: [f64; 3] = [0.56, 0.27, 0.35];

fn agreement_sanity() -> Check {
    use Nuclearity::{Nucleus, Satellite};
    let a = deps(&[
        (0, None),
        (1, Some(("Elab", Satellite))),
        (1, Some(("Elab", Satellite))),
        (2, Some(("Joint", Nucleus))),
    ]);
    // every dimension at chance level against `a`
    let b = deps(&[
        (0, None),
        (3, Some(("Joint", Nucleus))),
        (4, Some(("Elab", Satellite))),
        (1, Some(("Elab", Satellite))),
    ]);
    let same = pairwise_kappa(&a, &a).map_err(|e| e.to_string())?;
    ensure(
        same.constituent == 1.0 && same.nuclearity == 1.0 && same.relation == 1.0,
        || format!("{same:?}"),
    )?;
    let zero = pairwise_kappa(&a, &b).map_err(|e| e.to_string())?;
    ensure(zero.avg.abs() < FLOAT_TOL, || format!("{zero:?}"))?;
    let rows = corpus_agreement(&[
        RstVariantSet {
            group_id: "same".into(),
            language: Language::En,
            variants: vec![a.clone(), a.clone()],
        },
        RstVariantSet {
            group_id: "chance".into(),
            language: Language::En,
            variants: vec![a, b],
        },
    ])
    .map_err(|e| e.to_string())?;
    for m in [rows[0].constituent, rows[0].nuclearity, rows[0].relation] {
        ensure(close(m.mean, 0.5) && close(m.std, 0.5), || format!("{m:?}"))?;
    }
    let reference = match std::env::var("DBAP_AGREEMENT_TSV") {
        Ok(path) => compare_reference(&path),
        Err(_) => "no corpus agreement table supplied, reference comparison skipped".to_string(),
    };
    Ok(format!(
        "identical pair 1.0 on all dimensions; {{1, 0}} aggregates to 0.5 ± 0.5; {reference}"
    ))
}

/// Logs the English row of a `dbap agree` table against the reference.
fn compare_reference(path: &str) -> String {
    let Ok(text) = std::fs::read_to_string(path) else {
        return format!("cannot read {path}");
    };
    let Some(row) = text.lines().find(|l| l.starts_with("en\t")) else {
        return format!("{path} has no en row");
    };
    let cols: Vec<f64> = row
        .split('\t')
        .skip(2)
        .filter_map(|c| c.parse().ok())
        .collect();
    if cols.len() < 6 {
        return format!("{path}: malformed en row");
    }
    let ours = [cols[0], cols[2], cols[4]];
    format!(
        "en constituent/nuclearity/relation {:.2}/{:.2}/{:.2} vs reference {:.2}/{:.2}/{:.2}",
        ours[0], ours[1], ours[2], REFERENCE_EN[0], REFERENCE_EN[1], REFERENCE_EN[2]
    )
}

// ---------------------------------------------------------------------------
// end-to-end structure

fn end_to_end_structure() -> Check {
    let k002 = micro_k002();
    let edus = edu_document(&k002.document, &k002.rst).map_err(|e| e.to_string())?;
    let edu_spans: Vec<(usize, usize)> = edus.units.iter().map(|u| u.span).collect();
    ensure(edu_spans.len() == 8 && k002.document.len() == 5, || {
        format!("{} EDUs, {} ADUs", edu_spans.len(), k002.document.len())
    })?;
    let gold = attach_same_arg(
        &k002.edu_dependencies(),
        &edu_spans,
        &k002.adu_spans(),
        &k002.tree,
    )
    .map_err(|e| e.to_string())?;
    let same_arg: Vec<usize> = (0..gold.len())
        .filter(|&i| gold.functions[i] == SameArg)
        .collect();
    ensure(same_arg.len() == 3, || {
        format!("same-arg units {same_arg:?} in {gold:?}")
    })?;

    // a prediction that gets every same-arg unit wrong and one real arc wrong
    let mut pred = gold.clone();
    let real: Vec<usize> = (0..gold.len())
        .filter(|&i| gold.heads[i] != 0 && gold.functions[i] != SameArg)
        .collect();
    for &i in &same_arg {
        pred.functions[i] = Support;
    }
    pred.functions[real[0]] = Attack;
    pred.roles = None;
    let with = evaluate(&pred, &gold, true).map_err(|e| e.to_string())?;
    let without = evaluate(&pred, &gold, false).map_err(|e| e.to_string())?;
    let attached_same_arg = same_arg.iter().filter(|&&i| gold.heads[i] != 0).count();
    ensure(
        without.attached - with.attached == attached_same_arg,
        || format!("attached {} vs {}", without.attached, with.attached),
    )?;
    ensure(with.attached == real.len(), || {
        format!("{} attached, expected {}", with.attached, real.len())
    })?;
    ensure(with.labeled_correct == real.len() - 1, || {
        format!("labeled {}", with.labeled_correct)
    })?;
    ensure(!with.fu.contains_key(&SameArg.to_string()), || {
        "same-arg still tallied".into()
    })?;
    let at_total = |c: &Prf| c.tp + c.fn_;
    ensure(
        at_total(&without.at) - at_total(&with.at) == attached_same_arg,
        || format!("at {:?} vs {:?}", without.at, with.at),
    )?;
    Ok(format!(
        "8 EDUs over 5 ADUs: same-arg units {:?}; exclusion drops exactly those from {} attached units",
        same_arg.iter().map(|i| i + 1).collect::<Vec<_>>(),
        without.attached
    ))
}

// ---------------------------------------------------------------------------

const CRITERIA: [Criterion; 10] = [
    ("gradient-correctness", gradient_correctness),
    ("decoder-oracle", decoder_oracle),
    ("role-inference-oracle", role_oracle),
    ("bap-dbap-equivalence", bap_dbap_equivalence),
    ("overfit-capacity", overfit_capacity),
    ("directional-dbap-benefit", dbap_benefit),
    ("augmentation-accounting", augmentation_accounting),
    ("metric-fidelity", metric_fidelity),
    ("agreement-sanity", agreement_sanity),
    ("end-to-end-structure", end_to_end_structure),
];

fn main() {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    if std::env::args().any(|a| a == "--list") {
        for (name, _) in CRITERIA {
            println!("{name}: test");
        }
        return;
    }
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in CRITERIA {
        if filter.as_ref().is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<26} {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<26} {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ArgumentFunction, ArgumentTree, Language};
use crate::encoder::{make_root_vector, EmbeddingMatrix};
use crate::nnet::{
    bilinear_scores, dropout, Activation, FFLayer, Graph, NnetError, ParamGroup, ParamId,
    ParamStore, Tensor, Var,
};
use crate::rst::{Adjacency, RelationInventory};

use super::decode::{decode_heads, greedy_heads, Decoder};
use super::roles::infer_roles;
use super::{Instance, Mode, ParserError, SegmentationMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub mode: Mode,
    pub segmentation: SegmentationMode,
    pub language: Language,
    pub d_lm: usize,
    pub arc_dim: usize,
    pub tag_dim: usize,
    pub dropout: f64,
    /// Half-width of the uniform initializer of the feedforward weights.
    pub init_scale: f64,
    pub arc_bias_init: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(mode: Mode, d_lm: usize) -> ModelConfig {
        ModelConfig {
            mode,
            segmentation: SegmentationMode::Gold,
            language: Language::En,
            d_lm,
            arc_dim: 100,
            tag_dim: 50,
            dropout: 0.2,
            init_scale: 10.0,
            arc_bias_init: 1.0,
            seed: 0,
        }
    }
}

/// Discourse-coefficient parameters per mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientParams {
    None,
    /// Scalar weight on the unlabeled adjacency plus a scalar bias.
    Adjacency {
        theta: ParamId,
        bias: ParamId,
    },
    /// One weight per directed label plus a scalar bias, under ReLU.
    Labeled {
        theta: ParamId,
        bias: ParamId,
    },
    /// Forward and inverted labeled terms, each under ReLU.
    Directed {
        theta_fwd: ParamId,
        bias_fwd: ParamId,
        theta_inv: ParamId,
        bias_inv: ParamId,
    },
}

impl CoefficientParams {
    pub fn ids(&self) -> Vec<ParamId> {
        match *self {
            CoefficientParams::None => vec![],
            CoefficientParams::Adjacency { theta, bias }
            | CoefficientParams::Labeled { theta, bias } => {
                vec![theta, bias]
            }
            CoefficientParams::Directed {
                theta_fwd,
                bias_fwd,
                theta_inv,
                bias_inv,
            } => vec![theta_fwd, bias_fwd, theta_inv, bias_inv],
        }
    }
}

/// Parameters and structure of one parser.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub inventory: RelationInventory,
    pub store: ParamStore,
    pub arc_dep: FFLayer,
    pub arc_par: FFLayer,
    pub fun_dep: FFLayer,
    pub fun_par: FFLayer,
    pub u_arc: ParamId,
    pub b_arc: ParamId,
    pub u_label: Vec<ParamId>,
    pub coefficients: CoefficientParams,
    /// Fixed root vector, row 0 of every input matrix.
    pub root: Vec<f64>,
}

/// Scores of one document before decoding. Rows are dependents `1..=n`,
/// columns candidate heads `0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredParse {
    pub raw: Tensor,
    pub coefficients: Tensor,
    pub modulated: Tensor,
    /// `n x (n + 1) x |functions|`.
    pub labels: Tensor,
    pub functions: Vec<ArgumentFunction>,
}

struct Forward {
    arc: Var,
    fun_dep: Var,
    fun_par: Var,
    raw: Var,
    coefficients: Option<Var>,
}

const ROOT_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

impl Model {
    pub fn new(config: ModelConfig) -> Result<Model, ParserError> {
        if config.d_lm == 0 || config.arc_dim == 0 || config.tag_dim == 0 {
            return Err(ParserError::Config("dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(ParserError::Config(format!(
                "dropout {} not in [0, 1)",
                config.dropout
            )));
        }
        let inventory = RelationInventory::for_language(config.language);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let s = config.init_scale;
        let (d, a, t) = (config.d_lm, config.arc_dim, config.tag_dim);
        let arc_dep = FFLayer::init(&mut store, "arc_dep", d, a, s, Activation::Relu, &mut rng);
        let arc_par = FFLayer::init(&mut store, "arc_par", d, a, s, Activation::Relu, &mut rng);
        let fun_dep = FFLayer::init(&mut store, "fun_dep", d, t, s, Activation::Relu, &mut rng);
        let fun_par = FFLayer::init(&mut store, "fun_par", d, t, s, Activation::Relu, &mut rng);
        let u_arc = store.add("u_arc", Tensor::zeros(&[a + 1, a + 1]));
        let b_arc = store.add("b_arc", Tensor::scalar(config.arc_bias_init));
        let u_label = config
            .segmentation
            .functions()
            .iter()
            .map(|f| store.add(&format!("u_label.{f}"), Tensor::zeros(&[t + 1, t + 1])))
            .collect();
        let k = inventory.k();
        let coefficients = match config.mode {
            Mode::Bap => CoefficientParams::None,
            Mode::Dbap5 => CoefficientParams::Adjacency {
                theta: store.add("rst.theta", Tensor::scalar(0.0)),
                bias: store.add("rst.bias", Tensor::scalar(1.0)),
            },
            Mode::Dbap6 => CoefficientParams::Labeled {
                theta: store.add("rst.theta", Tensor::zeros(&[k])),
                bias: store.add("rst.bias", Tensor::scalar(1.0)),
            },
            Mode::Dbap7 => CoefficientParams::Directed {
                theta_fwd: store.add("rst.theta_fwd", Tensor::zeros(&[k])),
                bias_fwd: store.add("rst.bias_fwd", Tensor::scalar(1.0)),
                theta_inv: store.add("rst.theta_inv", Tensor::zeros(&[k])),
                bias_inv: store.add("rst.bias_inv", Tensor::scalar(0.0)),
            },
        };
        let root = make_root_vector(d, config.seed ^ ROOT_SEED_SALT);
        Ok(Model {
            config,
            inventory,
            store,
            arc_dep,
            arc_par,
            fun_dep,
            fun_par,
            u_arc,
            b_arc,
            u_label,
            coefficients,
            root,
        })
    }

    pub fn functions(&self) -> &'static [ArgumentFunction] {
        self.config.segmentation.functions()
    }

    /// Head-layer parameters (feedforward, biaffine arc and label tensors).
    pub fn head_params(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for l in [self.arc_dep, self.arc_par, self.fun_dep, self.fun_par] {
            ids.extend([l.w, l.b]);
        }
        ids.extend([self.u_arc, self.b_arc]);
        ids.extend(&self.u_label);
        ids
    }

    pub fn coefficient_params(&self) -> Vec<ParamId> {
        self.coefficients.ids()
    }

    /// Optimizer groups: encoder-adjacent (empty with frozen providers),
    /// head layers, discourse coefficients.
    pub fn param_groups(
        &self,
        lr_lm: f64,
        lr_head: f64,
        lr_coeff: f64,
        freeze_coefficients: bool,
    ) -> Vec<ParamGroup> {
        vec![
            ParamGroup {
                name: "lm".into(),
                lr: lr_lm,
                params: vec![],
                frozen: false,
            },
            ParamGroup {
                name: "head".into(),
                lr: lr_head,
                params: self.head_params(),
                frozen: false,
            },
            ParamGroup {
                name: "coefficients".into(),
                lr: lr_coeff,
                params: self.coefficient_params(),
                frozen: freeze_coefficients,
            },
        ]
    }

    /// `(n + 1) x d` input with the root vector prepended.
    pub fn input_matrix(&self, emb: &EmbeddingMatrix) -> Result<Tensor, ParserError> {
        if emb.dim != self.config.d_lm {
            return Err(ParserError::Encoder(crate::encoder::EncoderError::Format(
                format!(
                    "embedding dimension {} but model expects {}",
                    emb.dim, self.config.d_lm
                ),
            )));
        }
        let mut data = emb.data.clone();
        data[..emb.dim].copy_from_slice(&self.root);
        Ok(Tensor::new(vec![emb.rows, emb.dim], data)?)
    }

    fn forward(
        &self,
        store: &ParamStore,
        g: &mut Graph,
        emb: &EmbeddingMatrix,
        rst: Option<&Adjacency>,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Forward, ParserError> {
        let n = emb.unit_count();
        let training = rng.is_some();
        let rate = self.config.dropout;
        let v = g.input(self.input_matrix(emb)?);
        let mut layer = |g: &mut Graph, l: &FFLayer| -> Result<Var, NnetError> {
            let h = l.forward(g, store, v)?;
            match rng.as_deref_mut() {
                Some(r) => dropout(g, h, rate, training, r),
                None => Ok(h),
            }
        };
        let h_dep = layer(g, &self.arc_dep)?;
        let h_par = layer(g, &self.arc_par)?;
        let f_dep = layer(g, &self.fun_dep)?;
        let f_par = layer(g, &self.fun_par)?;

        let u = g.param(store, self.u_arc)?;
        let b = g.param(store, self.b_arc)?;
        let full = bilinear_scores(g, h_dep, h_par, u, Some(b))?;
        let raw = g.slice_rows(full, 1, n)?;
        let coefficients = self.coefficient_matrix(store, g, n, rst)?;
        let arc = match coefficients {
            Some(c) => g.mul(raw, c)?,
            None => raw,
        };
        let fun_dep = g.augment_ones(f_dep);
        let fun_par = g.augment_ones(f_par);
        Ok(Forward {
            arc,
            fun_dep,
            fun_par,
            raw,
            coefficients,
        })
    }

    /// `n x (n + 1)` coefficient matrix; column 0 is fixed to 1.
    fn coefficient_matrix(
        &self,
        store: &ParamStore,
        g: &mut Graph,
        n: usize,
        rst: Option<&Adjacency>,
    ) -> Result<Option<Var>, ParserError> {
        if self.coefficients == CoefficientParams::None {
            return Ok(None);
        }
        let rst = rst.ok_or_else(|| ParserError::MissingRst(String::new()))?;
        if rst.n != n {
            return Err(ParserError::Alignment(format!(
                "{n} units but RST adjacency over {}",
                rst.n
            )));
        }
        let cols = n + 1;
        let shape = [n, cols];
        let cells = |f: &dyn Fn(usize, usize) -> Option<usize>| -> Vec<Option<usize>> {
            (0..n * cols)
                .map(|c| {
                    let (i, j) = (c / cols, c % cols);
                    if j == 0 {
                        None
                    } else {
                        f(i, j - 1)
                    }
                })
                .collect()
        };
        let root_fixed: Vec<Option<f64>> = (0..n * cols)
            .map(|c| (c % cols == 0).then_some(1.0))
            .collect();
        let labeled = |g: &mut Graph,
                       theta: ParamId,
                       bias: ParamId,
                       idx: Vec<Option<usize>>|
         -> Result<Var, NnetError> {
            let t = g.param(store, theta)?;
            let b = g.param(store, bias)?;
            let lin = g.gather(t, idx, &shape)?;
            let z = g.add_scalar(lin, b)?;
            Ok(g.relu(z))
        };
        let c = match self.coefficients {
            CoefficientParams::None => unreachable!("handled above"),
            CoefficientParams::Adjacency { theta, bias } => {
                let idx = cells(&|i, j| (rst.adj[i][j] != 0.0).then_some(0));
                let t = g.param(store, theta)?;
                let b = g.param(store, bias)?;
                let lin = g.gather(t, idx, &shape)?;
                g.add_scalar(lin, b)?
            }
            CoefficientParams::Labeled { theta, bias } => {
                labeled(g, theta, bias, cells(&|i, j| rst.forward_label(i, j)))?
            }
            CoefficientParams::Directed {
                theta_fwd,
                bias_fwd,
                theta_inv,
                bias_inv,
            } => {
                let fwd = labeled(
                    g,
                    theta_fwd,
                    bias_fwd,
                    cells(&|i, j| rst.forward_label(i, j)),
                )?;
                let inv = labeled(
                    g,
                    theta_inv,
                    bias_inv,
                    cells(&|i, j| rst.inverted_label(i, j)),
                )?;
                g.add(fwd, inv)?
            }
        };
        Ok(Some(g.fix(c, root_fixed)?))
    }

    /// Label scores for `(dependent row, head row)` pairs, one column per
    /// function.
    fn label_scores(
        &self,
        store: &ParamStore,
        g: &mut Graph,
        fwd: &Forward,
        pairs: Vec<(usize, usize)>,
    ) -> Result<Var, ParserError> {
        let mut cols = Vec::with_capacity(self.u_label.len());
        for &u in &self.u_label {
            let uv = g.param(store, u)?;
            let left = g.matmul(fwd.fun_dep, uv)?;
            cols.push(g.pair_dot(left, fwd.fun_par, pairs.clone())?);
        }
        Ok(g.stack_cols(&cols)?)
    }

    fn check_inputs(&self, inst: &Instance) -> Result<(), ParserError> {
        if self.config.mode.uses_rst() && inst.rst.is_none() {
            return Err(ParserError::MissingRst(inst.doc_id.clone()));
        }
        Ok(())
    }

    /// Summed arc and label cross-entropy of one gold instance. Dropout is
    /// applied when `rng` is given.
    pub fn loss_graph(
        &self,
        inst: &Instance,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Graph, Var), ParserError> {
        self.loss_graph_with(&self.store, inst, rng)
    }

    /// [`Model::loss_graph`] evaluated with the parameter values of `store`,
    /// which must share this model's layout.
    pub fn loss_graph_with(
        &self,
        store: &ParamStore,
        inst: &Instance,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Graph, Var), ParserError> {
        self.check_inputs(inst)?;
        let gold = inst
            .gold
            .as_ref()
            .ok_or_else(|| ParserError::Structure(format!("{}: no gold tree", inst.doc_id)))?;
        let n = inst.len();
        let mut g = Graph::new();
        let fwd = self.forward(store, &mut g, &inst.embeddings, inst.rst.as_ref(), rng)?;
        let cols = n + 1;
        let mask: Vec<bool> = (0..n * cols).map(|c| c % cols != c / cols + 1).collect();
        let arc_loss = g.softmax_xent(fwd.arc, gold.heads.clone(), Some(mask))?;
        let pairs: Vec<(usize, usize)> = gold
            .heads
            .iter()
            .enumerate()
            .map(|(i, &h)| (i + 1, h))
            .collect();
        let labels = self.label_scores(store, &mut g, &fwd, pairs)?;
        let functions = self.functions();
        let gold_labels = gold
            .functions
            .iter()
            .map(|f| {
                functions.iter().position(|x| x == f).ok_or_else(|| {
                    ParserError::Structure(format!(
                        "{}: function {f} not in inventory",
                        inst.doc_id
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let label_loss = g.softmax_xent(labels, gold_labels, None)?;
        let total = g.add(arc_loss, label_loss)?;
        Ok((g, total))
    }

    /// Inference-mode scores (no dropout).
    pub fn score(&self, inst: &Instance) -> Result<ScoredParse, ParserError> {
        self.check_inputs(inst)?;
        let n = inst.len();
        let mut g = Graph::new();
        let fwd = self.forward(
            &self.store,
            &mut g,
            &inst.embeddings,
            inst.rst.as_ref(),
            None,
        )?;
        let pairs: Vec<(usize, usize)> =
            (1..=n).flat_map(|i| (0..=n).map(move |j| (i, j))).collect();
        let labels = self.label_scores(&self.store, &mut g, &fwd, pairs)?;
        let f = self.functions().len();
        let coefficients = match fwd.coefficients {
            Some(c) => g.value(c).clone(),
            None => Tensor::filled(&[n, n + 1], 1.0),
        };
        if matches!(self.config.mode, Mode::Dbap6 | Mode::Dbap7) {
            if let Some(&neg) = coefficients.data().iter().find(|&&c| c < 0.0) {
                return Err(ParserError::NegativeCoefficient(neg));
            }
        }
        let modulated = g.value(fwd.arc).clone();
        if !modulated.is_finite() {
            return Err(ParserError::Nnet(NnetError::NonFinite(format!(
                "arc scores of {}",
                inst.doc_id
            ))));
        }
        Ok(ScoredParse {
            raw: g.value(fwd.raw).clone(),
            coefficients,
            modulated,
            labels: Tensor::new(vec![n, n + 1, f], g.value(labels).data().to_vec())?,
            functions: self.functions().to_vec(),
        })
    }

    /// Scores, decodes, labels and assigns roles.
    pub fn parse(
        &self,
        inst: &Instance,
        decoder: Decoder,
    ) -> Result<(ArgumentTree, ScoredParse), ParserError> {
        let scored = self.score(inst)?;
        let tree = decode_scored(&inst.doc_id, &scored, decoder)?;
        Ok((tree, scored))
    }
}

/// Tree decoding plus label argmax. The root arc is always CC; other arcs
/// take the best non-CC function, ties to the lowest index.
pub fn decode_scored(
    doc_id: &str,
    scored: &ScoredParse,
    decoder: Decoder,
) -> Result<ArgumentTree, ParserError> {
    let matrix = scored.modulated.to_rows();
    let heads = match decoder {
        Decoder::Mst => decode_heads(&matrix),
        Decoder::Greedy => greedy_heads(&matrix),
    };
    let functions = heads
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            if h == 0 {
                return ArgumentFunction::Cc;
            }
            let mut best: Option<(usize, f64)> = None;
            for (fi, f) in scored.functions.iter().enumerate() {
                if *f == ArgumentFunction::Cc {
                    continue;
                }
                let s = scored.labels.at3(i, h, fi);
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((fi, s));
                }
            }
            best.map_or(ArgumentFunction::Support, |(fi, _)| scored.functions[fi])
        })
        .collect();
    let mut tree = ArgumentTree::new_unchecked(doc_id, heads, functions);
    if tree.validate().is_ok() {
        tree.roles = Some(infer_roles(&tree)?);
    }
    Ok(tree)
}

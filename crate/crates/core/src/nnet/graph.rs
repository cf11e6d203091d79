//! Tape-based reverse-mode differentiation over the handful of ops the
//! parser head needs. Every op works on matrix views (first axis = rows).

use std::collections::BTreeMap;

use super::{NnetError, ParamId, ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    AddRowBias(Var, Var),
    AddScalar(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Vec<f64>),
    Relu(Var),
    AugmentOnes(Var),
    SliceRows(Var, usize),
    Gather(Var, Vec<Option<usize>>),
    Fix(Var, Vec<Option<f64>>),
    PairDot(Var, Var, Vec<(usize, usize)>),
    StackCols(Vec<Var>),
    SoftmaxXent {
        logits: Var,
        gold: Vec<usize>,
        probs: Vec<f64>,
    },
    Sum(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients of a scalar with respect to parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    map: BTreeMap<ParamId, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.map.get(&id)
    }

    /// Sets the gradient of one parameter.
    pub fn insert(&mut self, id: ParamId, grad: Tensor) {
        self.map.insert(id, grad);
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.map.iter().map(|(k, v)| (*k, v))
    }

    /// Adds `other` into `self`.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (id, g) in &other.map {
            match self.map.get_mut(id) {
                Some(acc) => acc
                    .data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .for_each(|(a, b)| *a += b),
                None => {
                    self.map.insert(*id, g.clone());
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.map.values().all(Tensor::is_finite)
    }
}

/// A recorded computation. Parameter values are copied in at recording time;
/// the graph remembers the store version and refuses to differentiate after
/// the store has changed.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    stamp: Option<(u64, u64)>,
}

fn shape_err(op: &str, a: &[usize], b: &[usize]) -> NnetError {
    NnetError::Shape(format!("{op}: {a:?} vs {b:?}"))
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sign pattern (`x > 0`) of every ReLU input, in recording order.
    /// Two evaluations with equal patterns lie on the same linear piece.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(a) => Some(a),
                _ => None,
            })
            .flat_map(|a| self.value(a).data().iter().map(|&x| x > 0.0))
            .collect()
    }

    /// Constant input.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var, NnetError> {
        let stamp = store.stamp();
        match self.stamp {
            None => self.stamp = Some(stamp),
            Some(s) if s != stamp => return Err(NnetError::Stale),
            Some(_) => {}
        }
        Ok(self.push(store.get(id).clone(), Op::Param(id)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnetError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        if tb.rows() != k {
            return Err(shape_err("matmul", ta.shape(), tb.shape()));
        }
        let mut out = vec![0.0; m * n];
        let (da, db) = (ta.data(), tb.data());
        for i in 0..m {
            for p in 0..k {
                let x = da[i * k + p];
                if x == 0.0 {
                    continue;
                }
                let row = &db[p * n..(p + 1) * n];
                for (o, &y) in out[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *o += x * y;
                }
            }
        }
        Ok(self.push(Tensor::raw(vec![m, n], out), Op::MatMul(a, b)))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, NnetError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k, n) = (ta.rows(), ta.cols(), tb.rows());
        if tb.cols() != k {
            return Err(shape_err("matmul_nt", ta.shape(), tb.shape()));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = dot(ta.row(i), tb.row(j));
            }
        }
        Ok(self.push(Tensor::raw(vec![m, n], out), Op::MatMulNT(a, b)))
    }

    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var, NnetError> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.numel() != ta.cols() {
            return Err(shape_err("add_row_bias", ta.shape(), tb.shape()));
        }
        let c = ta.cols();
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, x)| x + tb.data()[i % c])
            .collect();
        Ok(self.push(
            Tensor::raw(ta.shape().to_vec(), data),
            Op::AddRowBias(a, bias),
        ))
    }

    /// Adds a one-element tensor to every entry.
    pub fn add_scalar(&mut self, a: Var, s: Var) -> Result<Var, NnetError> {
        let (ta, ts) = (self.value(a), self.value(s));
        if ts.numel() != 1 {
            return Err(shape_err("add_scalar", ta.shape(), ts.shape()));
        }
        let s0 = ts.item();
        let data = ta.data().iter().map(|x| x + s0).collect();
        Ok(self.push(Tensor::raw(ta.shape().to_vec(), data), Op::AddScalar(a, s)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnetError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("add", ta.shape(), tb.shape()));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(Tensor::raw(ta.shape().to_vec(), data), Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnetError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("mul", ta.shape(), tb.shape()));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(Tensor::raw(ta.shape().to_vec(), data), Op::Mul(a, b)))
    }

    /// Elementwise product with a constant (e.g. a dropout mask).
    pub fn mul_const(&mut self, a: Var, c: Vec<f64>) -> Result<Var, NnetError> {
        let ta = self.value(a);
        if c.len() != ta.numel() {
            return Err(shape_err("mul_const", ta.shape(), &[c.len()]));
        }
        let data = ta.data().iter().zip(&c).map(|(x, y)| x * y).collect();
        Ok(self.push(Tensor::raw(ta.shape().to_vec(), data), Op::MulConst(a, c)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let data = ta
            .data()
            .iter()
            .map(|&x| if x > 0.0 { x } else { 0.0 })
            .collect();
        self.push(Tensor::raw(ta.shape().to_vec(), data), Op::Relu(a))
    }

    /// Appends a constant-1 column.
    pub fn augment_ones(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (m, c) = (ta.rows(), ta.cols());
        let mut data = Vec::with_capacity(m * (c + 1));
        for i in 0..m {
            data.extend_from_slice(ta.row(i));
            data.push(1.0);
        }
        self.push(Tensor::raw(vec![m, c + 1], data), Op::AugmentOnes(a))
    }

    /// Rows `start..start + count`.
    pub fn slice_rows(&mut self, a: Var, start: usize, count: usize) -> Result<Var, NnetError> {
        let ta = self.value(a);
        if start + count > ta.rows() {
            return Err(shape_err("slice_rows", ta.shape(), &[start, count]));
        }
        let c = ta.cols();
        let data = ta.data()[start * c..(start + count) * c].to_vec();
        Ok(self.push(Tensor::raw(vec![count, c], data), Op::SliceRows(a, start)))
    }

    /// `out[i] = src[idx[i]]`, or 0 where `idx[i]` is `None`.
    pub fn gather(
        &mut self,
        src: Var,
        idx: Vec<Option<usize>>,
        shape: &[usize],
    ) -> Result<Var, NnetError> {
        let ts = self.value(src);
        if shape.iter().product::<usize>() != idx.len() {
            return Err(shape_err("gather", shape, &[idx.len()]));
        }
        if let Some(bad) = idx.iter().flatten().find(|&&i| i >= ts.numel()) {
            return Err(NnetError::Shape(format!(
                "gather index {bad} out of {}",
                ts.numel()
            )));
        }
        let data = idx
            .iter()
            .map(|i| i.map_or(0.0, |i| ts.data()[i]))
            .collect();
        Ok(self.push(Tensor::raw(shape.to_vec(), data), Op::Gather(src, idx)))
    }

    /// Replaces entries with constants where `fixed[i]` is `Some`.
    pub fn fix(&mut self, a: Var, fixed: Vec<Option<f64>>) -> Result<Var, NnetError> {
        let ta = self.value(a);
        if fixed.len() != ta.numel() {
            return Err(shape_err("fix", ta.shape(), &[fixed.len()]));
        }
        let data = ta
            .data()
            .iter()
            .zip(&fixed)
            .map(|(x, f)| f.unwrap_or(*x))
            .collect();
        Ok(self.push(Tensor::raw(ta.shape().to_vec(), data), Op::Fix(a, fixed)))
    }

    /// `out[p] = a.row(i_p) · b.row(j_p)`.
    pub fn pair_dot(
        &mut self,
        a: Var,
        b: Var,
        pairs: Vec<(usize, usize)>,
    ) -> Result<Var, NnetError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.cols() || pairs.iter().any(|&(i, j)| i >= ta.rows() || j >= tb.rows()) {
            return Err(shape_err("pair_dot", ta.shape(), tb.shape()));
        }
        let data = pairs
            .iter()
            .map(|&(i, j)| dot(ta.row(i), tb.row(j)))
            .collect();
        Ok(self.push(
            Tensor::raw(vec![pairs.len()], data),
            Op::PairDot(a, b, pairs),
        ))
    }

    /// Stacks equal-length vectors as the columns of a matrix.
    pub fn stack_cols(&mut self, cols: &[Var]) -> Result<Var, NnetError> {
        let m = self.value(cols[0]).numel();
        if cols.iter().any(|&c| self.value(c).numel() != m) {
            return Err(NnetError::Shape("stack_cols: unequal lengths".into()));
        }
        let k = cols.len();
        let mut data = vec![0.0; m * k];
        for (j, &c) in cols.iter().enumerate() {
            for (i, &x) in self.value(c).data().iter().enumerate() {
                data[i * k + j] = x;
            }
        }
        Ok(self.push(Tensor::raw(vec![m, k], data), Op::StackCols(cols.to_vec())))
    }

    /// Sum over rows of `-log softmax(row)[gold]`, restricted to the columns
    /// allowed by `mask` (same shape as `logits`).
    pub fn softmax_xent(
        &mut self,
        logits: Var,
        gold: Vec<usize>,
        mask: Option<Vec<bool>>,
    ) -> Result<Var, NnetError> {
        let t = self.value(logits);
        let (m, c) = (t.rows(), t.cols());
        if gold.len() != m || mask.as_ref().is_some_and(|mk| mk.len() != m * c) {
            return Err(shape_err("softmax_xent", t.shape(), &[gold.len()]));
        }
        let allowed = |i: usize, j: usize| mask.as_ref().is_none_or(|mk| mk[i * c + j]);
        let mut probs = vec![0.0; m * c];
        let mut loss = 0.0;
        for (i, &g) in gold.iter().enumerate() {
            if g >= c || !allowed(i, g) {
                return Err(NnetError::Shape(format!(
                    "gold column {g} of row {i} is not available"
                )));
            }
            let row = t.row(i);
            let max = (0..c)
                .filter(|&j| allowed(i, j))
                .map(|j| row[j])
                .fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = (0..c)
                .filter(|&j| allowed(i, j))
                .map(|j| (row[j] - max).exp())
                .sum();
            for j in (0..c).filter(|&j| allowed(i, j)) {
                probs[i * c + j] = (row[j] - max).exp() / z;
            }
            loss += z.ln() + max - row[g];
        }
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxXent {
                logits,
                gold,
                probs,
            },
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Reverse pass from a one-element node.
    pub fn backward(&self, loss: Var, store: &ParamStore) -> Result<Gradients, NnetError> {
        if let Some(stamp) = self.stamp {
            if stamp != store.stamp() {
                return Err(NnetError::Stale);
            }
        }
        if self.value(loss).numel() != 1 {
            return Err(NnetError::Shape("backward needs a scalar".into()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::default();
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let mut send = |v: Var, delta: Vec<f64>| match &mut grads[v.0] {
                Some(acc) => acc.iter_mut().zip(&delta).for_each(|(a, d)| *a += d),
                slot @ None => *slot = Some(delta),
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => match out.map.get_mut(id) {
                    Some(acc) => acc.data_mut().iter_mut().zip(&g).for_each(|(a, d)| *a += d),
                    None => {
                        out.map
                            .insert(*id, Tensor::raw(node.value.shape().to_vec(), g));
                    }
                },
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                    let mut ga = vec![0.0; m * k];
                    let mut gb = vec![0.0; k * n];
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            ga[i * k + p] = dot(grow, tb.row(p));
                            let x = ta.data()[i * k + p];
                            if x != 0.0 {
                                for (o, &d) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                    *o += x * d;
                                }
                            }
                        }
                    }
                    send(*a, ga);
                    send(*b, gb);
                }
                Op::MatMulNT(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.rows());
                    let mut ga = vec![0.0; m * k];
                    let mut gb = vec![0.0; n * k];
                    for i in 0..m {
                        for j in 0..n {
                            let d = g[i * n + j];
                            if d == 0.0 {
                                continue;
                            }
                            for p in 0..k {
                                ga[i * k + p] += d * tb.data()[j * k + p];
                                gb[j * k + p] += d * ta.data()[i * k + p];
                            }
                        }
                    }
                    send(*a, ga);
                    send(*b, gb);
                }
                Op::AddRowBias(a, b) => {
                    let c = self.value(*b).numel();
                    let mut gb = vec![0.0; c];
                    for (i, d) in g.iter().enumerate() {
                        gb[i % c] += d;
                    }
                    send(*b, gb);
                    send(*a, g);
                }
                Op::AddScalar(a, s) => {
                    send(*s, vec![g.iter().sum()]);
                    send(*a, g);
                }
                Op::Add(a, b) => {
                    send(*b, g.clone());
                    send(*a, g);
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    send(*a, g.iter().zip(tb.data()).map(|(d, y)| d * y).collect());
                    send(*b, g.iter().zip(ta.data()).map(|(d, x)| d * x).collect());
                }
                Op::MulConst(a, c) => send(*a, g.iter().zip(c).map(|(d, y)| d * y).collect()),
                Op::Relu(a) => {
                    let ta = self.value(*a);
                    send(
                        *a,
                        g.iter()
                            .zip(ta.data())
                            .map(|(d, &x)| if x > 0.0 { *d } else { 0.0 })
                            .collect(),
                    );
                }
                Op::AugmentOnes(a) => {
                    let c = self.value(*a).cols();
                    let ga = g
                        .chunks_exact(c + 1)
                        .flat_map(|row| row[..c].iter().copied())
                        .collect();
                    send(*a, ga);
                }
                Op::SliceRows(a, start) => {
                    let ta = self.value(*a);
                    let c = ta.cols();
                    let mut ga = vec![0.0; ta.numel()];
                    ga[start * c..start * c + g.len()].copy_from_slice(&g);
                    send(*a, ga);
                }
                Op::Gather(src, idx) => {
                    let mut gs = vec![0.0; self.value(*src).numel()];
                    for (d, i) in g.iter().zip(idx) {
                        if let Some(i) = i {
                            gs[*i] += d;
                        }
                    }
                    send(*src, gs);
                }
                Op::Fix(a, fixed) => send(
                    *a,
                    g.iter()
                        .zip(fixed)
                        .map(|(d, f)| if f.is_some() { 0.0 } else { *d })
                        .collect(),
                ),
                Op::PairDot(a, b, pairs) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let c = ta.cols();
                    let mut ga = vec![0.0; ta.numel()];
                    let mut gb = vec![0.0; tb.numel()];
                    for (&d, &(i, j)) in g.iter().zip(pairs) {
                        for p in 0..c {
                            ga[i * c + p] += d * tb.data()[j * c + p];
                            gb[j * c + p] += d * ta.data()[i * c + p];
                        }
                    }
                    send(*a, ga);
                    send(*b, gb);
                }
                Op::StackCols(cols) => {
                    let k = cols.len();
                    for (j, &c) in cols.iter().enumerate() {
                        send(c, g.iter().skip(j).step_by(k).copied().collect());
                    }
                }
                Op::SoftmaxXent {
                    logits,
                    gold,
                    probs,
                    ..
                } => {
                    let c = self.value(*logits).cols();
                    let mut gl: Vec<f64> = probs.iter().map(|p| p * g[0]).collect();
                    for (i, &t) in gold.iter().enumerate() {
                        gl[i * c + t] -= g[0];
                    }
                    send(*logits, gl);
                }
                Op::Sum(a) => {
                    let n = self.value(*a).numel();
                    send(*a, vec![g[0]; n]);
                }
            }
        }
        Ok(out)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// d/dW sum(XW) = Xᵀ 1, i.e. entry (p, j) = column sum p of X.
    /// X = [[1,2],[3,4]] -> column sums (4, 6) -> dW = [[4,4],[6,6]].
    #[test]
    fn sum_of_product_gradient_by_hand() {
        let mut store = ParamStore::new();
        let w = store.add("w", t(&[&[0.5, -1.0], &[2.0, 0.25]]));
        let mut g = Graph::new();
        let x = g.input(t(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let wv = g.param(&store, w).unwrap();
        let y = g.matmul(x, wv).unwrap();
        let s = g.sum(y);
        let grads = g.backward(s, &store).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[4.0, 4.0, 6.0, 6.0]);
    }

    #[test]
    fn relu_gradient_is_zero_for_negative_input() {
        let mut store = ParamStore::new();
        let p = store.add("p", Tensor::vector(vec![-2.0, 3.0]));
        let mut g = Graph::new();
        let v = g.param(&store, p).unwrap();
        let r = g.relu(v);
        let s = g.sum(r);
        assert_eq!(g.value(r).data(), &[0.0, 3.0]);
        assert_eq!(
            g.backward(s, &store).unwrap().get(p).unwrap().data(),
            &[0.0, 1.0]
        );
    }

    #[test]
    fn mutated_store_makes_graph_stale() {
        let mut store = ParamStore::new();
        let p = store.add("p", Tensor::scalar(1.0));
        let mut g = Graph::new();
        let v = g.param(&store, p).unwrap();
        let s = g.sum(v);
        store.get_mut(p).data_mut()[0] = 2.0;
        assert!(matches!(g.backward(s, &store), Err(NnetError::Stale)));
        assert!(matches!(g.param(&store, p), Err(NnetError::Stale)));
        let other = store.clone();
        assert!(matches!(g.backward(s, &other), Err(NnetError::Stale)));
    }

    #[test]
    fn uniform_softmax_loss_is_log_classes() {
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(&[1, 4]));
        let l = g.softmax_xent(x, vec![2], None).unwrap();
        assert!((g.value(l).item() - 4f64.ln()).abs() < 1e-12);
        let mut g = Graph::new();
        let x = g.input(t(&[&[0.0, 800.0, 0.0]]));
        let l = g.softmax_xent(x, vec![1], None).unwrap();
        assert!(g.value(l).item() < 1e-300);
    }

    #[test]
    fn masked_softmax_ignores_masked_columns() {
        let mut g = Graph::new();
        let x = g.input(t(&[&[0.0, 1e6, 0.0]]));
        let l = g
            .softmax_xent(x, vec![0], Some(vec![true, false, true]))
            .unwrap();
        assert!((g.value(l).item() - 2f64.ln()).abs() < 1e-12);
        assert!(g
            .softmax_xent(x, vec![1], Some(vec![true, false, true]))
            .is_err());
    }

    #[test]
    fn shape_errors() {
        let mut g = Graph::new();
        let a = g.input(Tensor::zeros(&[2, 3]));
        let b = g.input(Tensor::zeros(&[2, 3]));
        assert!(g.matmul(a, b).is_err());
        assert!(g.matmul_nt(a, b).is_ok());
        assert!(g.add_scalar(a, b).is_err());
    }
}

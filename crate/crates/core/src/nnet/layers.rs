use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, NnetError, ParamId, ParamStore, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

/// Dense layer `act(XW + b)` with parameters held in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FFLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub activation: Activation,
}

impl FFLayer {
    /// Registers `name.w` (d_in × d_out, uniform in ±`scale`) and a zero
    /// `name.b`.
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        scale: f64,
        activation: Activation,
        rng: &mut R,
    ) -> FFLayer {
        let w = store.add(
            &format!("{name}.w"),
            Tensor::uniform(&[d_in, d_out], -scale, scale, rng),
        );
        let b = store.add(&format!("{name}.b"), Tensor::zeros(&[d_out]));
        FFLayer { w, b, activation }
    }

    pub fn from_values(
        store: &mut ParamStore,
        name: &str,
        w: Tensor,
        b: Tensor,
        activation: Activation,
    ) -> Result<FFLayer, NnetError> {
        if w.shape().len() != 2 || b.numel() != w.shape()[1] {
            return Err(NnetError::Shape(format!(
                "layer {name}: W {:?}, b {:?}",
                w.shape(),
                b.shape()
            )));
        }
        Ok(FFLayer {
            w: store.add(&format!("{name}.w"), w),
            b: store.add(&format!("{name}.b"), b),
            activation,
        })
    }

    pub fn d_in(&self, store: &ParamStore) -> usize {
        store.get(self.w).shape()[0]
    }

    pub fn d_out(&self, store: &ParamStore) -> usize {
        store.get(self.w).shape()[1]
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var, NnetError> {
        let w = g.param(store, self.w)?;
        let b = g.param(store, self.b)?;
        let xw = g.matmul(x, w)?;
        let z = g.add_row_bias(xw, b)?;
        Ok(match self.activation {
            Activation::Identity => z,
            Activation::Relu => g.relu(z),
        })
    }
}

/// Forward pass of a layer on a constant input.
pub fn ff_forward(layer: &FFLayer, store: &ParamStore, x: &Tensor) -> Result<Tensor, NnetError> {
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let y = layer.forward(&mut g, store, xv)?;
    Ok(g.value(y).clone())
}

/// `S[i][j] = [hd_i, 1] · U · [hp_j, 1]ᵀ + b` for a one-element `b`.
pub fn bilinear_scores(
    g: &mut Graph,
    hd: Var,
    hp: Var,
    u: Var,
    b: Option<Var>,
) -> Result<Var, NnetError> {
    let d = g.value(hd).cols();
    if g.value(hp).cols() != d || g.value(u).shape() != [d + 1, d + 1] {
        return Err(NnetError::Shape(format!(
            "bilinear: hd {:?}, hp {:?}, U {:?}",
            g.value(hd).shape(),
            g.value(hp).shape(),
            g.value(u).shape()
        )));
    }
    let hd1 = g.augment_ones(hd);
    let hp1 = g.augment_ones(hp);
    let left = g.matmul(hd1, u)?;
    let s = g.matmul_nt(left, hp1)?;
    match b {
        Some(b) => g.add_scalar(s, b),
        None => Ok(s),
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, else
/// `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng>(len: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        })
        .collect()
}

/// Applies inverted dropout when `training` and `rate > 0`; identity
/// otherwise (no randomness is consumed in that case).
pub fn dropout<R: Rng>(
    g: &mut Graph,
    x: Var,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var, NnetError> {
    if !training || rate <= 0.0 {
        return Ok(x);
    }
    if rate >= 1.0 {
        return Err(NnetError::Shape(format!(
            "dropout rate {rate} must be below 1"
        )));
    }
    let mask = dropout_mask(g.value(x).numel(), rate, rng);
    g.mul_const(x, mask)
}

//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, NnetError, ParamId, ParamStore, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub h: f64,
    /// Elements probed per parameter tensor; all elements when smaller.
    pub max_elements: usize,
    /// Random directions probed over all parameters jointly.
    pub directions: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            h: 1e-5,
            max_elements: 16,
            directions: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest per-tensor relative error `|a - n| / max(|a|, |n|)` over the
    /// probed elements (and per direction for directional probes).
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
    /// Probes skipped because the perturbation crossed a ReLU kink.
    pub skipped_kinks: usize,
}

const NORM_FLOOR: f64 = 1e-9;

fn rel_error(a: &[f64], n: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(n)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nn = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nn);
    if scale < NORM_FLOOR {
        diff
    } else {
        diff / scale
    }
}

/// Compares `backward` against central differences for `params`.
///
/// `loss` must build a fresh graph from the store and return its scalar
/// output; it is called repeatedly with perturbed parameters, which are
/// restored exactly afterwards.
pub fn check_gradients<F>(
    store: &mut ParamStore,
    params: &[ParamId],
    loss: F,
    opts: GradCheckOptions,
) -> Result<GradCheckReport, NnetError>
where
    F: Fn(&ParamStore) -> Result<(Graph, Var), NnetError>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (g0, l0) = loss(store)?;
    let grads = g0.backward(l0, store)?;
    let pattern0 = g0.relu_pattern();
    drop(g0);

    let eval = |store: &mut ParamStore,
                id: ParamId,
                i: usize,
                delta: f64|
     -> Result<(f64, Vec<bool>), NnetError> {
        let old = store.get(id).data()[i];
        store.get_mut(id).data_mut()[i] = old + delta;
        let (g, l) = loss(store)?;
        store.get_mut(id).data_mut()[i] = old;
        Ok((g.value(l).item(), g.relu_pattern()))
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
        skipped_kinks: 0,
    };
    let record = |report: &mut GradCheckReport, name: String, err: f64| {
        if err > report.max_rel_error || report.worst.is_empty() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = name;
        }
    };

    for &id in params {
        let numel = store.get(id).numel();
        let analytic_full = grads
            .get(id)
            .map(|t| t.data().to_vec())
            .unwrap_or_else(|| vec![0.0; numel]);
        let indices: Vec<usize> = if numel <= opts.max_elements {
            (0..numel).collect()
        } else {
            sample(&mut rng, numel, opts.max_elements).into_vec()
        };
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for i in indices {
            let (fp, pp) = eval(store, id, i, opts.h)?;
            let (fm, pm) = eval(store, id, i, -opts.h)?;
            if pp != pattern0 || pm != pattern0 {
                report.skipped_kinks += 1;
                continue;
            }
            analytic.push(analytic_full[i]);
            numeric.push((fp - fm) / (2.0 * opts.h));
            report.checked += 1;
        }
        let err = rel_error(&analytic, &numeric);
        record(&mut report, store.name(id).to_string(), err);
    }

    for d in 0..opts.directions {
        let dirs: Vec<Vec<f64>> = params
            .iter()
            .map(|&id| {
                (0..store.get(id).numel())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        let analytic: f64 = params
            .iter()
            .zip(&dirs)
            .map(|(&id, u)| {
                grads
                    .get(id)
                    .map_or(0.0, |g| g.data().iter().zip(u).map(|(a, b)| a * b).sum())
            })
            .sum();
        let saved: Vec<_> = params.iter().map(|&id| store.get(id).clone()).collect();
        let shifted = |store: &mut ParamStore, sign: f64| -> Result<(f64, Vec<bool>), NnetError> {
            for ((&id, u), base) in params.iter().zip(&dirs).zip(&saved) {
                let t = store.get_mut(id);
                for ((x, &b), &du) in t.data_mut().iter_mut().zip(base.data()).zip(u) {
                    *x = b + sign * opts.h * du;
                }
            }
            let (g, l) = loss(store)?;
            Ok((g.value(l).item(), g.relu_pattern()))
        };
        let (fp, pp) = shifted(store, 1.0)?;
        let (fm, pm) = shifted(store, -1.0)?;
        for (&id, base) in params.iter().zip(saved) {
            *store.get_mut(id) = base;
        }
        if pp != pattern0 || pm != pattern0 {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * opts.h);
        report.checked += 1;
        record(
            &mut report,
            format!("direction {d}"),
            rel_error(&[analytic], &[numeric]),
        );
    }
    Ok(report)
}

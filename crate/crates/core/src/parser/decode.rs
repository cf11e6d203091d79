//! Maximum spanning arborescence decoding with exactly one root child.
//!
//! Score matrices have one row per dependent `1..=n` and one column per
//! candidate head `0..=n` (column 0 is the fictional root).

use serde::{Deserialize, Serialize};

use crate::tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    /// Chu-Liu-Edmonds with the single-root constraint.
    #[default]
    Mst,
    /// Independent per-dependent argmax; may produce invalid trees.
    Greedy,
}

pub fn tree_score(scores: &[Vec<f64>], heads: &[usize]) -> f64 {
    heads.iter().enumerate().map(|(i, &h)| scores[i][h]).sum()
}

/// Per-dependent best head (self-attachment excluded), ties to the lowest
/// index.
pub fn greedy_heads(scores: &[Vec<f64>]) -> Vec<usize> {
    scores
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut best = 0;
            for (j, &s) in row.iter().enumerate().skip(1) {
                if j != i + 1 && s > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn find_cycle(parent: &[usize]) -> Option<Vec<usize>> {
    let m = parent.len();
    let mut color = vec![0u8; m];
    color[0] = 2;
    for start in 1..m {
        if color[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        while color[v] == 0 {
            color[v] = 1;
            path.push(v);
            v = parent[v];
        }
        if color[v] == 1 {
            let pos = path.iter().position(|&x| x == v).expect("on path");
            return Some(path[pos..].to_vec());
        }
        for u in path {
            color[u] = 2;
        }
    }
    None
}

/// Chu-Liu-Edmonds on `w[h][d]` over nodes `0..m` rooted at 0. Returns the
/// parent of every node (`parent[0]` is unused).
fn chu_liu_edmonds(w: &[Vec<f64>]) -> Vec<usize> {
    let m = w.len();
    let mut parent = vec![0usize; m];
    for d in 1..m {
        let mut best = usize::MAX;
        for h in 0..m {
            if h != d && (best == usize::MAX || w[h][d] > w[best][d]) {
                best = h;
            }
        }
        parent[d] = best;
    }
    let Some(cycle) = find_cycle(&parent) else {
        return parent;
    };
    let mut in_cycle = vec![false; m];
    for &v in &cycle {
        in_cycle[v] = true;
    }
    let outside: Vec<usize> = (0..m).filter(|&v| !in_cycle[v]).collect();
    let mut map = vec![usize::MAX; m];
    for (new, &old) in outside.iter().enumerate() {
        map[old] = new;
    }
    let c = outside.len();
    let m2 = c + 1;
    let mut w2 = vec![vec![f64::NEG_INFINITY; m2]; m2];
    let mut enter_to = vec![usize::MAX; m];
    let mut leave_from = vec![usize::MAX; m];
    for &u in &outside {
        for &v in &outside {
            if u != v {
                w2[map[u]][map[v]] = w[u][v];
            }
        }
        let mut best = f64::NEG_INFINITY;
        for &v in &cycle {
            let s = w[u][v] - w[parent[v]][v];
            if enter_to[u] == usize::MAX || s > best {
                best = s;
                enter_to[u] = v;
            }
        }
        w2[map[u]][c] = best;
    }
    for &v in outside.iter().filter(|&&v| v != 0) {
        let mut best = f64::NEG_INFINITY;
        for &u in &cycle {
            if leave_from[v] == usize::MAX || w[u][v] > best {
                best = w[u][v];
                leave_from[v] = u;
            }
        }
        w2[c][map[v]] = best;
    }
    let p2 = chu_liu_edmonds(&w2);
    for &v in outside.iter().filter(|&&v| v != 0) {
        parent[v] = if p2[map[v]] == c {
            leave_from[v]
        } else {
            outside[p2[map[v]]]
        };
    }
    let u = outside[p2[c]];
    parent[enter_to[u]] = u;
    parent
}

fn to_weights(
    scores: &[Vec<f64>],
    root_penalty: f64,
    only_root_child: Option<usize>,
) -> Vec<Vec<f64>> {
    let n = scores.len();
    let mut w = vec![vec![f64::NEG_INFINITY; n + 1]; n + 1];
    for d in 1..=n {
        for h in 0..=n {
            if h == d {
                continue;
            }
            let s = scores[d - 1][h];
            w[h][d] = if h == 0 {
                match only_root_child {
                    Some(c) if c != d => f64::NEG_INFINITY,
                    _ => s - root_penalty,
                }
            } else {
                s
            };
        }
    }
    w
}

/// Highest-scoring arborescence whose root has exactly one child.
///
/// Root arcs are penalized by `M = 1 + 2 n (max - min)`, which exceeds the
/// largest possible score difference between two trees, so every
/// multi-root tree loses to some single-root tree. The result is verified;
/// if rounding ever breaks the guarantee, each root child is tried in turn.
pub fn decode_heads(scores: &[Vec<f64>]) -> Vec<usize> {
    let n = scores.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![0];
    }
    let finite = scores.iter().flatten().filter(|s| s.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
        (lo.min(s), hi.max(s))
    });
    let range = if hi >= lo { hi - lo } else { 0.0 };
    let penalty = 1.0 + 2.0 * n as f64 * range;
    let heads = chu_liu_edmonds(&to_weights(scores, penalty, None))[1..].to_vec();
    if heads.iter().filter(|&&h| h == 0).count() == 1 && tree::validate_heads(&heads).is_ok() {
        return heads;
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for c in 1..=n {
        let h = chu_liu_edmonds(&to_weights(scores, 0.0, Some(c)))[1..].to_vec();
        let s = tree_score(scores, &h);
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, h));
        }
    }
    best.expect("n >= 1").1
}

/// Exhaustive search over all single-root arborescences (test oracle).
pub fn brute_force_heads(scores: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = scores.len();
    let mut heads = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        if tree::validate_heads(&heads).is_ok() {
            let s = tree_score(scores, &heads);
            if best.as_ref().is_none_or(|(_, b)| s > *b) {
                best = Some((heads.clone(), s));
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return best.expect("at least one tree exists");
            }
            heads[i] += 1;
            if heads[i] <= n {
                break;
            }
            heads[i] = 0;
            i += 1;
        }
    }
}

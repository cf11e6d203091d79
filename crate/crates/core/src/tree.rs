//! Validation helpers for head vectors.
//!
//! A head vector has one entry per unit; `heads[i]` is the parent of unit
//! `i + 1`, and `0` denotes the fictional root.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeadsError {
    #[error("empty tree")]
    Empty,
    #[error("unit {unit} has head {head} outside 0..={n}")]
    OutOfRange { unit: usize, head: usize, n: usize },
    #[error("unit {0} is its own head")]
    SelfLoop(usize),
    #[error("expected exactly one unit attached to the root, found {0}")]
    RootCount(usize),
    #[error("cycle through unit {0}")]
    Cycle(usize),
}

/// Checks that `heads` encodes a single-rooted arborescence and returns the
/// (1-based) unit attached to the root.
pub fn validate_heads(heads: &[usize]) -> Result<usize, HeadsError> {
    let n = heads.len();
    if n == 0 {
        return Err(HeadsError::Empty);
    }
    let mut root = None;
    let mut root_count = 0;
    for (i, &h) in heads.iter().enumerate() {
        let unit = i + 1;
        if h > n {
            return Err(HeadsError::OutOfRange { unit, head: h, n });
        }
        if h == unit {
            return Err(HeadsError::SelfLoop(unit));
        }
        if h == 0 {
            root_count += 1;
            root = Some(unit);
        }
    }
    if root_count != 1 {
        return Err(HeadsError::RootCount(root_count));
    }
    // 0 = unvisited, 1 = on current path, 2 = reaches root
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    for start in 1..=n {
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = heads[v - 1];
        }
        if state[v] == 1 {
            return Err(HeadsError::Cycle(v));
        }
        for u in path {
            state[u] = 2;
        }
    }
    Ok(root.expect("root_count == 1"))
}

/// Children lists indexed by node (0 = root), in ascending unit order.
pub fn children(heads: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); heads.len() + 1];
    for (i, &h) in heads.iter().enumerate() {
        if h <= heads.len() {
            out[h].push(i + 1);
        }
    }
    out
}

/// Depth of every unit below the fictional root (root child has depth 1).
/// Assumes a valid arborescence.
pub fn depths(heads: &[usize]) -> Vec<usize> {
    let n = heads.len();
    let mut depth = vec![usize::MAX; n + 1];
    depth[0] = 0;
    fn resolve(v: usize, heads: &[usize], depth: &mut [usize]) -> usize {
        if depth[v] != usize::MAX {
            return depth[v];
        }
        let d = resolve(heads[v - 1], heads, depth) + 1;
        depth[v] = d;
        d
    }
    for v in 1..=n {
        resolve(v, heads, &mut depth);
    }
    depth[1..].to_vec()
}

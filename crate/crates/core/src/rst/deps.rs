use serde::{Deserialize, Serialize};

use super::{Nuclearity, RelationInventory, RstError, RstNode};
use crate::tree;

/// Orientation of a dependency relative to the nuclearity that produced it.
///
/// Conversion always yields `Forward` arcs (dependent towards its nucleus);
/// `Inverted` is the same arc read from the head's side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Inverted,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RstRelation {
    pub label: String,
    pub direction: Direction,
    /// Satellite for satellite arcs, Nucleus for co-nuclei of a
    /// multinuclear relation.
    pub dependent: Nuclearity,
}

/// Labeled dependency view of an RST tree over units `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RstDependencies {
    /// `heads[i]` is the head of unit `i + 1`; 0 marks the top nucleus.
    pub heads: Vec<usize>,
    /// Incoming relation of each unit; `None` for the top nucleus.
    pub relations: Vec<Option<RstRelation>>,
}

impl RstDependencies {
    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn validate(&self) -> Result<(), RstError> {
        if self.relations.len() != self.heads.len() {
            return Err(RstError::Structure(
                "heads and relations differ in length".into(),
            ));
        }
        let root =
            tree::validate_heads(&self.heads).map_err(|e| RstError::Structure(e.to_string()))?;
        for (i, r) in self.relations.iter().enumerate() {
            if (i + 1 == root) != r.is_none() {
                return Err(RstError::Structure(format!(
                    "unit {} relation/root mismatch",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Builds dependencies directly from `(head, relation)` pairs; co-nucleus
    /// arcs are not distinguishable this way, so all arcs are satellites.
    pub fn from_arcs(arcs: &[(usize, Option<&str>)]) -> Result<RstDependencies, RstError> {
        let deps = RstDependencies {
            heads: arcs.iter().map(|a| a.0).collect(),
            relations: arcs
                .iter()
                .map(|a| {
                    a.1.map(|label| RstRelation {
                        label: label.to_string(),
                        direction: Direction::Forward,
                        dependent: Nuclearity::Satellite,
                    })
                })
                .collect(),
        };
        deps.validate()?;
        Ok(deps)
    }
}

/// Converts a constituency tree to dependencies by nucleus percolation: each
/// node is headed by its leftmost nucleus; every other child attaches to that
/// head with its own relation label.
pub fn to_dependencies(tree: &RstNode) -> RstDependencies {
    let n = tree.leaf_count();
    let mut deps = RstDependencies {
        heads: vec![0; n],
        relations: vec![None; n],
    };
    let mut next_leaf = 1;
    percolate(tree, &mut deps, &mut next_leaf);
    deps
}

fn percolate(node: &RstNode, deps: &mut RstDependencies, next_leaf: &mut usize) -> usize {
    match node {
        RstNode::Leaf { .. } => {
            let unit = *next_leaf;
            *next_leaf += 1;
            unit
        }
        RstNode::Internal { children } => {
            let heads: Vec<usize> = children
                .iter()
                .map(|c| percolate(&c.node, deps, next_leaf))
                .collect();
            let nucleus = children
                .iter()
                .position(|c| c.nuclearity == Nuclearity::Nucleus)
                .unwrap_or(0);
            let head = heads[nucleus];
            for (i, (child, &child_head)) in children.iter().zip(&heads).enumerate() {
                if i == nucleus {
                    continue;
                }
                deps.heads[child_head - 1] = head;
                deps.relations[child_head - 1] = Some(RstRelation {
                    label: child.relation.clone(),
                    direction: Direction::Forward,
                    dependent: child.nuclearity,
                });
            }
            head
        }
    }
}

/// Adjacency encodings of a dependency set.
///
/// `adj[i][j] = 1` iff unit `i+1` attaches to unit `j+1`; `forward[i][j]`
/// holds the directed label index of that arc. The one-hot tensor over the
/// `k` directed labels is materialized on demand; inverted labels are looked
/// up from the transposed cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    pub n: usize,
    pub k: usize,
    pub adj: Vec<Vec<f64>>,
    forward: Vec<Vec<Option<usize>>>,
}

impl Adjacency {
    /// Directed label of the arc `i -> j` (0-based units), if any.
    pub fn forward_label(&self, i: usize, j: usize) -> Option<usize> {
        self.forward[i][j]
    }

    /// Inverted directed label for cell `(i, j)`: the arc `j -> i` seen
    /// from `i`.
    pub fn inverted_label(&self, i: usize, j: usize) -> Option<usize> {
        self.forward[j][i].map(|r| r + self.k / 2)
    }

    /// One-hot vector `A_full[i][j]` over the directed labels.
    pub fn full(&self, i: usize, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.k];
        if let Some(r) = self.forward[i][j] {
            v[r] = 1.0;
        }
        v
    }
}

pub fn adjacency(
    dep: &RstDependencies,
    inventory: &RelationInventory,
    n: usize,
) -> Result<Adjacency, RstError> {
    if dep.len() != n {
        return Err(RstError::Bounds {
            index: dep.len(),
            n,
        });
    }
    let mut adj = vec![vec![0.0; n]; n];
    let mut forward = vec![vec![None; n]; n];
    for (i, (&h, rel)) in dep.heads.iter().zip(&dep.relations).enumerate() {
        if h > n {
            return Err(RstError::Bounds { index: h, n });
        }
        if h == 0 {
            continue;
        }
        let label = rel
            .as_ref()
            .ok_or_else(|| RstError::Structure(format!("arc {} -> {h} without relation", i + 1)))?;
        let r = inventory.index_of(&label.label)?;
        adj[i][h - 1] = 1.0;
        forward[i][h - 1] = Some(match label.direction {
            Direction::Forward => r,
            Direction::Inverted => r + inventory.len(),
        });
    }
    Ok(Adjacency {
        n,
        k: inventory.k(),
        adj,
        forward,
    })
}

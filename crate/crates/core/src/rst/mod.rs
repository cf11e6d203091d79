//! RST constituency trees, their reduction to argumentative segmentations,
//! conversion to labeled dependencies, and adjacency encodings.

mod deps;
mod inventory;
mod reduce;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Language;

pub use deps::{adjacency, to_dependencies, Adjacency, Direction, RstDependencies, RstRelation};
pub use inventory::{RelationInventory, INVENTORY_VERSION};
pub use reduce::{assign_to_segments, reduce_to_segmentation};

/// Relation name carried by the nucleus of a mononuclear relation.
pub const SPAN: &str = "span";

#[derive(Debug, Error)]
pub enum RstError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("segmentation error: {0}")]
    Segmentation(String),
    #[error("nuclearity error: {0}")]
    Nuclearity(String),
    #[error("malformed tree: {0}")]
    Structure(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("index {index} out of range for {n} units")]
    Bounds { index: usize, n: usize },
    #[error("relation {label:?} is not in the {language} inventory")]
    UnknownRelation { label: String, language: Language },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Nuclearity {
    #[serde(rename = "N", alias = "nucleus", alias = "Nucleus")]
    Nucleus,
    #[serde(rename = "S", alias = "satellite", alias = "Satellite")]
    Satellite,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RstChild {
    pub node: RstNode,
    pub nuclearity: Nuclearity,
    /// Relation label; [`SPAN`] for the nucleus of a mononuclear relation.
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RstNode {
    Leaf { span: (usize, usize) },
    Internal { children: Vec<RstChild> },
}

impl RstNode {
    pub fn leaf(start: usize, end: usize) -> RstNode {
        RstNode::Leaf { span: (start, end) }
    }

    /// Convenience constructor from `(node, nuclearity, relation)` triples.
    pub fn internal(children: Vec<(RstNode, Nuclearity, &str)>) -> RstNode {
        RstNode::Internal {
            children: children
                .into_iter()
                .map(|(node, nuclearity, relation)| RstChild {
                    node,
                    nuclearity,
                    relation: relation.to_string(),
                })
                .collect(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, RstNode::Leaf { .. })
    }

    /// Leaf spans in left-to-right order.
    pub fn leaves(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<(usize, usize)>) {
        match self {
            RstNode::Leaf { span } => out.push(*span),
            RstNode::Internal { children } => {
                for c in children {
                    c.node.collect_leaves(out);
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            RstNode::Leaf { .. } => 1,
            RstNode::Internal { children } => children.iter().map(|c| c.node.leaf_count()).sum(),
        }
    }

    /// Checks arity and nuclearity of every internal node.
    pub fn validate_structure(&self) -> Result<(), RstError> {
        if let RstNode::Internal { children } = self {
            if children.len() < 2 {
                return Err(RstError::Structure(format!(
                    "internal node with {} child(ren)",
                    children.len()
                )));
            }
            if !children.iter().any(|c| c.nuclearity == Nuclearity::Nucleus) {
                return Err(RstError::Nuclearity(
                    "internal node without a nucleus child".into(),
                ));
            }
            for c in children {
                c.node.validate_structure()?;
            }
        }
        Ok(())
    }

    /// Checks that the leaves tile `[0, end)` left to right.
    pub fn validate_tiling(&self) -> Result<(), RstError> {
        let mut pos = 0;
        for (s, e) in self.leaves() {
            if s >= e {
                return Err(RstError::Segmentation(format!("empty leaf [{s},{e})")));
            }
            if s > pos {
                return Err(RstError::Segmentation(format!(
                    "gap [{pos},{s}) between leaves"
                )));
            }
            if s < pos {
                return Err(RstError::Segmentation(format!(
                    "leaf [{s},{e}) overlaps previous leaf"
                )));
            }
            pos = e;
        }
        Ok(())
    }
}

// ---- JSON interchange -------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChildRef {
    Leaf(usize),
    Node(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafJson {
    pub span: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeJson {
    pub children: Vec<ChildRef>,
    pub nuclearities: Vec<Nuclearity>,
    pub relations: Vec<String>,
}

/// Preorder listing of an RST tree; `nodes[0]` is the root when present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RstJson {
    pub doc_id: String,
    pub leaves: Vec<LeafJson>,
    #[serde(default)]
    pub nodes: Vec<NodeJson>,
}

pub fn parse_rst_json(path: &Path) -> Result<RstNode, RstError> {
    let text = std::fs::read_to_string(path).map_err(|source| RstError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    rst_from_json(&serde_json::from_str(&text)?)
}

pub fn rst_from_json(json: &RstJson) -> Result<RstNode, RstError> {
    if json.leaves.is_empty() {
        return Err(RstError::Structure("tree without leaves".into()));
    }
    let mut leaf_used = vec![false; json.leaves.len()];
    let mut node_used = vec![false; json.nodes.len()];
    let root = if json.nodes.is_empty() {
        if json.leaves.len() != 1 {
            return Err(RstError::Structure("several leaves but no nodes".into()));
        }
        leaf_used[0] = true;
        let [s, e] = json.leaves[0].span;
        RstNode::leaf(s, e)
    } else {
        build_node(json, 0, &mut leaf_used, &mut node_used)?
    };
    if let Some(i) = leaf_used.iter().position(|u| !u) {
        return Err(RstError::Structure(format!("leaf {i} is not referenced")));
    }
    if let Some(i) = node_used.iter().position(|u| !u) {
        return Err(RstError::Structure(format!("node {i} is not referenced")));
    }
    // traversal order must agree with the leaf listing
    let listed: Vec<(usize, usize)> = json.leaves.iter().map(|l| (l.span[0], l.span[1])).collect();
    if root.leaves() != listed {
        return Err(RstError::Segmentation(
            "leaves are not in text order".into(),
        ));
    }
    root.validate_structure()?;
    root.validate_tiling()?;
    Ok(root)
}

fn build_node(
    json: &RstJson,
    index: usize,
    leaf_used: &mut [bool],
    node_used: &mut [bool],
) -> Result<RstNode, RstError> {
    let spec = json
        .nodes
        .get(index)
        .ok_or_else(|| RstError::Structure(format!("node {index} does not exist")))?;
    if node_used[index] {
        return Err(RstError::Structure(format!(
            "node {index} referenced twice"
        )));
    }
    node_used[index] = true;
    if spec.children.len() != spec.nuclearities.len() || spec.children.len() != spec.relations.len()
    {
        return Err(RstError::Structure(format!(
            "node {index}: children, nuclearities and relations differ in length"
        )));
    }
    let mut children = Vec::with_capacity(spec.children.len());
    for ((child, nuc), rel) in spec
        .children
        .iter()
        .zip(&spec.nuclearities)
        .zip(&spec.relations)
    {
        let node = match *child {
            ChildRef::Leaf(i) => {
                let leaf = json
                    .leaves
                    .get(i)
                    .ok_or_else(|| RstError::Structure(format!("leaf {i} does not exist")))?;
                if std::mem::replace(&mut leaf_used[i], true) {
                    return Err(RstError::Structure(format!("leaf {i} referenced twice")));
                }
                RstNode::leaf(leaf.span[0], leaf.span[1])
            }
            ChildRef::Node(j) => {
                if j <= index {
                    return Err(RstError::Structure(format!(
                        "node {index} refers back to node {j}; nodes must be listed in preorder"
                    )));
                }
                build_node(json, j, leaf_used, node_used)?
            }
        };
        children.push(RstChild {
            node,
            nuclearity: *nuc,
            relation: rel.clone(),
        });
    }
    Ok(RstNode::Internal { children })
}

/// Serializes a tree into the preorder JSON listing.
pub fn rst_to_json(doc_id: &str, tree: &RstNode) -> RstJson {
    let mut json = RstJson {
        doc_id: doc_id.to_string(),
        leaves: Vec::new(),
        nodes: Vec::new(),
    };
    match tree {
        RstNode::Leaf { span } => json.leaves.push(LeafJson {
            span: [span.0, span.1],
            text: None,
        }),
        RstNode::Internal { .. } => {
            emit_node(tree, &mut json);
        }
    }
    json
}

fn emit_node(node: &RstNode, json: &mut RstJson) -> ChildRef {
    match node {
        RstNode::Leaf { span } => {
            json.leaves.push(LeafJson {
                span: [span.0, span.1],
                text: None,
            });
            ChildRef::Leaf(json.leaves.len() - 1)
        }
        RstNode::Internal { children } => {
            let index = json.nodes.len();
            json.nodes.push(NodeJson {
                children: Vec::new(),
                nuclearities: children.iter().map(|c| c.nuclearity).collect(),
                relations: children.iter().map(|c| c.relation.clone()).collect(),
            });
            let refs: Vec<ChildRef> = children.iter().map(|c| emit_node(&c.node, json)).collect();
            json.nodes[index].children = refs;
            ChildRef::Node(index)
        }
    }
}

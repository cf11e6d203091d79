use crate::corpus::{ArgumentTree, DiscourseUnit, Document, UnitKind};
use crate::encoder::EmbeddingMatrix;
use crate::rst::{adjacency, Adjacency, RelationInventory, RstDependencies, RstNode};

use super::ParserError;

/// One document ready for scoring: unit vectors, optional RST adjacency
/// and optional gold tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub doc_id: String,
    pub embeddings: EmbeddingMatrix,
    pub rst: Option<Adjacency>,
    pub gold: Option<ArgumentTree>,
}

impl Instance {
    pub fn new(
        doc_id: impl Into<String>,
        embeddings: EmbeddingMatrix,
        rst: Option<&RstDependencies>,
        inventory: &RelationInventory,
        gold: Option<ArgumentTree>,
    ) -> Result<Instance, ParserError> {
        let doc_id = doc_id.into();
        let n = embeddings.unit_count();
        if n == 0 {
            return Err(ParserError::Alignment(format!("{doc_id}: no units")));
        }
        let rst = match rst {
            Some(deps) => {
                if deps.len() != n {
                    return Err(ParserError::Alignment(format!(
                        "{doc_id}: {n} embedded units but {} RST units",
                        deps.len()
                    )));
                }
                Some(adjacency(deps, inventory, n)?)
            }
            None => None,
        };
        if let Some(tree) = &gold {
            if tree.len() != n {
                return Err(ParserError::Alignment(format!(
                    "{doc_id}: {n} embedded units but gold tree has {}",
                    tree.len()
                )));
            }
            tree.validate()?;
        }
        Ok(Instance {
            doc_id,
            embeddings,
            rst,
            gold,
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.unit_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn char_slice(text: &str, (start, end): (usize, usize)) -> String {
    text.chars()
        .skip(start)
        .take(end.saturating_sub(start))
        .collect()
}

/// The EDU segmentation of `doc` given by the leaves of an EDU-level RST
/// tree over the same text.
pub fn edu_document(doc: &Document, tree: &RstNode) -> Result<Document, ParserError> {
    let text = doc.text();
    let len = text.chars().count();
    let leaves = tree.leaves();
    if leaves.last().map(|l| l.1) != Some(len) {
        return Err(ParserError::Alignment(format!(
            "{}: RST leaves end at {:?}, text has {len} characters",
            doc.id,
            leaves.last().map(|l| l.1)
        )));
    }
    let units = leaves
        .iter()
        .enumerate()
        .map(|(i, &span)| DiscourseUnit {
            id: format!("e{}", i + 1),
            text: char_slice(&text, span).trim().to_string(),
            span,
            kind: UnitKind::Edu,
        })
        .collect();
    Ok(Document {
        id: doc.id.clone(),
        language: doc.language,
        variant: doc.variant,
        source_doc_id: doc.source_doc_id.clone(),
        units,
    })
}

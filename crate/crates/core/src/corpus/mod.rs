//! Argumentative documents, gold argument trees and paraphrase bundles.

mod json;
mod xml;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{self, HeadsError};

pub use json::{document_from_json, document_to_json, read_document, write_document, DocumentJson};
pub use xml::{load_arggraph_xml, parse_arggraph_xml};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("XML parse error at line {line}: {message}")]
    Xml { line: u32, message: String },
    #[error("integrity error: unknown node {id:?} referenced at line {line}")]
    Integrity { id: String, line: u32 },
    #[error("structure error in {doc_id}: {message}")]
    Structure { doc_id: String, message: String },
    #[error("cannot map raw edge type(s) {labels:?}")]
    Mapping { labels: Vec<String> },
    #[error(
        "alignment error: variant {variant} has {found} units, original {original} has {expected}"
    )]
    Alignment {
        variant: String,
        original: String,
        expected: usize,
        found: usize,
    },
    #[error("reference error: variant {variant} points to unknown original {source_id:?}")]
    Reference {
        variant: String,
        source_id: Option<String>,
    },
    #[error("invalid unit in {doc_id}: {message}")]
    InvalidUnit { doc_id: String, message: String },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CorpusError {
    fn structure(doc_id: &str, err: impl fmt::Display) -> Self {
        CorpusError::Structure {
            doc_id: doc_id.to_string(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Edu,
    Adu,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscourseUnit {
    pub id: String,
    pub text: String,
    /// Character offsets into the document text, half-open.
    pub span: (usize, usize),
    pub kind: UnitKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Ru,
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Language::En => "en",
            Language::Ru => "ru",
        })
    }
}

impl std::str::FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "en" => Ok(Language::En),
            "ru" => Ok(Language::Ru),
            other => Err(format!("unknown language {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Original,
    BackTranslated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub language: Language,
    pub variant: Variant,
    pub source_doc_id: Option<String>,
    pub units: Vec<DiscourseUnit>,
}

/// Separator placed between consecutive unit texts when a document text is
/// assembled from its units.
pub const UNIT_SEPARATOR: &str = " ";

impl Document {
    /// Builds a document whose text is the unit texts joined by
    /// [`UNIT_SEPARATOR`]; spans are assigned accordingly.
    pub fn from_texts(
        id: impl Into<String>,
        language: Language,
        kind: UnitKind,
        texts: &[(String, String)],
    ) -> Document {
        let mut units = Vec::with_capacity(texts.len());
        let mut offset = 0;
        for (unit_id, text) in texts {
            let len = text.chars().count();
            units.push(DiscourseUnit {
                id: unit_id.clone(),
                text: text.clone(),
                span: (offset, offset + len),
                kind,
            });
            offset += len + UNIT_SEPARATOR.chars().count();
        }
        Document {
            id: id.into(),
            language,
            variant: Variant::Original,
            source_doc_id: None,
            units,
        }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Full document text reconstructed from the unit spans; gaps between
    /// spans are filled with spaces.
    pub fn text(&self) -> String {
        let mut out = String::new();
        let mut pos = 0;
        for u in &self.units {
            while pos < u.span.0 {
                out.push(' ');
                pos += 1;
            }
            out.push_str(&u.text);
            pos = u.span.1;
        }
        out
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |message: String| CorpusError::InvalidUnit {
            doc_id: self.id.clone(),
            message,
        };
        if self.units.is_empty() {
            return Err(bad("document has no units".into()));
        }
        let mut seen = HashSet::new();
        let mut prev_end = 0;
        for (i, u) in self.units.iter().enumerate() {
            if !seen.insert(u.id.as_str()) {
                return Err(bad(format!("duplicate unit id {:?}", u.id)));
            }
            let (s, e) = u.span;
            if s >= e {
                return Err(bad(format!("unit {:?} has empty span [{s},{e})", u.id)));
            }
            if i > 0 && s < prev_end {
                return Err(bad(format!("unit {:?} overlaps its predecessor", u.id)));
            }
            if u.text.chars().count() != e - s {
                return Err(bad(format!(
                    "unit {:?} text length {} does not match span [{s},{e})",
                    u.id,
                    u.text.chars().count()
                )));
            }
            prev_end = e;
        }
        if self.variant == Variant::BackTranslated && self.source_doc_id.is_none() {
            return Err(bad("back-translated document without source_doc_id".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArgumentFunction {
    #[serde(rename = "cc")]
    Cc,
    #[serde(rename = "support")]
    Support,
    #[serde(rename = "attack")]
    Attack,
    #[serde(rename = "same-arg")]
    SameArg,
}

impl ArgumentFunction {
    /// Fixed order used for label indices and tie-breaking.
    pub const ALL: [ArgumentFunction; 4] = [
        ArgumentFunction::Cc,
        ArgumentFunction::Support,
        ArgumentFunction::Attack,
        ArgumentFunction::SameArg,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ArgumentFunction::Cc => "cc",
            ArgumentFunction::Support => "support",
            ArgumentFunction::Attack => "attack",
            ArgumentFunction::SameArg => "same-arg",
        }
    }
}

impl fmt::Display for ArgumentFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Pro,
    Opp,
}

impl Role {
    pub fn flipped(self) -> Role {
        match self {
            Role::Pro => Role::Opp,
            Role::Opp => Role::Pro,
        }
    }
}

/// Labeled dependency tree over the units of one document.
///
/// Index `i` of `heads`, `functions` and `roles` describes unit `i + 1`;
/// head `0` is the fictional root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgumentTree {
    pub doc_id: String,
    pub heads: Vec<usize>,
    pub functions: Vec<ArgumentFunction>,
    pub roles: Option<Vec<Role>>,
    /// Raw corpus edge types (`sup`, `reb`, ...) before simplification;
    /// `None` entries mark the root arc.
    pub raw_labels: Option<Vec<Option<String>>>,
}

impl ArgumentTree {
    pub fn new(
        doc_id: impl Into<String>,
        heads: Vec<usize>,
        functions: Vec<ArgumentFunction>,
    ) -> Result<Self, CorpusError> {
        let tree = ArgumentTree {
            doc_id: doc_id.into(),
            heads,
            functions,
            roles: None,
            raw_labels: None,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// Builds a tree without validating it. Used for ablation decoders whose
    /// output is not guaranteed to be an arborescence.
    pub fn new_unchecked(
        doc_id: impl Into<String>,
        heads: Vec<usize>,
        functions: Vec<ArgumentFunction>,
    ) -> Self {
        ArgumentTree {
            doc_id: doc_id.into(),
            heads,
            functions,
            roles: None,
            raw_labels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    /// Parent of the 1-based `unit`.
    pub fn head(&self, unit: usize) -> usize {
        self.heads[unit - 1]
    }

    pub fn function(&self, unit: usize) -> ArgumentFunction {
        self.functions[unit - 1]
    }

    /// The unit attached to the fictional root, if unique.
    pub fn central_claim(&self) -> Option<usize> {
        let mut roots = self.heads.iter().enumerate().filter(|(_, &h)| h == 0);
        match (roots.next(), roots.next()) {
            (Some((i, _)), None) => Some(i + 1),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.functions.len() != self.heads.len() {
            return Err(CorpusError::structure(
                &self.doc_id,
                format!(
                    "{} heads but {} functions",
                    self.heads.len(),
                    self.functions.len()
                ),
            ));
        }
        let root = tree::validate_heads(&self.heads)
            .map_err(|e: HeadsError| CorpusError::structure(&self.doc_id, e))?;
        for (i, f) in self.functions.iter().enumerate() {
            let is_root = i + 1 == root;
            if is_root != (*f == ArgumentFunction::Cc) {
                return Err(CorpusError::structure(
                    &self.doc_id,
                    format!("unit {} has function {f} but root status {is_root}", i + 1),
                ));
            }
        }
        if let Some(roles) = &self.roles {
            if roles.len() != self.heads.len() {
                return Err(CorpusError::structure(&self.doc_id, "role count mismatch"));
            }
        }
        Ok(())
    }
}

/// Maps a raw Microtexts edge type to its simplified function.
pub fn simplify_label(raw: &str) -> Option<ArgumentFunction> {
    match raw {
        "sup" | "exa" | "add" => Some(ArgumentFunction::Support),
        "reb" | "und" => Some(ArgumentFunction::Attack),
        _ => None,
    }
}

/// Collapses the raw edge inventory to {cc, support, attack}.
///
/// Trees without raw labels keep their functions, except that the root arc
/// is (re)labelled CC.
pub fn simplify_functions(raw_tree: &ArgumentTree) -> Result<ArgumentTree, CorpusError> {
    let mut out = raw_tree.clone();
    let root = tree::validate_heads(&raw_tree.heads)
        .map_err(|e| CorpusError::structure(&raw_tree.doc_id, e))?;
    if let Some(raw) = &raw_tree.raw_labels {
        let mut unknown: Vec<String> = Vec::new();
        for (i, label) in raw.iter().enumerate() {
            let unit = i + 1;
            if unit == root {
                out.functions[i] = ArgumentFunction::Cc;
                continue;
            }
            match label.as_deref().map(|l| (l, simplify_label(l))) {
                Some((_, Some(f))) => out.functions[i] = f,
                Some((l, None)) => {
                    if !unknown.iter().any(|u| u == l) {
                        unknown.push(l.to_string());
                    }
                }
                None => unknown.push(String::from("<missing>")),
            }
        }
        if !unknown.is_empty() {
            return Err(CorpusError::Mapping { labels: unknown });
        }
        out.raw_labels = None;
    } else {
        out.functions[root - 1] = ArgumentFunction::Cc;
    }
    out.validate()?;
    Ok(out)
}

/// An original document, its paraphrases, and the gold tree they share.
#[derive(Debug, Clone)]
pub struct VariantGroup {
    pub original: Document,
    pub variants: Vec<Document>,
    pub tree: ArgumentTree,
}

impl VariantGroup {
    pub fn len(&self) -> usize {
        1 + self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Original first, then variants in input order.
    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        std::iter::once(&self.original).chain(self.variants.iter())
    }
}

/// Groups every original with the paraphrases pointing at it.
pub fn bundle_variants(
    originals: Vec<(Document, ArgumentTree)>,
    variants: Vec<Document>,
) -> Result<Vec<VariantGroup>, CorpusError> {
    let mut index = HashMap::new();
    let mut groups: Vec<VariantGroup> = originals
        .into_iter()
        .enumerate()
        .map(|(i, (original, tree))| {
            index.insert(original.id.clone(), i);
            VariantGroup {
                original,
                variants: Vec::new(),
                tree,
            }
        })
        .collect();
    for v in variants {
        let slot = v
            .source_doc_id
            .as_ref()
            .and_then(|s| index.get(s))
            .copied()
            .ok_or_else(|| CorpusError::Reference {
                variant: v.id.clone(),
                source_id: v.source_doc_id.clone(),
            })?;
        let group = &mut groups[slot];
        if v.len() != group.original.len() {
            return Err(CorpusError::Alignment {
                variant: v.id.clone(),
                original: group.original.id.clone(),
                expected: group.original.len(),
                found: v.len(),
            });
        }
        group.variants.push(v);
    }
    Ok(groups)
}

//! Canonical JSON bundle for one document and (optionally) its gold tree.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    ArgumentFunction, ArgumentTree, CorpusError, DiscourseUnit, Document, Language, Role, UnitKind,
    Variant,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitJson {
    pub id: String,
    pub text: String,
    pub span: [usize; 2],
    pub kind: UnitKind,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ArgumentJson {
    pub heads: BTreeMap<usize, usize>,
    pub functions: BTreeMap<usize, ArgumentFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roles: Option<BTreeMap<usize, Role>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocumentJson {
    pub id: String,
    pub language: Language,
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_doc_id: Option<String>,
    pub units: Vec<UnitJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argument: Option<ArgumentJson>,
}

pub fn document_to_json(doc: &Document, tree: Option<&ArgumentTree>) -> DocumentJson {
    DocumentJson {
        id: doc.id.clone(),
        language: doc.language,
        variant: doc.variant,
        source_doc_id: doc.source_doc_id.clone(),
        units: doc
            .units
            .iter()
            .map(|u| UnitJson {
                id: u.id.clone(),
                text: u.text.clone(),
                span: [u.span.0, u.span.1],
                kind: u.kind,
            })
            .collect(),
        argument: tree.map(|t| ArgumentJson {
            heads: t
                .heads
                .iter()
                .enumerate()
                .map(|(i, &h)| (i + 1, h))
                .collect(),
            functions: t
                .functions
                .iter()
                .enumerate()
                .map(|(i, &f)| (i + 1, f))
                .collect(),
            roles: t
                .roles
                .as_ref()
                .map(|r| r.iter().enumerate().map(|(i, &r)| (i + 1, r)).collect()),
        }),
    }
}

fn dense<T: Copy>(
    doc_id: &str,
    n: usize,
    map: &BTreeMap<usize, T>,
    what: &str,
) -> Result<Vec<T>, CorpusError> {
    if map.len() != n || map.keys().copied().ne(1..=n) {
        return Err(CorpusError::Structure {
            doc_id: doc_id.to_string(),
            message: format!("{what} must cover units 1..={n}"),
        });
    }
    Ok(map.values().copied().collect())
}

pub fn document_from_json(
    json: DocumentJson,
) -> Result<(Document, Option<ArgumentTree>), CorpusError> {
    let doc = Document {
        id: json.id,
        language: json.language,
        variant: json.variant,
        source_doc_id: json.source_doc_id,
        units: json
            .units
            .into_iter()
            .map(|u| DiscourseUnit {
                id: u.id,
                text: u.text,
                span: (u.span[0], u.span[1]),
                kind: u.kind,
            })
            .collect(),
    };
    doc.validate()?;
    let tree = match json.argument {
        None => None,
        Some(arg) => {
            let n = doc.len();
            let heads = dense(&doc.id, n, &arg.heads, "heads")?;
            let functions = dense(&doc.id, n, &arg.functions, "functions")?;
            let mut tree = ArgumentTree::new(doc.id.clone(), heads, functions)?;
            if let Some(roles) = &arg.roles {
                tree.roles = Some(dense(&doc.id, n, roles, "roles")?);
            }
            Some(tree)
        }
    };
    Ok((doc, tree))
}

pub fn read_document(path: &Path) -> Result<(Document, Option<ArgumentTree>), CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    document_from_json(serde_json::from_str(&text)?)
}

pub fn write_document(
    path: &Path,
    doc: &Document,
    tree: Option<&ArgumentTree>,
) -> Result<(), CorpusError> {
    let mut text = serde_json::to_string_pretty(&document_to_json(doc, tree))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

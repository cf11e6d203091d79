//! Reader for Microtexts `arggraph` XML files.

use std::collections::HashMap;
use std::path::Path;

use super::{ArgumentFunction, ArgumentTree, CorpusError, Document, Language, UnitKind};
use crate::tree;

struct Edge<'a> {
    id: &'a str,
    src: &'a str,
    trg: &'a str,
    kind: &'a str,
    line: u32,
}

pub fn load_arggraph_xml(path: &Path) -> Result<(Document, ArgumentTree), CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_arggraph_xml(&text)
}

/// Parses one argument graph. The returned tree keeps the raw edge types in
/// `raw_labels`; non-root functions are provisional until
/// [`super::simplify_functions`] runs.
pub fn parse_arggraph_xml(text: &str) -> Result<(Document, ArgumentTree), CorpusError> {
    let xml = roxmltree::Document::parse(text).map_err(|e| CorpusError::Xml {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let line_of = |node: roxmltree::Node| xml.text_pos_at(node.range().start).row;
    let root = xml.root_element();
    if root.tag_name().name() != "arggraph" {
        return Err(CorpusError::Xml {
            line: line_of(root),
            message: format!("expected <arggraph>, found <{}>", root.tag_name().name()),
        });
    }
    let doc_id = root.attribute("id").unwrap_or("unnamed").to_string();
    let language = match root.attribute("lang") {
        Some(l) => l.parse::<Language>().map_err(|message| CorpusError::Xml {
            line: line_of(root),
            message,
        })?,
        None => Language::En,
    };

    let mut edus: Vec<(&str, String)> = Vec::new();
    let mut adus: Vec<&str> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    for node in root.children().filter(|n| n.is_element()) {
        let require = |attr: &str| {
            node.attribute(attr).ok_or_else(|| CorpusError::Xml {
                line: line_of(node),
                message: format!("<{}> without {attr:?}", node.tag_name().name()),
            })
        };
        match node.tag_name().name() {
            "edu" => {
                let text: String = node
                    .descendants()
                    .filter(|d| d.is_text())
                    .filter_map(|d| d.text())
                    .collect();
                edus.push((require("id")?, text.trim().to_string()));
            }
            "adu" => adus.push(require("id")?),
            "edge" => edges.push(Edge {
                id: require("id")?,
                src: require("src")?,
                trg: require("trg")?,
                kind: require("type")?,
                line: line_of(node),
            }),
            _ => {}
        }
    }

    let edu_pos: HashMap<&str, usize> = edus
        .iter()
        .enumerate()
        .map(|(i, (id, _))| (*id, i))
        .collect();
    let adu_set: HashMap<&str, usize> = adus.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let edge_index: HashMap<&str, usize> =
        edges.iter().enumerate().map(|(i, e)| (e.id, i)).collect();

    // Segmentation: which EDUs make up each ADU.
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); adus.len()];
    let seg_edges: Vec<&Edge> = edges.iter().filter(|e| e.kind == "seg").collect();
    if seg_edges.is_empty() && edus.len() == adus.len() {
        for (i, m) in members.iter_mut().enumerate() {
            m.push(i);
        }
    }
    for e in &seg_edges {
        let edu = *edu_pos.get(e.src).ok_or_else(|| CorpusError::Integrity {
            id: e.src.to_string(),
            line: e.line,
        })?;
        let adu = *adu_set.get(e.trg).ok_or_else(|| CorpusError::Integrity {
            id: e.trg.to_string(),
            line: e.line,
        })?;
        members[adu].push(edu);
    }
    for (i, m) in members.iter_mut().enumerate() {
        if m.is_empty() {
            return Err(CorpusError::Structure {
                doc_id: doc_id.clone(),
                message: format!("ADU {:?} has no segment", adus[i]),
            });
        }
        m.sort_unstable();
    }

    // Units are ordered by their first EDU.
    let mut order: Vec<usize> = (0..adus.len()).collect();
    order.sort_by_key(|&a| members[a][0]);
    let mut unit_of_adu = vec![0usize; adus.len()];
    for (pos, &a) in order.iter().enumerate() {
        unit_of_adu[a] = pos + 1;
    }
    let texts: Vec<(String, String)> = order
        .iter()
        .map(|&a| {
            let text = members[a]
                .iter()
                .map(|&e| edus[e].1.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            (adus[a].to_string(), text)
        })
        .collect();
    let document = Document::from_texts(doc_id.clone(), language, UnitKind::Adu, &texts);
    document.validate()?;

    // Argumentative edges. Edges that target another edge attach to that
    // edge's source node.
    let n = adus.len();
    let mut heads = vec![0usize; n];
    let mut labels: Vec<Option<String>> = vec![None; n];
    let resolve_target = |start: &Edge| -> Result<usize, CorpusError> {
        let mut trg = start.trg;
        for _ in 0..=edges.len() {
            if let Some(&a) = adu_set.get(trg) {
                return Ok(a);
            }
            match edge_index.get(trg) {
                Some(&ei) => trg = edges[ei].src,
                None => {
                    return Err(CorpusError::Integrity {
                        id: trg.to_string(),
                        line: start.line,
                    })
                }
            }
        }
        Err(CorpusError::Structure {
            doc_id: doc_id.clone(),
            message: format!("edge {} targets a cycle of edges", start.id),
        })
    };
    for e in edges.iter().filter(|e| e.kind != "seg") {
        let src = *adu_set.get(e.src).ok_or_else(|| CorpusError::Integrity {
            id: e.src.to_string(),
            line: e.line,
        })?;
        let trg = resolve_target(e)?;
        let unit = unit_of_adu[src];
        if labels[unit - 1].is_some() {
            return Err(CorpusError::Structure {
                doc_id: doc_id.clone(),
                message: format!("ADU {:?} has more than one outgoing edge", adus[src]),
            });
        }
        heads[unit - 1] = unit_of_adu[trg];
        labels[unit - 1] = Some(e.kind.to_string());
    }
    let root = tree::validate_heads(&heads).map_err(|err| CorpusError::Structure {
        doc_id: doc_id.clone(),
        message: err.to_string(),
    })?;
    let functions = (1..=n)
        .map(|u| {
            if u == root {
                ArgumentFunction::Cc
            } else {
                ArgumentFunction::Support
            }
        })
        .collect();
    let mut tree = ArgumentTree::new(doc_id, heads, functions)?;
    tree.raw_labels = Some(labels);
    Ok((document, tree))
}

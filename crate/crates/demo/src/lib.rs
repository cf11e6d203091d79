//! JSON-in, JSON-out operations behind the browser demo.
//!
//! Each operation has a plain Rust form returning `Result<String, DemoError>`
//! and a `wasm_bindgen` export with the same name in camel case.

use dbap::corpus::{document_from_json, document_to_json, CorpusError, DocumentJson};
use dbap::parser::{
    attach_same_arg, brute_force_heads, decode_heads, edu_document, greedy_heads, tree_score,
    ParserError,
};
use dbap::rst::{
    adjacency, rst_from_json, rst_to_json, to_dependencies, RelationInventory, RstError, RstJson,
};
use dbap::synth::micro_k002;
use dbap::tree::validate_heads;
use dbap::Language;
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest matrix the exhaustive decoder is run on.
pub const BRUTE_FORCE_LIMIT: usize = 7;

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Rst(#[from] RstError),
    #[error(transparent)]
    Parser(#[from] ParserError),
}

type Result<T> = std::result::Result<T, DemoError>;

#[derive(Debug, Serialize)]
struct Decoded {
    heads: Vec<usize>,
    score: f64,
    valid: bool,
}

fn decoded(scores: &[Vec<f64>], heads: Vec<usize>) -> Decoded {
    Decoded {
        score: tree_score(scores, &heads),
        valid: validate_heads(&heads).is_ok(),
        heads,
    }
}

/// Decodes an `n x (n + 1)` score matrix (rows are dependents, column 0 is
/// the root) with the tree decoder and with per-row argmax.
pub fn decode(scores_json: &str) -> Result<String> {
    let scores: Vec<Vec<f64>> = serde_json::from_str(scores_json)?;
    let n = scores.len();
    if n == 0 {
        return Err(DemoError::Input("empty matrix".into()));
    }
    if let Some(i) = scores.iter().position(|r| r.len() != n + 1) {
        return Err(DemoError::Input(format!(
            "row {} has {} columns, expected {}",
            i + 1,
            scores[i].len(),
            n + 1
        )));
    }
    if scores.iter().flatten().any(|v| !v.is_finite()) {
        return Err(DemoError::Input("scores must be finite".into()));
    }
    let exhaustive =
        (n <= BRUTE_FORCE_LIMIT).then(|| decoded(&scores, brute_force_heads(&scores).0));
    Ok(json!({
        "mst": decoded(&scores, decode_heads(&scores)),
        "greedy": decoded(&scores, greedy_heads(&scores)),
        "exhaustive": exhaustive,
    })
    .to_string())
}

fn language(code: &str) -> Result<Language> {
    code.parse().map_err(DemoError::Input)
}

/// Dependency conversion of an RST tree plus its labelled adjacency, with
/// relations resolved against the inventory of `lang` (`en` or `ru`).
pub fn rst_dependencies(rst_json: &str, lang: &str) -> Result<String> {
    let json: RstJson = serde_json::from_str(rst_json)?;
    let tree = rst_from_json(&json)?;
    let deps = to_dependencies(&tree);
    let inventory = RelationInventory::for_language(language(lang)?);
    let adj = adjacency(&deps, &inventory, deps.len())?;
    let arcs: Vec<_> = (0..adj.n)
        .flat_map(|i| (0..adj.n).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            adj.forward_label(i, j).map(
                |r| json!({"dependent": i + 1, "head": j + 1, "label": inventory.directed_name(r)}),
            )
        })
        .collect();
    Ok(json!({
        "doc_id": json.doc_id,
        "leaves": tree.leaves(),
        "heads": deps.heads,
        "relations": deps.relations,
        "arcs": arcs,
        "directed_labels": adj.k,
    })
    .to_string())
}

/// Re-segments an annotated document into the leaves of an EDU-level RST
/// tree and carries its argument tree over, linking the extra units with
/// same-arg arcs.
pub fn same_arg(document_json: &str, rst_json: &str) -> Result<String> {
    let (doc, tree) = document_from_json(serde_json::from_str::<DocumentJson>(document_json)?)?;
    let tree =
        tree.ok_or_else(|| DemoError::Input(format!("{} has no argument annotation", doc.id)))?;
    let rst = rst_from_json(&serde_json::from_str(rst_json)?)?;
    let edus = edu_document(&doc, &rst)?;
    let deps = to_dependencies(&rst);
    let edu_spans: Vec<(usize, usize)> = edus.units.iter().map(|u| u.span).collect();
    let adu_spans: Vec<(usize, usize)> = doc.units.iter().map(|u| u.span).collect();
    let edu_tree = attach_same_arg(&deps, &edu_spans, &adu_spans, &tree)?;
    let units: Vec<_> = edus
        .units
        .iter()
        .zip(edu_tree.heads.iter().zip(&edu_tree.functions))
        .map(|(u, (h, f))| json!({"text": u.text, "head": h, "function": f}))
        .collect();
    Ok(json!({ "doc_id": doc.id, "units": units }).to_string())
}

/// The bundled micro-text and its EDU-level RST tree, as the inputs the
/// other operations expect.
pub fn example() -> String {
    let k = micro_k002();
    json!({
        "document": document_to_json(&k.document, Some(&k.tree)),
        "rst": rst_to_json(&k.document.id, &k.rst),
    })
    .to_string()
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = decode)]
pub fn decode_js(scores_json: &str) -> std::result::Result<String, JsError> {
    js(decode(scores_json))
}

#[wasm_bindgen(js_name = rstDependencies)]
pub fn rst_dependencies_js(rst_json: &str, lang: &str) -> std::result::Result<String, JsError> {
    js(rst_dependencies(rst_json, lang))
}

#[wasm_bindgen(js_name = sameArg)]
pub fn same_arg_js(document_json: &str, rst_json: &str) -> std::result::Result<String, JsError> {
    js(same_arg(document_json, rst_json))
}

#[wasm_bindgen(js_name = example)]
pub fn example_js() -> String {
    example()
}

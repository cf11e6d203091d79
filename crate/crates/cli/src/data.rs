use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dbap::corpus::{bundle_variants, read_document};
use dbap::encoder::{load_embedding_files, EmbeddingProvider, HashEncoder};
use dbap::parser::{attach_same_arg, edu_document, SegmentationMode};
use dbap::rst::{reduce_to_segmentation, rst_from_json, to_dependencies, RstJson};
use dbap::{ArgumentTree, Document, Language, RstDependencies, RstNode, Variant, VariantGroup};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Files in `dir` with extension `ext`, sorted by name.
pub fn files_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_file()
            && path
                .extension()
                .is_some_and(|x| x.eq_ignore_ascii_case(ext))
        {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Every document bundle in `dir`, with its tree when annotated.
pub fn load_documents(dir: &Path) -> Result<Vec<(Document, Option<ArgumentTree>)>> {
    let mut docs = Vec::new();
    for path in files_with_extension(dir, "json")? {
        docs.push(read_document(&path)?);
    }
    if docs.is_empty() {
        return Err(CliError::data(format!(
            "{}: no document bundles",
            dir.display()
        )));
    }
    Ok(docs)
}

/// Annotated originals grouped with their paraphrases.
pub fn load_groups(dir: &Path) -> Result<Vec<VariantGroup>> {
    let mut originals = Vec::new();
    let mut variants = Vec::new();
    for (doc, tree) in load_documents(dir)? {
        match (doc.variant, tree) {
            (Variant::Original, Some(tree)) => originals.push((doc, tree)),
            (Variant::Original, None) => {
                return Err(CliError::data(format!(
                    "{}: original without an argument tree",
                    doc.id
                )))
            }
            (_, _) => variants.push(doc),
        }
    }
    Ok(bundle_variants(originals, variants)?)
}

pub fn corpus_language(groups: &[VariantGroup]) -> Result<Language> {
    let first = groups
        .first()
        .ok_or_else(|| CliError::data("empty corpus"))?
        .original
        .language;
    if let Some(g) = groups
        .iter()
        .find(|g| g.documents().any(|d| d.language != first))
    {
        return Err(CliError::data(format!(
            "{}: corpus mixes languages",
            g.original.id
        )));
    }
    Ok(first)
}

/// Discourse dependencies already aligned with a document's units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyFile {
    pub doc_id: String,
    #[serde(flatten)]
    pub dependencies: RstDependencies,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RstSource {
    Tree(RstNode),
    Dependencies(RstDependencies),
}

/// Discourse structures by document id; a document may have several
/// variants, kept in file-name order.
pub fn load_rst_dir(dir: &Path) -> Result<BTreeMap<String, Vec<RstSource>>> {
    let mut out: BTreeMap<String, Vec<RstSource>> = BTreeMap::new();
    for path in files_with_extension(dir, "json")? {
        let value: serde_json::Value = read_json(&path)?;
        let (doc_id, source) = if value.get("leaves").is_some() {
            let json: RstJson =
                serde_json::from_value(value).map_err(|e| CliError::io(&path, e))?;
            let tree = rst_from_json(&json).map_err(|e| CliError::io(&path, e))?;
            (json.doc_id, RstSource::Tree(tree))
        } else {
            let file: DependencyFile =
                serde_json::from_value(value).map_err(|e| CliError::io(&path, e))?;
            file.dependencies
                .validate()
                .map_err(|e| CliError::io(&path, e))?;
            (file.doc_id, RstSource::Dependencies(file.dependencies))
        };
        out.entry(doc_id).or_default().push(source);
    }
    Ok(out)
}

/// Dependencies over the units of `doc`, reducing a finer tree to the
/// document's segmentation when needed.
pub fn unit_dependencies(source: &RstSource, doc: &Document) -> Result<RstDependencies> {
    let deps = match source {
        RstSource::Dependencies(d) => d.clone(),
        RstSource::Tree(tree) => {
            let spans: Vec<(usize, usize)> = doc.units.iter().map(|u| u.span).collect();
            if tree.leaves() == spans {
                to_dependencies(tree)
            } else {
                to_dependencies(
                    &reduce_to_segmentation(tree, &doc.units)
                        .map_err(|e| CliError::data(format!("{}: {e}", doc.id)))?,
                )
            }
        }
    };
    if deps.len() != doc.len() {
        return Err(CliError::data(format!(
            "{}: discourse structure has {} units, document has {}",
            doc.id,
            deps.len(),
            doc.len()
        )));
    }
    Ok(deps)
}

fn first_source<'a>(rst: &'a BTreeMap<String, Vec<RstSource>>, id: &str) -> Result<&'a RstSource> {
    rst.get(id)
        .and_then(|v| v.first())
        .ok_or_else(|| CliError::data(format!("{id}: no discourse structure in --rst-dir")))
}

fn edu_tree<'a>(rst: &'a BTreeMap<String, Vec<RstSource>>, doc: &Document) -> Result<&'a RstNode> {
    match first_source(rst, &doc.id)? {
        RstSource::Tree(t) => Ok(t),
        RstSource::Dependencies(_) => Err(CliError::data(format!(
            "{}: end-to-end segmentation needs a discourse tree with spans, not bare dependencies",
            doc.id
        ))),
    }
}

/// Units and discourse dependencies a parser sees for one document.
pub fn segment(
    doc: &Document,
    rst: Option<&BTreeMap<String, Vec<RstSource>>>,
    segmentation: SegmentationMode,
) -> Result<(Document, Option<RstDependencies>)> {
    match (segmentation, rst) {
        (SegmentationMode::Gold, None) => Ok((doc.clone(), None)),
        (SegmentationMode::Gold, Some(rst)) => {
            let deps = match rst.get(&doc.id).and_then(|v| v.first()) {
                Some(src) => Some(unit_dependencies(src, doc)?),
                None => None,
            };
            Ok((doc.clone(), deps))
        }
        (SegmentationMode::EndToEnd, None) => {
            Err(CliError::usage("end-to-end segmentation needs --rst-dir"))
        }
        (SegmentationMode::EndToEnd, Some(rst)) => {
            let tree = edu_tree(rst, doc)?;
            let edus = edu_document(doc, tree)?;
            Ok((edus, Some(to_dependencies(tree))))
        }
    }
}

/// Corpus in the parser's view: groups over the chosen segmentation and
/// the discourse dependencies of every document that has them.
pub fn prepare(
    groups: Vec<VariantGroup>,
    rst: Option<&BTreeMap<String, Vec<RstSource>>>,
    segmentation: SegmentationMode,
) -> Result<(Vec<VariantGroup>, BTreeMap<String, RstDependencies>)> {
    let mut deps = BTreeMap::new();
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        let (original, d) = segment(&g.original, rst, segmentation)?;
        let tree = match segmentation {
            SegmentationMode::Gold => g.tree.clone(),
            SegmentationMode::EndToEnd => {
                let edu_spans: Vec<(usize, usize)> =
                    original.units.iter().map(|u| u.span).collect();
                let adu_spans: Vec<(usize, usize)> =
                    g.original.units.iter().map(|u| u.span).collect();
                let edu_deps = d.as_ref().expect("end-to-end always has dependencies");
                attach_same_arg(edu_deps, &edu_spans, &adu_spans, &g.tree)?
            }
        };
        if let Some(d) = d {
            deps.insert(original.id.clone(), d);
        }
        let mut variants = Vec::with_capacity(g.variants.len());
        for v in &g.variants {
            let (v2, d) = segment(v, rst, segmentation)?;
            if v2.len() != original.len() {
                return Err(CliError::data(format!(
                    "{}: {} units after segmentation, its original has {}",
                    v.id,
                    v2.len(),
                    original.len()
                )));
            }
            if let Some(d) = d {
                deps.insert(v2.id.clone(), d);
            }
            variants.push(v2);
        }
        out.push(VariantGroup {
            original,
            variants,
            tree,
        });
    }
    Ok((out, deps))
}

/// File embeddings when paths are given, the hash encoder otherwise.
pub fn provider(paths: &[PathBuf], hash_dim: usize) -> Result<Box<dyn EmbeddingProvider>> {
    if paths.is_empty() {
        Ok(Box::new(HashEncoder::new(hash_dim, 0)?))
    } else {
        Ok(Box::new(load_embedding_files(paths)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dbap::corpus::write_document;
    use dbap::synth::micro_k002;

    #[test]
    fn dependency_file_round_trip() {
        let deps = micro_k002().edu_dependencies();
        let file = DependencyFile {
            doc_id: "x".into(),
            dependencies: deps,
        };
        let text = serde_json::to_string(&file).unwrap();
        assert!(text.contains("\"heads\""));
        assert_eq!(serde_json::from_str::<DependencyFile>(&text).unwrap(), file);
    }

    #[test]
    fn micro_tree_reduces_to_its_units() {
        let k002 = micro_k002();
        let deps = unit_dependencies(&RstSource::Tree(k002.rst.clone()), &k002.document).unwrap();
        assert_eq!(deps.len(), 5);
        assert_eq!(deps.heads[0], 0);
    }

    #[test]
    fn end_to_end_preparation_adds_same_arg_units() {
        let k002 = micro_k002();
        let mut rst = BTreeMap::new();
        rst.insert(
            k002.document.id.clone(),
            vec![RstSource::Tree(k002.rst.clone())],
        );
        let group = VariantGroup {
            original: k002.document.clone(),
            variants: vec![],
            tree: k002.tree.clone(),
        };
        let (groups, deps) = prepare(vec![group], Some(&rst), SegmentationMode::EndToEnd).unwrap();
        assert_eq!(groups[0].original.len(), 8);
        assert_eq!(groups[0].tree.len(), 8);
        assert_eq!(deps[&k002.document.id].len(), 8);
    }

    #[test]
    fn originals_need_trees() {
        let k002 = micro_k002();
        let dir = tempfile::tempdir().unwrap();
        write_document(&dir.path().join("a.json"), &k002.document, None).unwrap();
        let e = load_groups(dir.path()).unwrap_err();
        assert_eq!(e.kind.exit_code(), 3);
    }
}

use crate::corpus::{ArgumentFunction, ArgumentTree};
use crate::rst::{assign_to_segments, RstDependencies};
use crate::tree;

use super::roles::infer_roles;
use super::ParserError;

/// Lifts an ADU-level argument tree to the EDU segmentation of an RST tree.
///
/// Each ADU's head EDU is the shallowest (then leftmost) of its EDUs whose
/// RST head lies outside the ADU; it carries the ADU's arc and function to
/// the head EDU of the parent ADU. Every other EDU of the ADU becomes a
/// `SameArg` dependent of its RST head when that head is inside the ADU and
/// of the ADU head EDU otherwise.
pub fn attach_same_arg(
    rst_edu: &RstDependencies,
    edu_spans: &[(usize, usize)],
    adu_spans: &[(usize, usize)],
    adu_tree: &ArgumentTree,
) -> Result<ArgumentTree, ParserError> {
    let doc = &adu_tree.doc_id;
    if rst_edu.len() != edu_spans.len() {
        return Err(ParserError::Alignment(format!(
            "{doc}: {} RST units but {} EDU spans",
            rst_edu.len(),
            edu_spans.len()
        )));
    }
    if adu_tree.len() != adu_spans.len() {
        return Err(ParserError::Alignment(format!(
            "{doc}: {} ADU spans but argument tree over {} units",
            adu_spans.len(),
            adu_tree.len()
        )));
    }
    tree::validate_heads(&rst_edu.heads)
        .map_err(|e| ParserError::Structure(format!("{doc}: RST {e}")))?;
    adu_tree.validate()?;

    let owner = assign_to_segments(edu_spans, adu_spans);
    let depth = tree::depths(&rst_edu.heads);
    let mut head_edu = vec![None; adu_spans.len()];
    for (e, &a) in owner.iter().enumerate() {
        let unit = e + 1;
        let h = rst_edu.heads[e];
        if h != 0 && owner[h - 1] == a {
            continue;
        }
        match head_edu[a] {
            Some(cur) if depth[cur - 1] <= depth[e] => {}
            _ => head_edu[a] = Some(unit),
        }
    }
    let head_edu = head_edu
        .into_iter()
        .enumerate()
        .map(|(a, h)| {
            h.ok_or_else(|| ParserError::Alignment(format!("{doc}: ADU {} contains no EDU", a + 1)))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let n = edu_spans.len();
    let mut heads = vec![0; n];
    let mut functions = vec![ArgumentFunction::SameArg; n];
    for e in 0..n {
        let unit = e + 1;
        let a = owner[e];
        if head_edu[a] == unit {
            let parent = adu_tree.heads[a];
            heads[e] = if parent == 0 { 0 } else { head_edu[parent - 1] };
            functions[e] = adu_tree.functions[a];
        } else {
            let h = rst_edu.heads[e];
            heads[e] = if h != 0 && owner[h - 1] == a {
                h
            } else {
                head_edu[a]
            };
        }
    }
    let mut out = ArgumentTree::new(doc.clone(), heads, functions)?;
    out.roles = Some(infer_roles(&out)?);
    Ok(out)
}

//! Reduction of EDU-level trees to a coarser (argumentative) segmentation.
//!
//! Every EDU is assigned to the segment covering most of its characters
//! (ties go to the earlier segment; an EDU overlapping no segment joins the
//! nearest preceding one). Maximal subtrees whose EDUs all belong to one
//! segment collapse into a single leaf. When a segment is split over several
//! such subtrees, the one holding the most of the segment's characters is
//! kept and the others are pruned; parents left with one child are replaced
//! by that child.

use crate::corpus::DiscourseUnit;

use super::{Nuclearity, RstChild, RstError, RstNode, SPAN};

fn overlap(a: (usize, usize), b: (usize, usize)) -> usize {
    a.1.min(b.1).saturating_sub(a.0.max(b.0))
}

/// Segment index (0-based) for each fine span.
pub fn assign_to_segments(fine: &[(usize, usize)], segments: &[(usize, usize)]) -> Vec<usize> {
    fine.iter()
        .map(|&span| {
            let mut best = None;
            let mut best_overlap = 0;
            for (i, &seg) in segments.iter().enumerate() {
                let o = overlap(span, seg);
                if o > best_overlap {
                    best_overlap = o;
                    best = Some(i);
                }
            }
            best.unwrap_or_else(|| {
                segments
                    .iter()
                    .rposition(|seg| seg.0 <= span.0)
                    .unwrap_or(0)
            })
        })
        .collect()
}

struct Annotated {
    /// Segment shared by all leaves below, if any.
    segment: Option<usize>,
    /// Characters of that segment covered by this subtree.
    chars: usize,
    children: Vec<Annotated>,
}

fn annotate(
    node: &RstNode,
    leaf_segment: &[usize],
    leaf_chars: &[usize],
    next_leaf: &mut usize,
) -> Annotated {
    match node {
        RstNode::Leaf { .. } => {
            let i = *next_leaf;
            *next_leaf += 1;
            Annotated {
                segment: Some(leaf_segment[i]),
                chars: leaf_chars[i],
                children: Vec::new(),
            }
        }
        RstNode::Internal { children } => {
            let children: Vec<Annotated> = children
                .iter()
                .map(|c| annotate(&c.node, leaf_segment, leaf_chars, next_leaf))
                .collect();
            let first = children[0].segment;
            let uniform = first.is_some() && children.iter().all(|c| c.segment == first);
            Annotated {
                segment: if uniform { first } else { None },
                chars: children.iter().map(|c| c.chars).sum(),
                children,
            }
        }
    }
}

/// Fragments in left-to-right order as `(segment, chars)`.
fn fragments(ann: &Annotated, out: &mut Vec<(usize, usize)>) {
    match ann.segment {
        Some(s) => out.push((s, ann.chars)),
        None => ann.children.iter().for_each(|c| fragments(c, out)),
    }
}

fn rebuild(
    node: &RstNode,
    ann: &Annotated,
    kept: &[Option<usize>],
    segments: &[(usize, usize)],
    next_fragment: &mut usize,
) -> Option<RstNode> {
    if let Some(s) = ann.segment {
        let id = *next_fragment;
        *next_fragment += 1;
        return (kept[s] == Some(id)).then(|| RstNode::leaf(segments[s].0, segments[s].1));
    }
    let RstNode::Internal { children } = node else {
        unreachable!("leaves always carry a segment")
    };
    let mut out: Vec<RstChild> = children
        .iter()
        .zip(&ann.children)
        .filter_map(|(c, a)| {
            rebuild(&c.node, a, kept, segments, next_fragment).map(|node| RstChild {
                node,
                nuclearity: c.nuclearity,
                relation: c.relation.clone(),
            })
        })
        .collect();
    match out.len() {
        0 => None,
        1 => Some(out.pop().expect("one child").node),
        _ => {
            if !out.iter().any(|c| c.nuclearity == Nuclearity::Nucleus) {
                out[0].nuclearity = Nuclearity::Nucleus;
                out[0].relation = SPAN.to_string();
            }
            Some(RstNode::Internal { children: out })
        }
    }
}

/// Collapses the EDU leaves of `tree` to the segmentation given by `adus`.
/// Leaves of the result carry the ADU spans, in ADU order.
pub fn reduce_to_segmentation(tree: &RstNode, adus: &[DiscourseUnit]) -> Result<RstNode, RstError> {
    if adus.is_empty() {
        return Err(RstError::Argument("empty ADU list".into()));
    }
    let segments: Vec<(usize, usize)> = adus.iter().map(|u| u.span).collect();
    let leaves = tree.leaves();
    let leaf_segment = assign_to_segments(&leaves, &segments);
    let leaf_chars: Vec<usize> = leaves
        .iter()
        .zip(&leaf_segment)
        .map(|(&l, &s)| overlap(l, segments[s]))
        .collect();
    let ann = annotate(tree, &leaf_segment, &leaf_chars, &mut 0);

    let mut frags = Vec::new();
    fragments(&ann, &mut frags);
    let mut kept: Vec<Option<usize>> = vec![None; segments.len()];
    let mut best_chars = vec![0usize; segments.len()];
    for (id, &(s, chars)) in frags.iter().enumerate() {
        if kept[s].is_none() || chars > best_chars[s] {
            kept[s] = Some(id);
            best_chars[s] = chars;
        }
    }
    if let Some(missing) = kept.iter().position(Option::is_none) {
        return Err(RstError::Alignment(format!(
            "ADU {:?} contains no discourse unit",
            adus[missing].id
        )));
    }
    let reduced = rebuild(tree, &ann, &kept, &segments, &mut 0)
        .ok_or_else(|| RstError::Alignment("reduction removed every leaf".into()))?;
    debug_assert_eq!(reduced.leaf_count(), adus.len());
    Ok(reduced)
}

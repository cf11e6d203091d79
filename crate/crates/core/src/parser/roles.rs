use crate::corpus::{ArgumentFunction, ArgumentTree, Role};
use crate::tree;

use super::ParserError;

/// Proponent/opponent roles from the labeled tree: the central claim is
/// Pro, an attack takes the opposite of its parent's role, every other arc
/// keeps it.
pub fn infer_roles(t: &ArgumentTree) -> Result<Vec<Role>, ParserError> {
    let root = tree::validate_heads(&t.heads)
        .map_err(|e| ParserError::Structure(format!("{}: {e}", t.doc_id)))?;
    if t.functions.get(root - 1) != Some(&ArgumentFunction::Cc) {
        return Err(ParserError::Structure(format!(
            "{}: root unit is not the central claim",
            t.doc_id
        )));
    }
    let children = tree::children(&t.heads);
    let mut roles = vec![Role::Pro; t.len()];
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        let role = match t.functions[v - 1] {
            ArgumentFunction::Cc => Role::Pro,
            ArgumentFunction::Attack => roles[t.heads[v - 1] - 1].flipped(),
            ArgumentFunction::Support | ArgumentFunction::SameArg => roles[t.heads[v - 1] - 1],
        };
        roles[v - 1] = role;
        stack.extend(&children[v]);
    }
    Ok(roles)
}

/// Roles for possibly malformed trees (greedy ablation output): units
/// unreachable from a root-attached unit default to Pro.
pub fn infer_roles_lenient(t: &ArgumentTree) -> Vec<Role> {
    if let Ok(r) = infer_roles(t) {
        return r;
    }
    let children = tree::children(&t.heads);
    let mut roles = vec![Role::Pro; t.len()];
    let mut seen = vec![false; t.len() + 1];
    let mut stack: Vec<usize> = children[0].clone();
    while let Some(v) = stack.pop() {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        let h = t.heads[v - 1];
        roles[v - 1] = match (h, t.functions[v - 1]) {
            (0, _) => Role::Pro,
            (_, ArgumentFunction::Attack) => roles[h - 1].flipped(),
            _ => roles[h - 1],
        };
        stack.extend(children.get(v).into_iter().flatten());
    }
    roles
}

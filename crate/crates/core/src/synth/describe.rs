use crate::error::{invalid, Result};

use super::{DiffKind, DifferenceOp};

/// Imperative description of how to turn clip `a` into clip `b`: one clause
/// per operation, joined by " and ".
pub fn describe(ops: &[DifferenceOp]) -> Result<String> {
    if ops.is_empty() || ops.len() > 2 {
        return Err(invalid(format!("a description covers 1 or 2 operations, got {}", ops.len())));
    }
    let clauses: Vec<String> = ops.iter().map(clause).collect();
    Ok(clauses.join(" and "))
}

fn clause(op: &DifferenceOp) -> String {
    let p = op.class_id.phrase();
    match op.kind {
        DiffKind::IncBg => format!("increase the sound of {p}"),
        DiffKind::DecBg => format!("decrease the sound of {p}"),
        DiffKind::AddEvent => format!("add {p}"),
        DiffKind::RemoveEvent => format!("remove {p}"),
        DiffKind::IncEvent => format!("make {p} louder"),
        DiffKind::DecEvent => format!("make {p} lower"),
    }
}

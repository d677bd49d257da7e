use serde::Serialize;

use crate::error::{KsError, Result};
use crate::quadrature::GridFunction;

#[derive(Debug, Clone, Serialize)]
pub struct RowComparison {
    pub m: usize,
    pub sup_diff: f64,
    pub budget: f64,
    pub sup_value: f64,
    pub within_budget: bool,
    /// `sup_diff ≤ relative · sup_value`, when a relative threshold was requested.
    pub within_relative: Option<bool>,
}

/// Nodewise comparison of two families of grid functions.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<RowComparison>,
    pub pass: bool,
}

/// Compares `a[k]` with `b[k]` against `budgets[k]` and, optionally, against
/// `relative · sup |b[k]|`.
pub fn compare_rows(
    a: &[&GridFunction],
    b: &[&GridFunction],
    budgets: &[f64],
    relative: Option<f64>,
) -> Result<ComparisonReport> {
    if a.len() != b.len() || a.len() != budgets.len() {
        return Err(KsError::Structural("comparison inputs have different lengths".into()));
    }
    let mut rows = Vec::new();
    for k in 0..a.len() {
        if a[k].values.len() != b[k].values.len() {
            return Err(KsError::Structural(format!("row {} has mismatched sizes", k + 1)));
        }
        let sup_diff = a[k].sup_diff(b[k]);
        let sup_value = b[k].sup_abs();
        rows.push(RowComparison {
            m: a[k].order,
            sup_diff,
            budget: budgets[k],
            sup_value,
            within_budget: sup_diff <= budgets[k],
            within_relative: relative.map(|r| sup_diff <= r * sup_value),
        });
    }
    let pass = rows
        .iter()
        .all(|r| r.within_budget && r.within_relative.unwrap_or(true));
    Ok(ComparisonReport { rows, pass })
}

use std::sync::Arc;

use serde::Serialize;

use crate::error::{KsError, Result};
use crate::quadrature::{xnorm, Grid, GridFunction};

/// Rows `φ_1, .., φ_{m_max}` on one grid; orders above `m_max` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationVector {
    pub grid: Arc<Grid>,
    pub rows: Vec<GridFunction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowSummary {
    pub order: usize,
    pub sup: f64,
    pub min: f64,
}

impl CorrelationVector {
    pub fn zeros(grid: Arc<Grid>, m_max: usize) -> Result<Self> {
        let rows = (1..=m_max)
            .map(|m| GridFunction::zeros(m, grid.clone()))
            .collect::<Result<_>>()?;
        Ok(Self { grid, rows })
    }

    /// `c e_1`: row 1 constant `c`, the rest zero.
    pub fn unit_source(grid: Arc<Grid>, m_max: usize, c: f64) -> Result<Self> {
        let mut v = Self::zeros(grid, m_max)?;
        v.rows[0].values.fill(c);
        Ok(v)
    }

    pub fn from_rows(rows: Vec<GridFunction>) -> Result<Self> {
        let grid = rows
            .first()
            .ok_or_else(|| KsError::Structural("no rows".into()))?
            .grid
            .clone();
        for (k, r) in rows.iter().enumerate() {
            if r.order != k + 1 {
                return Err(KsError::Structural(format!("row {} has order {}", k + 1, r.order)));
            }
            if !(Arc::ptr_eq(&r.grid, &grid) || *r.grid == *grid) {
                return Err(KsError::Structural("rows live on different grids".into()));
            }
        }
        Ok(Self { grid, rows })
    }

    pub fn m_max(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, m: usize) -> &GridFunction {
        &self.rows[m - 1]
    }

    pub fn norm(&self, weight: f64) -> f64 {
        xnorm(&self.rows, weight)
    }

    pub fn scale(&mut self, a: f64) {
        for r in &mut self.rows {
            r.values.iter_mut().for_each(|v| *v *= a);
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut v = self.clone();
        v.scale(a);
        v
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &CorrelationVector) {
        for (r, o) in self.rows.iter_mut().zip(&other.rows) {
            r.values.iter_mut().zip(&o.values).for_each(|(x, y)| *x += a * y);
        }
    }

    pub fn sub(&self, other: &CorrelationVector) -> Self {
        let mut v = self.clone();
        v.axpy(-1.0, other);
        v
    }

    /// `max_m w^m sup |self_m - other_m|`.
    pub fn distance(&self, other: &CorrelationVector, weight: f64) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .fold(0.0, |acc, (a, b)| acc.max(weight.powi(a.order as i32) * a.sup_diff(b)))
    }

    pub fn summary(&self) -> Vec<RowSummary> {
        self.rows
            .iter()
            .map(|r| RowSummary {
                order: r.order,
                sup: r.sup_abs(),
                min: r.values.iter().copied().fold(f64::INFINITY, f64::min),
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().all(|r| r.values.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{build_grid, Cube};

    #[test]
    fn arithmetic() {
        let g = Arc::new(build_grid(Cube::new(2.0).unwrap(), 2).unwrap());
        let e = CorrelationVector::unit_source(g.clone(), 3, 2.0).unwrap();
        assert_eq!(e.norm(1.5), 3.0);
        let mut v = e.scaled(-0.5);
        v.axpy(1.0, &e);
        assert_eq!(v.row(1).values[0], 1.0);
        assert_eq!(v.distance(&e, 1.0), 1.0);
        assert_eq!(e.sub(&e).norm(2.0), 0.0);
        assert_eq!(e.summary()[0].min, 2.0);
        assert!(CorrelationVector::from_rows(vec![GridFunction::zeros(2, g).unwrap()]).is_err());
    }
}

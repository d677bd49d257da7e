use std::sync::Arc;

use super::{decode_tuple, encode_tuple, Grid, GridFunction};
use crate::error::{KsError, Result};
use crate::par;

/// Maps the nodes of an inner grid onto coinciding nodes of an outer grid.
#[derive(Debug, Clone)]
pub struct ImbeddingSpec {
    pub outer: Arc<Grid>,
    pub inner: Arc<Grid>,
    map: Vec<usize>,
}

impl ImbeddingSpec {
    /// Fails unless every inner node is an outer node (to 1e-12 relative to the outer side).
    pub fn new(outer: Arc<Grid>, inner: Arc<Grid>) -> Result<Self> {
        let tol = 1e-12 * outer.cube.side;
        let map = inner
            .nodes()
            .iter()
            .map(|&p| {
                outer.locate(p, tol).ok_or_else(|| {
                    KsError::Structural(format!(
                        "inner node ({}, {}, {}) is not a node of the outer grid (L = {}, n = {})",
                        p[0], p[1], p[2], outer.cube.side, outer.n
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { outer, inner, map })
    }

    /// Outer index of each inner node.
    pub fn node_map(&self) -> &[usize] {
        &self.map
    }
}

/// Values of `f` at the inner node tuples. No interpolation.
pub fn restrict(spec: &ImbeddingSpec, f: &GridFunction) -> Result<GridFunction> {
    if !(Arc::ptr_eq(&f.grid, &spec.outer) || *f.grid == *spec.outer) {
        return Err(KsError::Structural("function does not live on the outer grid".into()));
    }
    let (m, nin, nout) = (f.order, spec.inner.len(), spec.outer.len());
    let count = spec.inner.tuple_count(m) as usize;
    let values = par::map_indexed(count, |idx| {
        let mut t = vec![0usize; m];
        decode_tuple(idx, nin, &mut t);
        for x in t.iter_mut() {
            *x = spec.map[*x];
        }
        f.values[encode_tuple(&t, nout)]
    });
    GridFunction::new(m, spec.inner.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{build_grid, Cube};

    fn grid(l: f64, n: usize) -> Arc<Grid> {
        Arc::new(build_grid(Cube::new(l).unwrap(), n).unwrap())
    }

    #[test]
    fn identity_imbedding() {
        let g = grid(2.0, 3);
        let spec = ImbeddingSpec::new(g.clone(), g.clone()).unwrap();
        let f = GridFunction::from_fn(2, g.clone(), |t| (t[0] * 31 + t[1]) as f64).unwrap();
        assert_eq!(restrict(&spec, &f).unwrap().values, f.values);
        let one = GridFunction::constant(2, g.clone(), 1.0).unwrap();
        assert!(restrict(&spec, &one).unwrap().values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn central_block() {
        let outer = grid(2.0, 4);
        let inner = grid(1.0, 2);
        let spec = ImbeddingSpec::new(outer.clone(), inner.clone()).unwrap();
        // central 2x2x2 block of a 4x4x4 grid: axis indices 1 and 2
        let mut expected = Vec::new();
        for ix in 1..3 {
            for iy in 1..3 {
                for iz in 1..3 {
                    expected.push(((ix * 4 + iy) * 4 + iz) as f64);
                }
            }
        }
        let f = GridFunction::from_fn(1, outer, |t| t[0] as f64).unwrap();
        assert_eq!(restrict(&spec, &f).unwrap().values, expected);
    }

    #[test]
    fn mismatched_nodes_are_rejected() {
        let outer = grid(2.0, 3);
        let inner = grid(1.0, 2);
        assert!(matches!(ImbeddingSpec::new(outer, inner), Err(KsError::Structural(_))));
    }

    #[test]
    fn wrong_grid_is_rejected() {
        let spec = ImbeddingSpec::new(grid(2.0, 4), grid(1.0, 2)).unwrap();
        let f = GridFunction::zeros(1, grid(3.0, 6)).unwrap();
        assert!(restrict(&spec, &f).is_err());
    }

    #[test]
    fn nested_restrictions_compose() {
        let (a, b, c) = (grid(4.0, 8), grid(2.0, 4), grid(1.0, 2));
        let ab = ImbeddingSpec::new(a.clone(), b.clone()).unwrap();
        let bc = ImbeddingSpec::new(b, c.clone()).unwrap();
        let ac = ImbeddingSpec::new(a.clone(), c).unwrap();
        let f = GridFunction::from_fn(2, a, |t| (t[0] as f64).sqrt() - 0.1 * t[1] as f64).unwrap();
        let twice = restrict(&bc, &restrict(&ab, &f).unwrap()).unwrap();
        assert_eq!(twice.values, restrict(&ac, &f).unwrap().values);
    }
}

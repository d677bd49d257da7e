//! Cubic boxes, midpoint tensor grids and functions on node tuples.

mod imbedding;
mod io;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::par::{self, NeumaierSum};

pub use imbedding::{restrict, ImbeddingSpec};
pub use io::{read_binary, write_binary, write_csv};

/// Default cap on the number of node tuples any single operation may visit.
pub const DEFAULT_TUPLE_BUDGET: u64 = 1 << 24;

/// Number of tuples summed sequentially before partial sums are combined.
const CHUNK: usize = 4096;

/// The tuple budget, overridable through `KS_MAX_TUPLES`.
pub fn tuple_budget() -> u64 {
    std::env::var("KS_MAX_TUPLES")
        .ok()
        .and_then(|s| s.trim().parse::<u64>().ok())
        .filter(|&b| b > 0)
        .unwrap_or(DEFAULT_TUPLE_BUDGET)
}

/// Fails if `count` exceeds the tuple budget.
pub fn check_budget(count: f64) -> Result<()> {
    let budget = tuple_budget();
    if count > budget as f64 {
        Err(KsError::Budget { tuples: count, budget })
    } else {
        Ok(())
    }
}

/// A cube of side `side` centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub side: f64,
}

impl Cube {
    pub fn new(side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(KsError::InvalidInput(format!("box side must be positive, got {side}")));
        }
        Ok(Self { side })
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(3)
    }
}

/// Midpoint tensor grid with `n^3` nodes and equal weights `(L/n)^3`.
///
/// Node `(ix, iy, iz)` has index `(ix * n + iy) * n + iz`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub cube: Cube,
    pub n: usize,
    pub spacing: f64,
    pub weight: f64,
    nodes: Vec<[f64; 3]>,
}

impl Grid {
    pub fn new(cube: Cube, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(KsError::InvalidInput(format!(
                "need at least 2 nodes per axis, got {n}"
            )));
        }
        let h = cube.side / n as f64;
        let axis: Vec<f64> = (0..n).map(|i| -0.5 * cube.side + (i as f64 + 0.5) * h).collect();
        let mut nodes = Vec::with_capacity(n * n * n);
        for &x in &axis {
            for &y in &axis {
                for &z in &axis {
                    nodes.push([x, y, z]);
                }
            }
        }
        Ok(Self {
            cube,
            n,
            spacing: h,
            weight: h * h * h,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> [f64; 3] {
        self.nodes[i]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        dist(&self.nodes[i], &self.nodes[j])
    }

    /// Number of `m`-tuples of nodes, as a float to survive overflow.
    pub fn tuple_count(&self, m: usize) -> f64 {
        (self.len() as f64).powi(m as i32)
    }

    /// Index of the node at `p`, if `p` is a node up to `tol`.
    pub fn locate(&self, p: [f64; 3], tol: f64) -> Option<usize> {
        let h = self.spacing;
        let mut idx = 0usize;
        for c in p {
            let k = ((c + 0.5 * self.cube.side) / h - 0.5).round();
            if k < 0.0 || k >= self.n as f64 {
                return None;
            }
            let k = k as usize;
            let x = -0.5 * self.cube.side + (k as f64 + 0.5) * h;
            if (x - c).abs() > tol {
                return None;
            }
            idx = idx * self.n + k;
        }
        Some(idx)
    }
}

#[inline]
pub fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Midpoint grid over `cube` with `n` nodes per axis.
pub fn build_grid(cube: Cube, n: usize) -> Result<Grid> {
    Grid::new(cube, n)
}

/// Writes the node indices of tuple `idx` (row-major, first index slowest).
#[inline]
pub fn decode_tuple(mut idx: usize, base: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = idx % base;
        idx /= base;
    }
}

#[inline]
pub fn encode_tuple(nodes: &[usize], base: usize) -> usize {
    nodes.iter().fold(0, |acc, &i| acc * base + i)
}

/// Values of a function of `order` positions on every node tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub order: usize,
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(order: usize, grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(KsError::InvalidInput("grid functions need order >= 1".into()));
        }
        let expected = grid.tuple_count(order);
        if values.len() as f64 != expected {
            return Err(KsError::Structural(format!(
                "order-{order} function needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(KsError::InvalidInput(format!("non-finite value at tuple {i}")));
        }
        Ok(Self { order, grid, values })
    }

    pub fn zeros(order: usize, grid: Arc<Grid>) -> Result<Self> {
        let count = grid.tuple_count(order);
        check_budget(count)?;
        Ok(Self {
            order,
            values: vec![0.0; count as usize],
            grid,
        })
    }

    pub fn constant(order: usize, grid: Arc<Grid>, c: f64) -> Result<Self> {
        let mut f = Self::zeros(order, grid)?;
        f.values.fill(c);
        Ok(f)
    }

    /// Tabulates `f` on all node tuples (in parallel).
    pub fn from_fn<F>(order: usize, grid: Arc<Grid>, f: F) -> Result<Self>
    where
        F: Fn(&[usize]) -> f64 + Sync + Send,
    {
        let count = grid.tuple_count(order);
        check_budget(count)?;
        let base = grid.len();
        let values = par::map_indexed(count as usize, |idx| {
            let mut t = vec![0usize; order];
            decode_tuple(idx, base, &mut t);
            f(&t)
        });
        Self::new(order, grid, values)
    }

    pub fn get(&self, nodes: &[usize]) -> f64 {
        self.values[encode_tuple(nodes, self.grid.len())]
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest `|f(t) - f(σ t)|` over `samples` random tuples and permutations.
    pub fn symmetry_defect(&self, samples: usize, seed: u64) -> f64 {
        use rand::seq::SliceRandom;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let base = self.grid.len();
        let mut t = vec![0usize; self.order];
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let idx = rng.random_range(0..self.values.len());
            decode_tuple(idx, base, &mut t);
            let v = self.values[idx];
            t.shuffle(&mut rng);
            worst = worst.max((v - self.get(&t)).abs());
        }
        worst
    }
}

/// `∫_{Λ^n} f`: the weighted sum over all `n`-tuples of nodes, in fixed
/// row-major order with compensated chunk sums and a pairwise tree on top.
pub fn integrate_n<F>(grid: &Grid, n: usize, f: F) -> Result<f64>
where
    F: Fn(&[usize]) -> f64 + Sync + Send,
{
    if n == 0 {
        return Err(KsError::InvalidInput("integration order must be >= 1".into()));
    }
    let count = grid.tuple_count(n);
    check_budget(count)?;
    let count = count as usize;
    let base = grid.len();
    let chunks = count.div_ceil(CHUNK);
    let partials = par::map_indexed(chunks, |c| {
        let mut t = vec![0usize; n];
        let mut acc = NeumaierSum::new();
        for idx in c * CHUNK..((c + 1) * CHUNK).min(count) {
            decode_tuple(idx, base, &mut t);
            acc.add(f(&t));
        }
        acc.value()
    });
    Ok(par::pairwise_sum(&partials) * grid.weight.powi(n as i32))
}

/// `max_m c^m sup |φ_m|` for rows `φ_1, φ_2, ..` (row `k` has order `k + 1`).
pub fn xnorm(rows: &[GridFunction], c: f64) -> f64 {
    rows.iter()
        .fold(0.0, |acc, f| acc.max(c.powi(f.order as i32) * f.sup_abs()))
}

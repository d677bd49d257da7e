use std::sync::Arc;

use super::vector::CorrelationVector;
use super::{argmax_first, factorial, KsConfig};
use crate::error::{KsError, Result};
use crate::par;
use crate::potentials::{boltzmann, mayer_from_value, PairPotential};
use crate::quadrature::{check_budget, decode_tuple, Grid, GridFunction};

/// Pair quantities for every ordered pair of grid nodes. Coinciding nodes use
/// the clamped separation.
#[derive(Debug, Clone)]
pub struct NodeTable {
    n: usize,
    pub u: Vec<f64>,
    pub boltz: Vec<f64>,
    pub mayer: Vec<f64>,
}

impl NodeTable {
    pub fn new(grid: &Grid, u: &PairPotential, beta: f64) -> Self {
        let n = grid.len();
        let uv = radial_table(grid, |r| u.evaluate(r));
        let boltz = uv.iter().map(|&x| boltzmann(beta, x)).collect();
        let mayer = uv.iter().map(|&x| mayer_from_value(beta, x)).collect();
        Self { n, u: uv, boltz, mayer }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Whether `u >= 0` between all node pairs.
    pub fn nonnegative(&self) -> bool {
        self.u.iter().all(|&x| x >= 0.0)
    }
}

/// `g(|R_i - R_j|)` for all node pairs, row-major.
pub fn radial_table(grid: &Grid, g: impl Fn(f64) -> f64 + Sync + Send) -> Vec<f64> {
    let n = grid.len();
    let rows = par::map_indexed(n, |i| (0..n).map(|j| g(grid.distance(i, j))).collect::<Vec<f64>>());
    rows.concat()
}

/// Compressed lists of kernel weights around each centre node. `a` holds the
/// weights proper; `b` (possibly empty) holds derivative weights on the same support.
#[derive(Debug, Clone)]
pub struct SparseKernel {
    offsets: Vec<usize>,
    nodes: Vec<usize>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl SparseKernel {
    /// Keeps node `i` around centre `j` whenever `a(j, i)` or `b(j, i)` is nonzero.
    pub fn build(n: usize, a: impl Fn(usize, usize) -> f64, b: Option<&dyn Fn(usize, usize) -> f64>) -> Self {
        let mut offsets = Vec::with_capacity(n + 1);
        let (mut nodes, mut av, mut bv) = (Vec::new(), Vec::new(), Vec::new());
        offsets.push(0);
        for j in 0..n {
            for i in 0..n {
                let x = a(j, i);
                let y = b.map_or(0.0, |b| b(j, i));
                if x != 0.0 || y != 0.0 {
                    nodes.push(i);
                    av.push(x);
                    if b.is_some() {
                        bv.push(y);
                    }
                }
            }
            offsets.push(nodes.len());
        }
        Self {
            offsets,
            nodes,
            a: av,
            b: bv,
        }
    }

    pub fn around(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.offsets[j]..self.offsets[j + 1];
        (&self.nodes[r.clone()], &self.a[r])
    }

    fn around_dual(&self, j: usize) -> (&[usize], &[f64], &[f64]) {
        let r = self.offsets[j]..self.offsets[j + 1];
        (&self.nodes[r.clone()], &self.a[r.clone()], &self.b[r])
    }

    pub fn is_dual(&self) -> bool {
        !self.b.is_empty() || self.nodes.is_empty()
    }

    pub fn max_degree(&self) -> usize {
        self.offsets.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    /// `max_j Σ_i |a(j, i)|`.
    pub fn max_l1(&self) -> f64 {
        (0..self.offsets.len() - 1)
            .map(|j| self.around(j).1.iter().map(|x| x.abs()).sum())
            .fold(0.0, f64::max)
    }

    /// `max_j Σ_i |b(j, i)|`.
    pub fn max_l1_dual(&self) -> f64 {
        if self.b.is_empty() {
            return 0.0;
        }
        (0..self.offsets.len() - 1)
            .map(|j| self.around_dual(j).2.iter().map(|x| x.abs()).sum())
            .fold(0.0, f64::max)
    }
}

/// Per-row tuple geometry: the pinned index `j*` and the projected tuple.
#[derive(Debug)]
struct RowGeometry {
    jstar: Vec<u8>,
    proj: Vec<u32>,
}

/// The hierarchy operators on one grid for one potential, with `j*` pinned
/// to a (possibly different) geometry potential.
#[derive(Debug, Clone)]
pub struct KsSystem {
    pub cfg: KsConfig,
    pub grid: Arc<Grid>,
    pub beta: f64,
    pub table: NodeTable,
    kernel: SparseKernel,
    geometry: Arc<Vec<RowGeometry>>,
    d: Vec<Vec<f64>>,
}

impl KsSystem {
    /// Operators for `u`, with `j*` chosen from `u` itself.
    pub fn new(u: &PairPotential, beta: f64, grid: Arc<Grid>, cfg: KsConfig) -> Result<Self> {
        cfg.validate()?;
        if !(beta > 0.0) {
            return Err(KsError::InvalidInput(format!("beta must be positive, got {beta}")));
        }
        let n = grid.len();
        if n > u32::MAX as usize {
            return Err(KsError::InvalidInput("grid too large".into()));
        }
        for m in 1..=cfg.m_max {
            check_budget(grid.tuple_count(m))?;
        }
        let table = NodeTable::new(&grid, u, beta);
        let geometry = Arc::new(
            (1..=cfg.m_max)
                .map(|m| {
                    let rows = par::map_indexed(grid.tuple_count(m) as usize, |idx| {
                        let mut t = [0usize; 8];
                        let t = &mut t[..m];
                        decode_tuple(idx, n, t);
                        let j = if m == 1 {
                            0
                        } else {
                            let s: Vec<f64> = (0..m)
                                .map(|j| {
                                    (0..m)
                                        .filter(|&i| i != j)
                                        .map(|i| table.u[table.index(t[i], t[j])])
                                        .sum()
                                })
                                .collect();
                            argmax_first(&s)
                        };
                        let p = t
                            .iter()
                            .enumerate()
                            .filter(|&(i, _)| i != j)
                            .fold(0usize, |acc, (_, &x)| acc * n + x);
                        (j as u8, p as u32)
                    });
                    let (jstar, proj) = rows.into_iter().unzip();
                    RowGeometry { jstar, proj }
                })
                .collect(),
        );
        Self::assemble(u, beta, grid, cfg, geometry, table)
    }

    /// Operators for `u` keeping this system's `j*` choice.
    pub fn with_potential(&self, u: &PairPotential) -> Result<Self> {
        let table = NodeTable::new(&self.grid, u, self.beta);
        Self::assemble(u, self.beta, self.grid.clone(), self.cfg, self.geometry.clone(), table)
    }

    fn assemble(
        _u: &PairPotential,
        beta: f64,
        grid: Arc<Grid>,
        cfg: KsConfig,
        geometry: Arc<Vec<RowGeometry>>,
        table: NodeTable,
    ) -> Result<Self> {
        let n = grid.len();
        let w = grid.weight;
        let kernel = SparseKernel::build(n, |j, i| w * table.mayer[table.index(i, j)], None);
        let mut sys = Self {
            cfg,
            grid,
            beta,
            table,
            kernel,
            geometry,
            d: Vec::new(),
        };
        let boltz = sys.table.boltz.clone();
        sys.d = (1..=cfg.m_max)
            .map(|m| sys.pinned_reduce(m, &boltz, 1.0, |acc, x| acc * x))
            .collect();
        Ok(sys)
    }

    pub fn m_max(&self) -> usize {
        self.cfg.m_max
    }

    /// `j*` (0-based) of tuple `idx` in row `m`.
    pub fn jstar_of(&self, m: usize, idx: usize) -> usize {
        self.geometry[m - 1].jstar[idx] as usize
    }

    /// Index of the projected tuple (order `m - 1`).
    pub fn proj_of(&self, m: usize, idx: usize) -> usize {
        self.geometry[m - 1].proj[idx] as usize
    }

    /// `d_m` on every tuple of row `m`.
    pub fn d_row(&self, m: usize) -> &[f64] {
        &self.d[m - 1]
    }

    pub fn kernel(&self) -> &SparseKernel {
        &self.kernel
    }

    /// Folds `table[t_i, t_{j*}]` over `i ≠ j*` for every tuple of row `m`.
    pub fn pinned_reduce(
        &self,
        m: usize,
        table: &[f64],
        init: f64,
        op: impl Fn(f64, f64) -> f64 + Sync + Send,
    ) -> Vec<f64> {
        let n = self.grid.len();
        let geo = &self.geometry[m - 1];
        par::map_indexed(self.grid.tuple_count(m) as usize, |idx| {
            let mut t = [0usize; 8];
            let t = &mut t[..m];
            decode_tuple(idx, n, t);
            let j = geo.jstar[idx] as usize;
            (0..m)
                .filter(|&i| i != j)
                .fold(init, |acc, i| op(acc, table[t[i] * n + t[j]]))
        })
    }

    /// `Kφ`: kernel blocks up to `n_max` plus the extension `φ_{m-1}∘Π_m`.
    pub fn apply_k(&self, phi: &CorrelationVector) -> Result<CorrelationVector> {
        self.apply_blocks(&self.kernel, phi, BlockMode::Kernel)
    }

    /// Row `m` multiplied pointwise by `d_m`.
    pub fn apply_d(&self, phi: &CorrelationVector) -> CorrelationVector {
        let mut out = phi.clone();
        for (m, row) in out.rows.iter_mut().enumerate() {
            row.values.iter_mut().zip(&self.d[m]).for_each(|(x, d)| *x *= d);
        }
        out
    }

    /// `A φ = D K φ`.
    pub fn apply_a(&self, phi: &CorrelationVector) -> Result<CorrelationVector> {
        Ok(self.apply_d(&self.apply_k(phi)?))
    }

    /// Applies block rows built from `kernel`. In derivative mode the kernel
    /// must carry derivative weights; the product rule is applied along each
    /// tuple and no extension term is added.
    pub fn apply_blocks(
        &self,
        kernel: &SparseKernel,
        phi: &CorrelationVector,
        mode: BlockMode,
    ) -> Result<CorrelationVector> {
        let m_max = self.cfg.m_max;
        if phi.m_max() != m_max || !(Arc::ptr_eq(&phi.grid, &self.grid) || *phi.grid == *self.grid) {
            return Err(KsError::Structural(
                "vector does not match the system grid or m_max".into(),
            ));
        }
        if mode == BlockMode::Derivative && !kernel.is_dual() {
            return Err(KsError::Structural("derivative blocks need derivative weights".into()));
        }
        let n = self.grid.len();
        for k in 1..=self.cfg.n_max.min(m_max) {
            check_budget(self.grid.tuple_count(k))?;
        }
        let inv_fact: Vec<f64> = (0..=self.cfg.n_max).map(|k| 1.0 / factorial(k)).collect();
        let rows = (1..=m_max)
            .map(|m| {
                let n_top = self.cfg.n_max.min(m_max - m + 1);
                let values = par::map_indexed(self.grid.tuple_count(m) as usize, |idx| {
                    let mut t = [0usize; 8];
                    let t = &mut t[..m];
                    decode_tuple(idx, n, t);
                    let j = self.jstar_of(m, idx);
                    let p = if m == 1 { 0 } else { self.proj_of(m, idx) };
                    let mut acc = [0.0f64; 9];
                    let ctx = Dfs {
                        n,
                        m,
                        n_top,
                        p,
                        phi: &phi.rows,
                        kernel,
                        centre: t[j],
                    };
                    match mode {
                        BlockMode::Kernel => ctx.walk(1, 0, 1.0, &mut acc),
                        BlockMode::Derivative => ctx.walk_dual(1, 0, 1.0, 0.0, &mut acc),
                    }
                    let mut s = 0.0;
                    for d in 1..=n_top {
                        s += acc[d] * inv_fact[d];
                    }
                    if m >= 2 && mode == BlockMode::Kernel {
                        s += phi.rows[m - 2].values[p];
                    }
                    s
                });
                GridFunction::new(m, self.grid.clone(), values)
            })
            .collect::<Result<Vec<_>>>()?;
        CorrelationVector::from_rows(rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockMode {
    Kernel,
    Derivative,
}

struct Dfs<'a> {
    n: usize,
    m: usize,
    n_top: usize,
    p: usize,
    phi: &'a [GridFunction],
    kernel: &'a SparseKernel,
    centre: usize,
}

impl Dfs<'_> {
    /// `acc[d] += Π_{k≤d} a_k · φ_{m+d-1}(Π R, R'_1..R'_d)` over all tuples.
    fn walk(&self, depth: usize, idx: usize, prod: f64, acc: &mut [f64; 9]) {
        let (nodes, a) = self.kernel.around(self.centre);
        let row = &self.phi[self.m + depth - 2].values;
        let base = (self.p * self.n.pow(depth as u32 - 1) + idx) * self.n;
        let mut s = 0.0;
        for (&i, &w) in nodes.iter().zip(a) {
            let pr = prod * w;
            s += pr * row[base + i];
            if depth < self.n_top {
                self.walk(depth + 1, idx * self.n + i, pr, acc);
            }
        }
        acc[depth] += s;
    }

    fn walk_dual(&self, depth: usize, idx: usize, prod: f64, dprod: f64, acc: &mut [f64; 9]) {
        let (nodes, a, b) = self.kernel.around_dual(self.centre);
        let row = &self.phi[self.m + depth - 2].values;
        let base = (self.p * self.n.pow(depth as u32 - 1) + idx) * self.n;
        let mut s = 0.0;
        for ((&i, &w), &dw) in nodes.iter().zip(a).zip(b) {
            let pr = prod * w;
            let dpr = dprod * w + prod * dw;
            if pr == 0.0 && dpr == 0.0 {
                continue;
            }
            s += dpr * row[base + i];
            if depth < self.n_top {
                self.walk_dual(depth + 1, idx * self.n + i, pr, dpr, acc);
            }
        }
        acc[depth] += s;
    }
}

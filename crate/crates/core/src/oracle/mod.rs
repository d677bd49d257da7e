//! Brute-force grand-canonical sums on the quadrature grid and the explicit
//! first-order derivative formulas for `Ξ`, `ρ^(1)` and `ρ^(2)`.
//!
//! Configurations are enumerated as multisets of grid nodes in nondecreasing
//! order; a multiset with multiplicities `k_i` stands for `N!/Π k_i!` ordered tuples.

mod compare;
mod formulas;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::par;
use crate::potentials::{PairPotential, Perturbation, MIN_SEPARATION};
use crate::quadrature::{check_budget, decode_tuple, dist, encode_tuple, Grid, GridFunction};

pub use compare::{compare_rows, ComparisonReport, RowComparison};
pub use formulas::{deriv_rho1, deriv_rho2, deriv_xi, fd_brute, DerivativeOracle};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Largest particle number kept in the grand-canonical sums.
    #[serde(rename = "N_max", alias = "n_max_particles")]
    pub n_max_particles: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { n_max_particles: 6 }
    }
}

impl OracleConfig {
    pub fn validate(&self, m_max: usize) -> Result<()> {
        if self.n_max_particles < 2 {
            return Err(KsError::InvalidInput("N_max must be >= 2".into()));
        }
        if self.n_max_particles < m_max {
            return Err(KsError::InvalidInput(format!(
                "N_max = {} is below the highest requested order {m_max}",
                self.n_max_particles
            )));
        }
        Ok(())
    }
}

/// `Σ_{i<j} u(|R_i - R_j|)`.
pub fn u_total(u: &PairPotential, positions: &[[f64; 3]]) -> f64 {
    pair_sum(positions, |r| u.evaluate(r))
}

/// `Σ_{i<j} v(|R_i - R_j|)`.
pub fn v_total(v: &Perturbation, positions: &[[f64; 3]]) -> f64 {
    pair_sum(positions, |r| v.evaluate(r))
}

fn pair_sum(positions: &[[f64; 3]], g: impl Fn(f64) -> f64) -> f64 {
    let mut s = 0.0;
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            s += g(dist(&positions[i], &positions[j]).max(MIN_SEPARATION));
        }
    }
    s
}

/// Boltzmann factors between all node pairs.
struct PairBoltzmann {
    n: usize,
    b: Vec<f64>,
}

impl PairBoltzmann {
    fn new(grid: &Grid, u: &PairPotential, beta: f64) -> Self {
        let n = grid.len();
        let nodes = grid.nodes();
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let e = u.evaluate(dist(&nodes[i], &nodes[j]).max(MIN_SEPARATION));
                b[i * n + j] = if e == f64::INFINITY { 0.0 } else { (-beta * e).exp() };
            }
        }
        Self { n, b }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.b[i * self.n + j]
    }

    /// Boltzmann weight of the fixed nodes among themselves.
    fn internal(&self, nodes: &[usize]) -> f64 {
        let mut p = 1.0;
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                p *= self.get(nodes[i], nodes[j]);
            }
        }
        p
    }
}

/// `Σ_{k ≤ k_max} x^k C(n + k - 1, k)`-style count of multisets of size up to `k_max`.
fn multiset_count(n: usize, k_max: usize) -> f64 {
    let mut total = 1.0;
    let mut c = 1.0;
    for k in 1..=k_max {
        c *= (n + k - 1) as f64 / k as f64;
        total += c;
    }
    total
}

/// Sums `Σ_S Π_{x∈S} Π_{y∈fixed∪S, y before x} B(x, y) / Π mult!` over free
/// multisets `S` by size.
fn free_sums(tab: &PairBoltzmann, fixed: &[usize], k_max: usize) -> Vec<f64> {
    let mut acc = vec![0.0; k_max + 1];
    let mut chosen = Vec::with_capacity(k_max);
    walk(tab, fixed, &mut chosen, 0, 1.0, 1, &mut acc, k_max);
    acc
}

#[allow(clippy::too_many_arguments)]
fn walk(
    tab: &PairBoltzmann,
    fixed: &[usize],
    chosen: &mut Vec<usize>,
    start: usize,
    weight: f64,
    mult: usize,
    acc: &mut [f64],
    k_max: usize,
) {
    acc[chosen.len()] += weight;
    if chosen.len() == k_max {
        return;
    }
    for x in start..tab.n {
        let mut w = weight;
        for &y in fixed.iter().chain(chosen.iter()) {
            w *= tab.get(x, y);
            if w == 0.0 {
                break;
            }
        }
        if w == 0.0 {
            continue;
        }
        let m = if chosen.last() == Some(&x) { mult + 1 } else { 1 };
        w /= m as f64;
        chosen.push(x);
        walk(tab, fixed, chosen, x, w, m, acc, k_max);
        chosen.pop();
    }
}

/// `Ξ = Σ_N (z^N / N!) ∫ e^{-βU_N}` truncated at `N_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionFunction {
    pub xi: f64,
    /// Bound on the omitted terms `Σ_{N>N_max} (z|Λ| e^{βB})^N / N!`.
    pub tail: f64,
}

pub fn partition_function(
    cfg: &OracleConfig,
    grid: &Grid,
    u: &PairPotential,
    beta: f64,
    z: f64,
    stability_b: f64,
) -> Result<PartitionFunction> {
    cfg.validate(0)?;
    check_budget(multiset_count(grid.len(), cfg.n_max_particles))?;
    let tab = PairBoltzmann::new(grid, u, beta);
    let sums = free_sums(&tab, &[], cfg.n_max_particles);
    let zw = z * grid.weight;
    let xi = power_series(&sums, zw);
    let last = sums[cfg.n_max_particles] * zw.powi(cfg.n_max_particles as i32);
    let tail = series_tail(
        &tab,
        last,
        z * grid.cube.volume(),
        beta * stability_b,
        cfg.n_max_particles,
        0,
    );
    Ok(PartitionFunction { xi, tail })
}

/// Bound on `Σ_{k>k_max}` of a grand-canonical series in the number of free
/// particles. With `e^{-βu} ≤ 1` on the grid, adding a particle multiplies
/// the `k`-th term by at most `z|Λ|/k`, so the tail is controlled by the last
/// computed term. Otherwise each configuration weight is bounded through
/// stability by `e^{βB N}`.
fn series_tail(tab: &PairBoltzmann, last: f64, z_vol: f64, beta_b: f64, k_max: usize, fixed: usize) -> f64 {
    if tab.b.iter().all(|&x| x <= 1.0) {
        let mut term = last;
        let mut sum = 0.0;
        let mut k = k_max;
        loop {
            k += 1;
            term *= z_vol / k as f64;
            sum += term;
            if term <= 1e-18 * sum || term == 0.0 || k > k_max + 400 {
                return sum;
            }
        }
    } else {
        let eb = beta_b.exp();
        // z^m e^{βBm} is folded into the caller's prefactor for m fixed particles
        let _ = fixed;
        crate::ks::exp_tail(z_vol * eb, k_max)
    }
}

fn power_series(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Truncated grand-canonical sums: `Ξ`, the numerators `Z^(m)` and `ρ^(m)`.
#[derive(Debug, Clone)]
pub struct GrandCanonicalSums {
    pub grid: Arc<Grid>,
    pub beta: f64,
    pub z: f64,
    pub xi: PartitionFunction,
    /// `Z^(m)` for `m = 1..=m_max`.
    pub numerators: Vec<GridFunction>,
    pub rho: Vec<GridFunction>,
    /// Uniform bound on `|ρ^(m) - ρ^(m)_{N_max}|`.
    pub rho_tail: Vec<f64>,
}

impl GrandCanonicalSums {
    pub fn compute(
        cfg: &OracleConfig,
        grid: Arc<Grid>,
        u: &PairPotential,
        beta: f64,
        z: f64,
        stability_b: f64,
        m_max: usize,
    ) -> Result<Self> {
        cfg.validate(m_max)?;
        if !(z > 0.0) {
            return Err(KsError::InvalidInput(format!("activity must be positive, got {z}")));
        }
        let xi = partition_function(cfg, &grid, u, beta, z, stability_b)?;
        let tab = PairBoltzmann::new(&grid, u, beta);
        let (mut numerators, mut rho, mut rho_tail) = (Vec::new(), Vec::new(), Vec::new());
        let vol = grid.cube.volume();
        let eb = (beta * stability_b).exp();
        for m in 1..=m_max {
            let (zm, last) = numerator(&tab, &grid, cfg.n_max_particles, m, z)?;
            let k0 = cfg.n_max_particles - m;
            let dz = if tab.b.iter().all(|&x| x <= 1.0) {
                series_tail(&tab, last, z * vol, 0.0, k0, m)
            } else {
                // Σ_{N>N_max} z^N |Λ|^{N-m} e^{βBN} / (N-m)!
                (z * eb).powi(m as i32) * series_tail(&tab, 0.0, z * vol, beta * stability_b, k0, m)
            };
            let r = GridFunction::new(m, grid.clone(), zm.values.iter().map(|v| v / xi.xi).collect())?;
            let sup = r.sup_abs();
            rho_tail.push(dz / xi.xi + sup * xi.tail / xi.xi);
            rho.push(r);
            numerators.push(zm);
        }
        Ok(Self {
            grid,
            beta,
            z,
            xi,
            numerators,
            rho,
            rho_tail,
        })
    }

    pub fn rho(&self, m: usize) -> &GridFunction {
        &self.rho[m - 1]
    }
}

/// `Z^(m)` on all ordered tuples, computed on sorted tuples and copied to
/// permutations, together with the largest last series term.
fn numerator(tab: &PairBoltzmann, grid: &Arc<Grid>, n_max: usize, m: usize, z: f64) -> Result<(GridFunction, f64)> {
    let n = grid.len();
    let count = grid.tuple_count(m);
    check_budget(count)?;
    let sorted_count = multiset_count(n, m) - multiset_count(n, m.saturating_sub(1));
    check_budget(sorted_count * multiset_count(n, n_max - m))?;
    let zw = z * grid.weight;
    let zm = z.powi(m as i32);
    let k_max = n_max - m;
    let sorted = par::map_indexed(count as usize, |idx| {
        let mut t = vec![0; m];
        decode_tuple(idx, n, &mut t);
        if t.windows(2).any(|w| w[0] > w[1]) {
            return (f64::NAN, 0.0);
        }
        let inner = tab.internal(&t);
        if inner == 0.0 {
            return (0.0, 0.0);
        }
        let sums = free_sums(tab, &t, k_max);
        let scale = zm * inner;
        (
            scale * power_series(&sums, zw),
            scale * sums[k_max] * zw.powi(k_max as i32),
        )
    });
    let last = sorted.iter().fold(0.0f64, |a, &(_, l)| a.max(l));
    let values = par::map_indexed(count as usize, |idx| {
        if !sorted[idx].0.is_nan() {
            return sorted[idx].0;
        }
        let mut t = vec![0; m];
        decode_tuple(idx, n, &mut t);
        t.sort_unstable();
        sorted[encode_tuple(&t, n)].0
    });
    Ok((GridFunction::new(m, grid.clone(), values)?, last))
}

/// `ρ^(m)` from the truncated sums, with its truncation bound.
pub fn brute_rho(
    cfg: &OracleConfig,
    grid: Arc<Grid>,
    u: &PairPotential,
    beta: f64,
    z: f64,
    stability_b: f64,
    m: usize,
) -> Result<(GridFunction, f64)> {
    let s = GrandCanonicalSums::compute(cfg, grid, u, beta, z, stability_b, m)?;
    Ok((s.rho[m - 1].clone(), s.rho_tail[m - 1]))
}

//! Kirkwood–Salsburg operators on a midpoint grid and the Neumann-series
//! solution of `(I - z D K) ρ = z e_1`.

mod certify;
mod solve;
mod system;
mod vector;

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::potentials::{boltzmann, mayer_from_value, PairPotential};
use crate::quadrature::dist;

pub use certify::{operator_norm_certificates, NormCertificate};
pub use solve::{
    grid_kernel_norm, neumann, solve_ks, truncation_bounds, KsSolution, NeumannRun, SolveReport, TailBounds,
};
pub use system::{radial_table, BlockMode, KsSystem, NodeTable, SparseKernel};
pub use vector::CorrelationVector;

/// Truncation and iteration controls of the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KsConfig {
    /// Highest correlation order kept; higher orders are closed by zero.
    pub m_max: usize,
    /// Highest kernel order `n` in each block row.
    pub n_max: usize,
    /// Stop once successive iterates differ by at most this in the weighted norm.
    pub neumann_tol: f64,
    pub max_iters: usize,
}

impl Default for KsConfig {
    fn default() -> Self {
        Self {
            m_max: 3,
            n_max: 4,
            neumann_tol: 1e-14,
            max_iters: 500,
        }
    }
}

impl KsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_max < 2 {
            return Err(KsError::InvalidInput(format!("m_max must be >= 2, got {}", self.m_max)));
        }
        if self.m_max > 8 {
            return Err(KsError::InvalidInput(format!(
                "m_max above 8 is not supported, got {}",
                self.m_max
            )));
        }
        if self.n_max < 1 {
            return Err(KsError::InvalidInput("n_max must be >= 1".into()));
        }
        if !(self.neumann_tol > 0.0) {
            return Err(KsError::InvalidInput("neumann_tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(KsError::InvalidInput("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Stability/regularity constants entering the norm and the a-priori bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub beta: f64,
    pub c_beta: f64,
    pub stability_b: f64,
}

impl Constants {
    /// Weight `c` of the sequence norm `max_m c^m sup|φ_m|`; falls back to 1
    /// when `c_β = 0` (no interaction).
    pub fn weight(&self) -> f64 {
        if self.c_beta > 0.0 {
            self.c_beta
        } else {
            1.0
        }
    }

    /// `e^{2βB}`, the bound on `d_m` and on `‖D‖`.
    pub fn d_bound(&self) -> f64 {
        (2.0 * self.beta * self.stability_b).exp()
    }

    /// `z c e^{2βB+1}` with `c` the norm weight.
    pub fn contraction(&self, z: f64) -> f64 {
        z * self.weight() * (2.0 * self.beta * self.stability_b + 1.0).exp()
    }

    pub fn z_max(&self) -> Option<f64> {
        (self.c_beta > 0.0).then(|| 1.0 / (self.c_beta * (2.0 * self.beta * self.stability_b + 1.0).exp()))
    }
}

/// `Σ_{n > n_max} x^n / n!`, summed until terms vanish.
pub fn exp_tail(x: f64, n_max: usize) -> f64 {
    let mut term = 1.0;
    for k in 1..=n_max {
        term *= x / k as f64;
    }
    let mut sum = 0.0;
    let mut k = n_max;
    loop {
        k += 1;
        term *= x / k as f64;
        sum += term;
        if term <= 1e-18 * sum || k > n_max + 400 {
            return sum;
        }
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Index (1-based) of the particle with the largest interaction sum
/// `S_j = Σ_{i≠j} u(|R_i - R_j|)`; ties go to the lowest index.
pub fn jstar(u: &PairPotential, positions: &[[f64; 3]]) -> Result<usize> {
    let m = positions.len();
    if m < 2 {
        return Err(KsError::InvalidInput(format!("need at least two positions, got {m}")));
    }
    for i in 0..m {
        for j in 0..i {
            if positions[i] == positions[j] {
                return Err(KsError::Degenerate(format!(
                    "positions {} and {} coincide",
                    j + 1,
                    i + 1
                )));
            }
        }
    }
    let sums: Vec<f64> = (0..m)
        .map(|j| {
            (0..m)
                .filter(|&i| i != j)
                .map(|i| u.evaluate(dist(&positions[i], &positions[j])))
                .sum()
        })
        .collect();
    Ok(argmax_first(&sums) + 1)
}

pub(crate) fn argmax_first(s: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in s.iter().enumerate().skip(1) {
        if v > s[best] {
            best = j;
        }
    }
    best
}

/// Drops the `jstar`-th (1-based) position, keeping the order of the rest.
pub fn project_pi<T: Copy>(positions: &[T], jstar: usize) -> Result<Vec<T>> {
    if positions.len() < 2 {
        return Err(KsError::Structural("projection needs at least two positions".into()));
    }
    if jstar == 0 || jstar > positions.len() {
        return Err(KsError::InvalidInput(format!(
            "index {jstar} out of range 1..={}",
            positions.len()
        )));
    }
    Ok(positions
        .iter()
        .enumerate()
        .filter(|&(i, _)| i + 1 != jstar)
        .map(|(_, &p)| p)
        .collect())
}

/// `Π_{i≠j*} exp(-β u(|R_i - R_{j*}|))`, with `j*` taken from `geometry`.
pub fn d_m_pinned(geometry: &PairPotential, u: &PairPotential, beta: f64, positions: &[[f64; 3]]) -> Result<f64> {
    if positions.is_empty() {
        return Err(KsError::InvalidInput("d_m needs at least one position".into()));
    }
    if positions.len() == 1 {
        return Ok(1.0);
    }
    let j = jstar(geometry, positions)? - 1;
    Ok((0..positions.len())
        .filter(|&i| i != j)
        .map(|i| boltzmann(beta, u.evaluate(dist(&positions[i], &positions[j]))))
        .product())
}

/// `d_m` with `j*` from `u` itself.
pub fn d_m(u: &PairPotential, beta: f64, positions: &[[f64; 3]]) -> Result<f64> {
    d_m_pinned(u, u, beta, positions)
}

/// `Π_i f(|R'_i - R|)`.
pub fn k_n(u: &PairPotential, beta: f64, r: [f64; 3], rp: &[[f64; 3]]) -> Result<f64> {
    if rp.is_empty() {
        return Err(KsError::InvalidInput("k_n needs n >= 1".into()));
    }
    Ok(rp
        .iter()
        .map(|p| mayer_from_value(beta, u.evaluate(dist(p, &r))))
        .product())
}


#[cfg(test)]
mod operator_tests;

//! Derivatives with respect to the pair potential: pointwise `∂f`, `∂d_m`,
//! `k_n'`, the operators `∂K`, `∂D`, `∂A` on the grid, and the implicit
//! derivative of the distribution functions.

mod remainder;
mod solve;
mod sweep;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{KsError, Result};
use crate::ks::{jstar, radial_table, BlockMode, CorrelationVector, KsSystem, SparseKernel};
use crate::potentials::{boltzmann, mayer_from_value, PairPotential, Perturbation};
use crate::quadrature::dist;

pub use remainder::{
    d_remainder, epsilon_ladder, finite_difference_defect, kn_remainder, least_squares_slope, mayer_remainder,
    mayer_remainder_study, FdRow, FdTable, RemainderStudy,
};
pub use solve::{
    derivative_budget, derivative_rho, derivative_rho_from, DerivativeBudget, DerivativeReport, DerivativeRequest,
    DerivativeResult,
};
pub use sweep::{limit_sweep, SweepRow, SweepSpec, SweepTable};

/// `(∂f v)(r) = -β e^{-βu(r)} v(r)`; zero inside a hard core.
pub fn mayer_derivative(u: &PairPotential, beta: f64, v: &Perturbation, r: f64) -> f64 {
    mayer_derivative_from(beta, u.evaluate(r), v.evaluate(r))
}

#[inline]
fn mayer_derivative_from(beta: f64, u: f64, v: f64) -> f64 {
    let b = boltzmann(beta, u);
    if b == 0.0 {
        0.0
    } else {
        -beta * b * v
    }
}

/// `(∂d_m v)(R) = -β d_m(R) Σ_{i≠j*} v(|R_i - R_{j*}|)` with `j*` from `u`.
pub fn d_derivative(u: &PairPotential, beta: f64, v: &Perturbation, positions: &[[f64; 3]]) -> Result<f64> {
    match positions.len() {
        0 => Err(KsError::InvalidInput("d_m needs at least one position".into())),
        1 => Ok(0.0),
        m => {
            let j = jstar(u, positions)? - 1;
            let mut d = 1.0;
            let mut s = 0.0;
            for i in (0..m).filter(|&i| i != j) {
                let r = dist(&positions[i], &positions[j]);
                d *= boltzmann(beta, u.evaluate(r));
                s += v.evaluate(r);
            }
            Ok(if d == 0.0 { 0.0 } else { -beta * d * s })
        }
    }
}

/// `k_n'(R; R') = Σ_i (∂f v)(|R'_i - R|) Π_{j≠i} f(|R'_j - R|)`.
pub fn k_prime(u: &PairPotential, beta: f64, v: &Perturbation, r: [f64; 3], rp: &[[f64; 3]]) -> Result<f64> {
    if rp.is_empty() {
        return Err(KsError::InvalidInput("k_n' needs n >= 1".into()));
    }
    let (f, df): (Vec<f64>, Vec<f64>) = rp
        .iter()
        .map(|p| {
            let d = dist(p, &r);
            let (uu, vv) = (u.evaluate(d), v.evaluate(d));
            (mayer_from_value(beta, uu), mayer_derivative_from(beta, uu, vv))
        })
        .unzip();
    Ok((0..rp.len())
        .map(|i| {
            (0..rp.len())
                .map(|j| if i == j { df[j] } else { f[j] })
                .product::<f64>()
        })
        .sum())
}

/// `∂K`, `∂D` and `∂A` in one direction `v`, on the grid of a [`KsSystem`].
#[derive(Debug, Clone)]
pub struct DerivativeOperator<'a> {
    sys: &'a KsSystem,
    kernel: SparseKernel,
    /// `Σ_{i≠j*} v` per row, zero where `d_m` vanishes.
    vsum: Vec<Vec<f64>>,
    /// `max |v|` over node pairs with nonzero Boltzmann factor.
    pub v_sup: f64,
    /// `max_i Σ_j w |v|` over the same pairs.
    pub v_l1: f64,
}

impl<'a> DerivativeOperator<'a> {
    pub fn new(sys: &'a KsSystem, v: &Perturbation) -> Result<Self> {
        let grid = &sys.grid;
        let (n, w, beta) = (grid.len(), grid.weight, sys.beta);
        let table = &sys.table;
        let vt = radial_table(grid, |r| v.evaluate(r));
        let live = |k: usize| table.boltz[k] != 0.0;
        if let Some(k) = (0..vt.len()).find(|&k| live(k) && !vt[k].is_finite()) {
            return Err(KsError::InvalidInput(format!(
                "perturbation is not finite at separation {}",
                grid.distance(k / n, k % n)
            )));
        }
        let dfv: Vec<f64> = (0..vt.len())
            .map(|k| if live(k) { -beta * table.boltz[k] * vt[k] } else { 0.0 })
            .collect();
        let a = |j: usize, i: usize| w * table.mayer[table.index(i, j)];
        let b = |j: usize, i: usize| w * dfv[table.index(i, j)];
        let kernel = SparseKernel::build(n, a, Some(&b));
        let masked: Vec<f64> = (0..vt.len()).map(|k| if live(k) { vt[k] } else { 0.0 }).collect();
        let vsum = (1..=sys.m_max())
            .map(|m| {
                let mut s = sys.pinned_reduce(m, &masked, 0.0, |acc, x| acc + x);
                s.iter_mut().zip(sys.d_row(m)).for_each(|(x, &d)| {
                    if d == 0.0 {
                        *x = 0.0
                    }
                });
                s
            })
            .collect();
        let v_sup = masked.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let v_l1 = (0..n)
            .map(|i| (0..n).map(|j| masked[i * n + j].abs()).sum::<f64>() * w)
            .fold(0.0, f64::max);
        Ok(Self {
            sys,
            kernel,
            vsum,
            v_sup,
            v_l1,
        })
    }

    pub fn system(&self) -> &KsSystem {
        self.sys
    }

    /// Kernel holding `w f` and `w ∂f v` around each centre.
    pub fn kernel(&self) -> &SparseKernel {
        &self.kernel
    }

    /// `Σ_{i≠j*} v(|R_i - R_{j*}|)` on row `m` (zero where `d_m = 0`).
    pub fn v_sum_row(&self, m: usize) -> &[f64] {
        &self.vsum[m - 1]
    }

    /// `(∂K v) φ`: blocks with `k_n'`, no extension terms.
    pub fn apply_kprime(&self, phi: &CorrelationVector) -> Result<CorrelationVector> {
        self.sys.apply_blocks(&self.kernel, phi, BlockMode::Derivative)
    }

    /// `(∂D v) φ`: row `m` times `d_m` times `-β Σ_{i≠j*} v`.
    pub fn apply_dprime(&self, phi: &CorrelationVector) -> CorrelationVector {
        let beta = self.sys.beta;
        let mut out = phi.clone();
        for (m, row) in out.rows.iter_mut().enumerate() {
            let d = self.sys.d_row(m + 1);
            let s = &self.vsum[m];
            row.values.iter_mut().enumerate().for_each(|(k, x)| {
                *x = if d[k] == 0.0 { 0.0 } else { *x * d[k] * (-beta * s[k]) };
            });
        }
        out
    }

    /// `(∂A v) φ = (∂D v) K φ + D (∂K v) φ`.
    pub fn apply_aprime(&self, phi: &CorrelationVector) -> Result<CorrelationVector> {
        let mut out = self.apply_dprime(&self.sys.apply_k(phi)?);
        out.axpy(1.0, &self.sys.apply_d(&self.apply_kprime(phi)?));
        Ok(out)
    }
}

/// Sampled check that `j*` chosen from `u` still satisfies
/// `S_{j*} ≥ -2B` when the sums are evaluated with `u + t v`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PinnedJstarCheck {
    pub samples: usize,
    /// Smallest `S_{j*}` seen under the perturbed potential.
    pub min_sum: f64,
    pub bound: f64,
    pub holds: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn pinned_jstar_check(
    u: &PairPotential,
    v: &Perturbation,
    t: f64,
    stability_b: f64,
    m_max: usize,
    side: f64,
    samples: usize,
    seed: u64,
) -> Result<PinnedJstarCheck> {
    if m_max < 2 {
        return Err(KsError::InvalidInput("need m_max >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let moved = PairPotential::Perturbed {
        base: Arc::new(u.clone()),
        v: v.clone(),
        t,
    };
    let mut min_sum = f64::INFINITY;
    for k in 0..samples {
        let m = 2 + k % (m_max - 1);
        let pos: Vec<[f64; 3]> = (0..m)
            .map(|_| std::array::from_fn(|_| side * (rng.random::<f64>() - 0.5)))
            .collect();
        let j = jstar(u, &pos)? - 1;
        let s: f64 = (0..m)
            .filter(|&i| i != j)
            .map(|i| moved.evaluate(dist(&pos[i], &pos[j])))
            .sum();
        min_sum = min_sum.min(s);
    }
    let bound = -2.0 * stability_b;
    Ok(PinnedJstarCheck {
        samples,
        min_sum,
        bound,
        holds: samples == 0 || min_sum >= bound,
    })
}

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{k_prime, mayer_derivative, DerivativeOperator};
use crate::error::{KsError, Result};
use crate::ks::{k_n, neumann, Constants, CorrelationVector, KsSystem};
use crate::potentials::radial::integrate;
use crate::potentials::{mayer_f, PairPotential, Perturbation};
use crate::quadrature::Grid;

/// `hi, hi/√10, hi/10, ..` down to `lo` (inclusive, up to rounding).
pub fn epsilon_ladder(hi: f64, lo: f64) -> Vec<f64> {
    let steps = (2.0 * (hi / lo).log10()).round() as i32;
    (0..=steps.max(0)).map(|k| hi * 10f64.powf(-0.5 * k as f64)).collect()
}

/// Least-squares slope of `ln y` against `ln x`; `None` unless every `y` is
/// positive and there are at least two points.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() || y.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn perturbed(u: &PairPotential, v: &Perturbation, eps: f64) -> PairPotential {
    PairPotential::Perturbed {
        base: Arc::new(u.clone()),
        v: v.clone(),
        t: eps,
    }
}

fn check_steps(epsilons: &[f64], v_norm: f64, t0: f64) -> Result<()> {
    if epsilons.is_empty() {
        return Err(KsError::InvalidInput("no finite-difference steps".into()));
    }
    for &e in epsilons {
        if !(e > 0.0) {
            return Err(KsError::InvalidInput(format!(
                "finite-difference step must be positive, got {e}"
            )));
        }
        if !(e * v_norm <= 0.5 * t0) {
            return Err(KsError::Gate(format!(
                "step {e} gives perturbation norm {:e} above t0/2 = {}",
                e * v_norm,
                0.5 * t0
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdRow {
    pub eps: f64,
    /// `‖ρ_{u+εv} - ρ_u - ε dr‖`.
    pub defect: f64,
    /// `defect / ε`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdTable {
    pub rows: Vec<FdRow>,
    pub slope: Option<f64>,
}

/// Finite-difference defect of `dr` against re-solved perturbed systems.
/// `sys` must hold `u`; `j*` stays pinned to it.
#[allow(clippy::too_many_arguments)]
pub fn finite_difference_defect(
    sys: &KsSystem,
    consts: &Constants,
    z: f64,
    u: &PairPotential,
    v: &Perturbation,
    v_norm: f64,
    t0: f64,
    rho: &CorrelationVector,
    dr: &CorrelationVector,
    epsilons: &[f64],
) -> Result<FdTable> {
    check_steps(epsilons, v_norm, t0)?;
    let w = consts.weight();
    let source = CorrelationVector::unit_source(sys.grid.clone(), sys.m_max(), z)?;
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let moved = sys.with_potential(&perturbed(u, v, eps))?;
        let run = neumann(&moved, z, &source, w, sys.cfg.neumann_tol, sys.cfg.max_iters)?;
        let mut d = run.x.sub(rho);
        d.axpy(-eps, dr);
        let defect = d.norm(w);
        rows.push(FdRow {
            eps,
            defect,
            ratio: defect / eps,
        });
    }
    let slope = least_squares_slope(epsilons, &rows.iter().map(|r| r.defect).collect::<Vec<_>>());
    Ok(FdTable { rows, slope })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemainderRow {
    pub eps: f64,
    pub remainder: f64,
}

/// Remainders of a first-order expansion over a ladder of steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemainderStudy {
    pub rows: Vec<RemainderRow>,
    pub slope: Option<f64>,
    /// `max remainder / (ε ‖v‖)²`.
    pub constant: f64,
    /// Known bound on that constant, when there is one.
    pub bound_constant: Option<f64>,
}

impl RemainderStudy {
    fn from_rows(rows: Vec<RemainderRow>, v_norm: f64, bound_constant: Option<f64>) -> Self {
        let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
        let rem: Vec<f64> = rows.iter().map(|r| r.remainder).collect();
        let constant = rows
            .iter()
            .map(|r| r.remainder / (r.eps * v_norm).powi(2))
            .fold(0.0, f64::max);
        Self {
            slope: least_squares_slope(&eps, &rem),
            rows,
            constant,
            bound_constant,
        }
    }
}

/// `4π ∫_0^{r_max} |f_{u+εv} - f_u - ε (∂f v)| r² dr`.
pub fn mayer_remainder(u: &PairPotential, beta: f64, v: &Perturbation, eps: f64, r_max: f64, tol: f64) -> Result<f64> {
    let moved = perturbed(u, v, eps);
    let g = |r: f64| {
        let x = mayer_f(&moved, beta, r) - mayer_f(u, beta, r) - eps * mayer_derivative(u, beta, v, r);
        x.abs() * r * r
    };
    let mut cuts = u.breakpoints();
    cuts.extend(v.breakpoints());
    let res = integrate(g, 0.0, r_max, &cuts, tol / (4.0 * PI), 50_000)?;
    Ok(4.0 * PI * res.value)
}

pub fn mayer_remainder_study(
    u: &PairPotential,
    beta: f64,
    v: &Perturbation,
    v_norm: f64,
    epsilons: &[f64],
    r_max: f64,
) -> Result<RemainderStudy> {
    let rows = epsilons
        .iter()
        .map(|&eps| {
            Ok(RemainderRow {
                eps,
                remainder: mayer_remainder(u, beta, v, eps, r_max, 1e-9 * eps * eps)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RemainderStudy::from_rows(rows, v_norm, None))
}

/// `sup |d̃_m - d_m - ε ∂d_m v|` over every grid tuple of every row, with
/// the bound `4 e^{2βB} / t0²` on the constant.
pub fn d_remainder(
    sys: &KsSystem,
    consts: &Constants,
    u: &PairPotential,
    v: &Perturbation,
    v_norm: f64,
    t0: f64,
    epsilons: &[f64],
) -> Result<RemainderStudy> {
    check_steps(epsilons, v_norm, t0)?;
    let op = DerivativeOperator::new(sys, v)?;
    let beta = sys.beta;
    let mut rows = Vec::new();
    for &eps in epsilons {
        let moved = sys.with_potential(&perturbed(u, v, eps))?;
        let mut sup = 0.0f64;
        for m in 2..=sys.m_max() {
            let (d, dt, s) = (sys.d_row(m), moved.d_row(m), op.v_sum_row(m));
            for k in 0..d.len() {
                let lin = if d[k] == 0.0 { 0.0 } else { -beta * d[k] * s[k] };
                sup = sup.max((dt[k] - d[k] - eps * lin).abs());
            }
        }
        rows.push(RemainderRow { eps, remainder: sup });
    }
    Ok(RemainderStudy::from_rows(
        rows,
        v_norm,
        Some(4.0 * consts.d_bound() / (t0 * t0)),
    ))
}

/// `sup |k̃_n - k_n - ε k_n'|` over randomly drawn node configurations
/// (a centre and `n` nodes) for `n = 1..=n_max`.
#[allow(clippy::too_many_arguments)]
pub fn kn_remainder(
    grid: &Grid,
    u: &PairPotential,
    beta: f64,
    v: &Perturbation,
    v_norm: f64,
    n_max: usize,
    samples: usize,
    seed: u64,
    epsilons: &[f64],
) -> Result<RemainderStudy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = grid.nodes();
    let configs: Vec<([f64; 3], Vec<[f64; 3]>)> = (0..samples)
        .map(|k| {
            let n = 1 + k % n_max.max(1);
            let centre = nodes[rng.random_range(0..nodes.len())];
            let rp = (0..n).map(|_| nodes[rng.random_range(0..nodes.len())]).collect();
            (centre, rp)
        })
        .collect();
    let base = configs
        .iter()
        .map(|(r, rp)| Ok((k_n(u, beta, *r, rp)?, k_prime(u, beta, v, *r, rp)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for &eps in epsilons {
        let moved = perturbed(u, v, eps);
        let mut sup = 0.0f64;
        for ((r, rp), (k0, kp)) in configs.iter().zip(&base) {
            sup = sup.max((k_n(&moved, beta, *r, rp)? - k0 - eps * kp).abs());
        }
        rows.push(RemainderRow { eps, remainder: sup });
    }
    Ok(RemainderStudy::from_rows(rows, v_norm, None))
}

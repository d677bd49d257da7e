use std::sync::Arc;

use serde::Serialize;

use super::DerivativeOperator;
use crate::error::{KsError, Result};
use crate::ks::{
    factorial, grid_kernel_norm, neumann, solve_ks, truncation_bounds, Constants, CorrelationVector, KsConfig,
    KsSolution, KsSystem,
};
use crate::potentials::{PairPotential, Perturbation};
use crate::quadrature::Grid;

/// Everything needed to differentiate `ρ` at `u` in the direction `v`.
#[derive(Debug, Clone)]
pub struct DerivativeRequest {
    pub u: PairPotential,
    pub v: Perturbation,
    /// `‖v‖` in the perturbation space of `u`.
    pub v_norm: f64,
    pub t0: f64,
    pub beta: f64,
    pub z: f64,
    pub consts: Constants,
    pub cfg: KsConfig,
    pub grid: Arc<Grid>,
    /// Skips the activity and perturbation-size gates.
    pub override_gate: bool,
}

/// A-priori bound (weighted norm) on the error of the truncated derivative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeBudget {
    /// `max_i Σ_j w |∂f v|` on the grid.
    pub kprime_l1: f64,
    /// `s' Σ_{n>n_max} 1/(n-1)!`, the dropped part of `‖∂K‖`.
    pub kprime_tail: f64,
    /// Bound on `‖∂A v‖` for the truncated grid operator.
    pub aprime_norm: f64,
    /// Assumed pointwise bound on the untruncated `∂ρ^(m)`, `m = 1, 2, ..`.
    pub decay: Vec<f64>,
    /// Error carried over from the truncated `ρ` in the source term.
    pub propagated: f64,
    /// Terms dropped by the closure and the `n_max` cut.
    pub dropped: f64,
    pub total: f64,
    pub rigorous: bool,
}

impl DerivativeBudget {
    pub fn nodewise(&self, m: usize, weight: f64) -> f64 {
        self.total / weight.powi(m as i32)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub z: f64,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub contraction_estimate: f64,
    /// `‖(∂A v) ρ‖`.
    pub source_norm: f64,
    pub derivative_norm: f64,
    /// `z ‖(∂A v) ρ‖ / (1 - q)` with the grid contraction `q`.
    pub norm_bound: f64,
    pub bound_ok: bool,
    pub budget: DerivativeBudget,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct DerivativeResult {
    pub dr: CorrelationVector,
    pub report: DerivativeReport,
}

/// Pointwise bound `β ξ^m [m(m-1)/2 v_sup + m ξ v_l1 + |Λ| v_l1 ξ²]` on the
/// derivative of a density bounded by `ξ^m`, read off from the explicit
/// grand-canonical expression.
fn decay_bound(beta: f64, xi: f64, v_sup: f64, v_l1: f64, volume: f64, m: usize) -> f64 {
    let mf = m as f64;
    beta * xi.powi(m as i32) * (0.5 * mf * (mf - 1.0) * v_sup + mf * xi * v_l1 + volume * v_l1 * xi * xi)
}

pub fn derivative_budget(op: &DerivativeOperator, consts: &Constants, z: f64) -> DerivativeBudget {
    let sys = op.system();
    let (m_max, n_max) = (sys.cfg.m_max, sys.cfg.n_max);
    let c = consts.weight();
    let beta = sys.beta;
    let db = consts.d_bound();
    let s = sys.kernel().max_l1();
    let sp = op.kernel().max_l1_dual();
    let rho_tail = truncation_bounds(sys, consts, z);
    let xi = rho_tail.decay;
    let q = rho_tail.effective_contraction;
    let volume = sys.grid.cube.volume();

    let n_top = n_max.min(m_max);
    let k_norm = grid_kernel_norm(sys, c);
    let kp_norm: f64 = (1..=n_top)
        .map(|n| sp * (s / c).powi(n as i32 - 1) / factorial(n - 1))
        .sum();
    let dprime_sup: Vec<f64> = (1..=m_max)
        .map(|m| {
            op.v_sum_row(m)
                .iter()
                .zip(sys.d_row(m))
                .fold(0.0f64, |a, (x, d)| a.max(beta * d * x.abs()))
        })
        .collect();
    let dp_max = dprime_sup.iter().copied().fold(0.0, f64::max);
    let aprime_norm = dp_max * k_norm + db * kp_norm;

    let zeta = |k: usize| decay_bound(beta, xi, op.v_sup, op.v_l1, volume, k);
    let mut dropped = 0.0f64;
    for m in 1..=m_max {
        let mut r = 0.0;
        for n in 1..=n_max + 400 {
            if m + n - 1 <= m_max && n <= n_max {
                continue;
            }
            let k = m + n - 1;
            let sn = s.powi(n as i32) / factorial(n);
            let term = db * sn * zeta(k)
                + dprime_sup[m - 1] * sn * xi.powi(k as i32)
                + db * sp * s.powi(n as i32 - 1) / factorial(n - 1) * xi.powi(k as i32);
            r += term;
            if n > n_max && (term <= 1e-18 * r || term == 0.0 || !term.is_finite()) {
                break;
            }
        }
        dropped = dropped.max(c.powi(m as i32) * z * r);
    }
    let (propagated, dropped) = if q < 1.0 {
        (z * aprime_norm * rho_tail.total / (1.0 - q), dropped / (1.0 - q))
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    DerivativeBudget {
        kprime_l1: sp,
        kprime_tail: sp * crate::ks::exp_tail(1.0, n_max - 1),
        aprime_norm,
        decay: (1..=m_max + n_max).map(zeta).collect(),
        propagated,
        dropped,
        total: propagated + dropped,
        rigorous: rho_tail.rigorous,
    }
}

/// Solves `(I - z A) dr = z (∂A v) ρ` for a converged `ρ` of `sys`.
pub fn derivative_rho_from(
    sys: &KsSystem,
    consts: &Constants,
    z: f64,
    v: &Perturbation,
    rho: &CorrelationVector,
) -> Result<DerivativeResult> {
    let w = consts.weight();
    let op = DerivativeOperator::new(sys, v)?;
    let mut source = op.apply_aprime(rho)?;
    source.scale(z);
    let source_norm = source.norm(w) / z;
    let run = neumann(sys, z, &source, w, sys.cfg.neumann_tol, sys.cfg.max_iters)?;
    let budget = derivative_budget(&op, consts, z);
    let q = truncation_bounds(sys, consts, z).effective_contraction;
    let norm_bound = if q < 1.0 {
        z * source_norm / (1.0 - q)
    } else {
        f64::INFINITY
    };
    let derivative_norm = run.x.norm(w);
    let last = run.residuals.last().copied().unwrap_or(0.0);
    let slack = if q < 1.0 { last * q / (1.0 - q) } else { 0.0 };
    let bound_ok = derivative_norm <= norm_bound * (1.0 + 1e-12) + slack;
    let mut warnings = Vec::new();
    if !bound_ok {
        warnings.push(format!(
            "derivative norm {derivative_norm:e} exceeds the Neumann bound {norm_bound:e}"
        ));
    }
    if !budget.rigorous {
        warnings.push("potential is negative somewhere on the grid; the truncation budget assumes decay".into());
    }
    Ok(DerivativeResult {
        report: DerivativeReport {
            z,
            iterations: run.iterations,
            residuals: run.residuals,
            contraction_estimate: run.contraction_estimate,
            source_norm,
            derivative_norm,
            norm_bound,
            bound_ok,
            budget,
            warnings,
        },
        dr: run.x,
    })
}

/// Builds the system, solves for `ρ` and then for `(∂ρ) v`.
pub fn derivative_rho(req: &DerivativeRequest) -> Result<(KsSolution, DerivativeResult)> {
    if !req.v_norm.is_finite() {
        return Err(KsError::Gate(format!("perturbation norm is {}", req.v_norm)));
    }
    if !req.override_gate && req.v_norm > req.t0 {
        return Err(KsError::Gate(format!(
            "perturbation norm {:.6e} exceeds t0 = {}",
            req.v_norm, req.t0
        )));
    }
    let sys = KsSystem::new(&req.u, req.beta, req.grid.clone(), req.cfg)?;
    let sol = solve_ks(&sys, req.z, &req.consts, req.override_gate)?;
    let d = derivative_rho_from(&sys, &req.consts, req.z, &req.v, &sol.rho)?;
    Ok((sol, d))
}

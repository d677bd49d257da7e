use serde::Serialize;

use super::system::KsSystem;
use super::vector::CorrelationVector;
use super::{exp_tail, factorial, Constants};
use crate::error::{KsError, Result};

/// Residuals below this fraction of the iterate norm are treated as round-off
/// when estimating the contraction ratio.
const RATIO_NOISE_FLOOR: f64 = 1e-10;

/// Iterates `x ← source + z A x` from `x = 0`.
#[derive(Debug, Clone)]
pub struct NeumannRun {
    pub x: CorrelationVector,
    pub iterations: usize,
    /// `‖x^{k+1} - x^k‖` for `k = 0, 1, ..`.
    pub residuals: Vec<f64>,
    /// Successive residual ratios above the noise floor.
    pub ratios: Vec<f64>,
    pub contraction_estimate: f64,
}

pub fn neumann(
    sys: &KsSystem,
    z: f64,
    source: &CorrelationVector,
    weight: f64,
    tol: f64,
    max_iters: usize,
) -> Result<NeumannRun> {
    let mut x = CorrelationVector::zeros(sys.grid.clone(), sys.m_max())?;
    let mut residuals = Vec::new();
    let mut ratios = Vec::new();
    for k in 0..max_iters {
        let mut next = sys.apply_a(&x)?;
        next.scale(z);
        next.axpy(1.0, source);
        let r = next.distance(&x, weight);
        if !r.is_finite() {
            return Err(KsError::NonConvergence {
                iterations: k + 1,
                residual: r,
            });
        }
        if let Some(&prev) = residuals.last() {
            if prev > RATIO_NOISE_FLOOR * next.norm(weight) {
                ratios.push(r / prev);
            }
        }
        residuals.push(r);
        x = next;
        if r <= tol {
            let contraction_estimate = ratios.iter().copied().fold(0.0, f64::max);
            return Ok(NeumannRun {
                x,
                iterations: k + 1,
                residuals,
                ratios,
                contraction_estimate,
            });
        }
    }
    Err(KsError::NonConvergence {
        iterations: max_iters,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}

/// A-priori bounds (weighted norm) on what the `m_max`/`n_max` truncation drops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBounds {
    /// Contribution of closing orders above `m_max` by zero.
    pub m_closure: f64,
    /// Contribution of kernel orders above `n_max`.
    pub n_truncation: f64,
    /// Bound on the truncated solution's error in the weighted norm.
    pub total: f64,
    /// `c Σ_{n>n_max} 1/n!`, the continuum kernel tail.
    pub kernel_tail: f64,
    /// `max_j Σ_i w |f(R_i - R_j)|` on the grid.
    pub kernel_l1: f64,
    /// `z e^{2βB} ‖K‖` with the grid operator norm.
    pub effective_contraction: f64,
    /// `ξ` in the assumed decay `ρ^(m) ≤ ξ^m` of the untruncated solution.
    pub decay: f64,
    /// True when `ξ = z` is proven (nonnegative potentials).
    pub rigorous: bool,
}

impl TailBounds {
    /// Nodewise bound for row `m`.
    pub fn nodewise(&self, m: usize, weight: f64) -> f64 {
        self.total / weight.powi(m as i32)
    }
}

/// `‖K‖` on the grid: `c (1 + Σ_{n ≤ n_max} (s/c)^n / n!)`.
pub fn grid_kernel_norm(sys: &KsSystem, weight: f64) -> f64 {
    let s = sys.kernel().max_l1();
    let n_top = sys.cfg.n_max.min(sys.cfg.m_max);
    weight
        * (1.0
            + (1..=n_top)
                .map(|n| (s / weight).powi(n as i32) / factorial(n))
                .sum::<f64>())
}

pub fn truncation_bounds(sys: &KsSystem, consts: &Constants, z: f64) -> TailBounds {
    let c = consts.weight();
    let s = sys.kernel().max_l1();
    let (m_max, n_max) = (sys.cfg.m_max, sys.cfg.n_max);
    let q = z * consts.d_bound() * grid_kernel_norm(sys, c);
    let rigorous = sys.table.nonnegative();
    let xi = if rigorous {
        z
    } else {
        z * (2.0 * consts.beta * consts.stability_b + 1.0).exp()
    };
    let (mut closure, mut trunc, mut both) = (0.0f64, 0.0f64, 0.0f64);
    for m in 1..=m_max {
        let cm = c.powi(m as i32);
        let first = (m_max + 2).saturating_sub(m).max(1);
        let cl: f64 = (first..=n_max)
            .map(|n| s.powi(n as i32) * xi.powi((m + n - 1) as i32) / factorial(n))
            .sum::<f64>()
            * cm;
        let tr = cm * xi.powi(m as i32 - 1) * exp_tail(s * xi, n_max);
        closure = closure.max(cl);
        trunc = trunc.max(tr);
        both = both.max(cl + tr);
    }
    let scale = if q < 1.0 {
        z * consts.d_bound() / (1.0 - q)
    } else {
        f64::INFINITY
    };
    TailBounds {
        m_closure: closure * scale,
        n_truncation: trunc * scale,
        total: both * scale,
        kernel_tail: c * exp_tail(1.0, n_max),
        kernel_l1: s,
        effective_contraction: q,
        decay: xi,
        rigorous,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub z: f64,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub ratios: Vec<f64>,
    pub contraction_estimate: f64,
    /// `z c_β e^{2βB+1}`.
    pub contraction_bound: f64,
    pub contraction_ok: bool,
    pub norm_weight: f64,
    pub solution_norm: f64,
    /// `z c / (1 - q)`, the Neumann bound on the solution norm.
    pub neumann_bound: f64,
    /// Bound on the distance of the last iterate to the truncated fixed point.
    pub iteration_error: f64,
    pub tail_bounds: TailBounds,
    pub min_value: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct KsSolution {
    pub rho: CorrelationVector,
    pub report: SolveReport,
}

/// Solves the truncated hierarchy by Neumann iteration. Refuses `z ≥ z_max`
/// (and potentials without a regularity constant) unless `override_gate` is set.
pub fn solve_ks(sys: &KsSystem, z: f64, consts: &Constants, override_gate: bool) -> Result<KsSolution> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(KsError::InvalidInput(format!("activity must be positive, got {z}")));
    }
    if !override_gate {
        match consts.z_max() {
            Some(zm) if z < zm => {}
            Some(zm) => {
                return Err(KsError::Gate(format!(
                    "activity {z} is not below the bound z_max = {zm}"
                )));
            }
            None => {
                return Err(KsError::Gate(
                    "no regularity constant; the activity bound is undefined".into(),
                ))
            }
        }
    }
    let w = consts.weight();
    let source = CorrelationVector::unit_source(sys.grid.clone(), sys.m_max(), z)?;
    let run = neumann(sys, z, &source, w, sys.cfg.neumann_tol, sys.cfg.max_iters)?;
    Ok(finish(sys, z, consts, run))
}

fn finish(sys: &KsSystem, z: f64, consts: &Constants, run: NeumannRun) -> KsSolution {
    let w = consts.weight();
    let tails = truncation_bounds(sys, consts, z);
    let q = consts.contraction(z);
    let q_eff = tails.effective_contraction;
    let contraction_ok = run.ratios.iter().all(|&r| r <= q + 1e-6);
    let solution_norm = run.x.norm(w);
    let neumann_bound = if q_eff < 1.0 {
        z * w / (1.0 - q_eff)
    } else {
        f64::INFINITY
    };
    let last = run.residuals.last().copied().unwrap_or(0.0);
    let iteration_error = if q_eff < 1.0 {
        last * q_eff / (1.0 - q_eff)
    } else {
        f64::INFINITY
    };
    let min_value = run.x.summary().iter().map(|s| s.min).fold(f64::INFINITY, f64::min);
    let mut warnings = Vec::new();
    if min_value < -sys.cfg.neumann_tol.max(iteration_error) {
        warnings.push(format!("solution has negative entries down to {min_value:e}"));
    }
    if !contraction_ok {
        warnings.push(format!(
            "observed contraction {} exceeds z c e^(2βB+1) = {q}",
            run.contraction_estimate
        ));
    }
    if solution_norm > neumann_bound {
        warnings.push(format!(
            "solution norm {solution_norm} exceeds the Neumann bound {neumann_bound}"
        ));
    }
    if sys
        .table
        .u
        .iter()
        .enumerate()
        .any(|(k, &x)| k % (sys.grid.len() + 1) == 0 && x.is_finite())
    {
        warnings.push("coinciding nodes evaluate the potential at the clamped separation 1e-12".into());
    }
    KsSolution {
        report: SolveReport {
            z,
            iterations: run.iterations,
            residuals: run.residuals,
            ratios: run.ratios,
            contraction_estimate: run.contraction_estimate,
            contraction_bound: q,
            contraction_ok,
            norm_weight: w,
            solution_norm,
            neumann_bound,
            iteration_error,
            tail_bounds: tails,
            min_value,
            warnings,
        },
        rho: run.x,
    }
}

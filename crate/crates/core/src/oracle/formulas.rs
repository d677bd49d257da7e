use std::sync::Arc;

use serde::Serialize;

use super::GrandCanonicalSums;
use super::OracleConfig;
use crate::error::{KsError, Result};
use crate::par;
use crate::potentials::{PairPotential, Perturbation, MIN_SEPARATION};
use crate::quadrature::{decode_tuple, dist, integrate_n, Grid, GridFunction};

fn v_table(grid: &Grid, v: &Perturbation) -> Vec<f64> {
    let n = grid.len();
    let nodes = grid.nodes();
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[i * n + j] = v.evaluate(dist(&nodes[i], &nodes[j]).max(MIN_SEPARATION));
        }
    }
    t
}

fn need(sums: &GrandCanonicalSums, m: usize) -> Result<()> {
    if sums.rho.len() < m {
        return Err(KsError::InvalidInput(format!(
            "the formula needs ρ up to order {m}, have {}",
            sums.rho.len()
        )));
    }
    Ok(())
}

/// `∬ v(|R - R'|) ρ^(2)(R, R') dR dR'` (with `|v|` when `abs` is set).
fn pair_moment(sums: &GrandCanonicalSums, vt: &[f64], abs: bool) -> Result<f64> {
    let n = sums.grid.len();
    let r2 = &sums.rho[1].values;
    integrate_n(&sums.grid, 2, |t| {
        let x = vt[t[0] * n + t[1]];
        (if abs { x.abs() } else { x }) * r2[t[0] * n + t[1]]
    })
}

/// `∂Ξ = -(β/2) ∬ v ρ^(2)`.
pub fn deriv_xi(sums: &GrandCanonicalSums, v: &Perturbation) -> Result<f64> {
    need(sums, 2)?;
    let vt = v_table(&sums.grid, v);
    Ok(-0.5 * sums.beta * pair_moment(sums, &vt, false)? * sums.xi.xi)
}

/// `∂ρ^(1)(R_1) = -β∫v ρ^(2) - (β/2)∬v ρ^(3) + (β/2) ρ^(1)∬v ρ^(2)`.
pub fn deriv_rho1(sums: &GrandCanonicalSums, v: &Perturbation) -> Result<GridFunction> {
    need(sums, 3)?;
    let g = &sums.grid;
    let (n, w, beta) = (g.len(), g.weight, sums.beta);
    let vt = v_table(g, v);
    let i2 = pair_moment(sums, &vt, false)?;
    let (r1, r2, r3) = (&sums.rho[0].values, &sums.rho[1].values, &sums.rho[2].values);
    let values = par::map_indexed(n, |a| {
        let mut single = 0.0;
        for j in 0..n {
            single += vt[a * n + j] * r2[a * n + j];
        }
        let mut double = 0.0;
        for j in 0..n {
            for k in 0..n {
                double += vt[j * n + k] * r3[(a * n + j) * n + k];
            }
        }
        -beta * w * single - 0.5 * beta * w * w * double + 0.5 * beta * r1[a] * i2
    });
    GridFunction::new(1, g.clone(), values)
}

/// The five-term formula for `∂ρ^(2)(R_1, R_2)`: contact term, two single
/// integrals against `ρ^(3)`, the half-weighted double integral against
/// `ρ^(4)` and the `ρ^(2) ∬ v ρ^(2)` compensation.
pub fn deriv_rho2(sums: &GrandCanonicalSums, v: &Perturbation) -> Result<GridFunction> {
    need(sums, 4)?;
    let g = &sums.grid;
    let (n, w, beta) = (g.len(), g.weight, sums.beta);
    let vt = v_table(g, v);
    let i2 = pair_moment(sums, &vt, false)?;
    let (r2, r3, r4) = (&sums.rho[1].values, &sums.rho[2].values, &sums.rho[3].values);
    let values = par::map_indexed(n * n, |ab| {
        let (a, b) = (ab / n, ab % n);
        let contact = vt[a * n + b] * r2[ab];
        let mut single = 0.0;
        for k in 0..n {
            single += (vt[a * n + k] + vt[b * n + k]) * r3[ab * n + k];
        }
        let mut double = 0.0;
        for j in 0..n {
            for k in 0..n {
                double += vt[j * n + k] * r4[(ab * n + j) * n + k];
            }
        }
        -beta * contact - beta * w * single - 0.5 * beta * w * w * double + 0.5 * beta * r2[ab] * i2
    });
    GridFunction::new(2, g.clone(), values)
}

/// Explicit derivatives with bounds on the effect of the `N_max` truncation.
#[derive(Debug, Clone)]
pub struct DerivativeOracle {
    pub d_xi: f64,
    pub d_rho1: GridFunction,
    pub d_rho2: GridFunction,
    pub tail_rho1: f64,
    pub tail_rho2: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DerivativeTails {
    pub tail_rho1: f64,
    pub tail_rho2: f64,
}

impl DerivativeOracle {
    pub fn compute(sums: &GrandCanonicalSums, v: &Perturbation) -> Result<Self> {
        need(sums, 4)?;
        let g = &sums.grid;
        let (n, w, beta) = (g.len(), g.weight, sums.beta);
        let vt = v_table(g, v);
        let vmax = vt.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let v1 = (0..n)
            .map(|a| w * (0..n).map(|j| vt[a * n + j].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let v2 = integrate_n(g, 2, |t| vt[t[0] * n + t[1]].abs())?;
        let abs_i2 = pair_moment(sums, &vt, true)?;
        let t = &sums.rho_tail;
        let sup1 = sums.rho[0].sup_abs();
        let sup2 = sums.rho[1].sup_abs();
        // each term with |v| in place of v and ρ replaced by its truncation bound
        let comp = |sup: f64, tm: f64| 0.5 * beta * (tm * abs_i2 + sup * v2 * t[1] + tm * v2 * t[1]);
        let tail_rho1 = beta * v1 * t[1] + 0.5 * beta * v2 * t[2] + comp(sup1, t[0]);
        let tail_rho2 = beta * vmax * t[1] + 2.0 * beta * v1 * t[2] + 0.5 * beta * v2 * t[3] + comp(sup2, t[1]);
        Ok(Self {
            d_xi: deriv_xi(sums, v)?,
            d_rho1: deriv_rho1(sums, v)?,
            d_rho2: deriv_rho2(sums, v)?,
            tail_rho1,
            tail_rho2,
        })
    }

    pub fn tails(&self) -> DerivativeTails {
        DerivativeTails {
            tail_rho1: self.tail_rho1,
            tail_rho2: self.tail_rho2,
        }
    }
}

/// `(ρ_{u+εv} - ρ_u) / ε` for `m = 1, 2`, refusing `ε ‖v‖ > t0 / 2`.
#[allow(clippy::too_many_arguments)]
pub fn fd_brute(
    cfg: &OracleConfig,
    grid: Arc<Grid>,
    u: &PairPotential,
    v: &Perturbation,
    v_norm: f64,
    t0: f64,
    beta: f64,
    z: f64,
    stability_b: f64,
    eps: f64,
) -> Result<Vec<GridFunction>> {
    if !(eps.abs() * v_norm <= 0.5 * t0) {
        return Err(KsError::Gate(format!(
            "finite-difference step {eps} gives perturbation norm {:e} above t0/2 = {}",
            eps.abs() * v_norm,
            0.5 * t0
        )));
    }
    if eps == 0.0 {
        return Err(KsError::InvalidInput("finite-difference step must be nonzero".into()));
    }
    let base = GrandCanonicalSums::compute(cfg, grid.clone(), u, beta, z, stability_b, 2)?;
    let moved_u = PairPotential::Perturbed {
        base: Arc::new(u.clone()),
        v: v.clone(),
        t: eps,
    };
    let moved = GrandCanonicalSums::compute(cfg, grid.clone(), &moved_u, beta, z, stability_b, 2)?;
    (0..2)
        .map(|k| {
            let vals = moved.rho[k]
                .values
                .iter()
                .zip(&base.rho[k].values)
                .map(|(a, b)| (a - b) / eps)
                .collect();
            GridFunction::new(k + 1, grid.clone(), vals)
        })
        .collect()
}

/// Index helper for tests: value of an order-`m` function at a tuple index.
#[allow(dead_code)]
pub(crate) fn tuple_of(idx: usize, n: usize, m: usize) -> Vec<usize> {
    let mut t = vec![0; m];
    decode_tuple(idx, n, &mut t);
    t
}

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::derivative_rho_from;
use crate::error::{KsError, Result};
use crate::ks::{solve_ks, Constants, KsConfig, KsSystem};
use crate::potentials::{PairPotential, Perturbation};
use crate::quadrature::{restrict, Cube, Grid, GridFunction, ImbeddingSpec};

/// Nested boxes sharing one node lattice of the given spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub inner_side: f64,
    /// Increasing outer sides; the last one is the reference.
    pub sides: Vec<f64>,
    pub spacing: f64,
}

impl SweepSpec {
    fn grid(&self, side: f64) -> Result<Arc<Grid>> {
        let n = (side / self.spacing).round();
        if !(n >= 2.0) || (n * self.spacing - side).abs() > 1e-9 * side {
            return Err(KsError::Structural(format!(
                "side {side} is not a multiple of the spacing {}",
                self.spacing
            )));
        }
        Ok(Arc::new(Grid::new(Cube::new(side)?, n as usize)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub side: f64,
    pub nodes_per_axis: usize,
    /// Inner-box sup distance of `ρ^(m)` to the reference run, per `m`.
    pub rho_diff: Vec<f64>,
    pub drho_diff: Vec<f64>,
    /// Nodewise truncation budgets of this run, per `m`.
    pub rho_budget: Vec<f64>,
    pub drho_budget: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub inner_side: f64,
    pub reference_side: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Whether each difference is at most the previous one plus the
    /// truncation noise of both runs and twice that of the reference.
    pub fn nonincreasing(&self) -> bool {
        let Some(r) = self.rows.last() else { return true };
        self.rows.windows(2).all(|w| {
            let (a, b) = (&w[0], &w[1]);
            (0..a.rho_diff.len()).all(|m| {
                b.rho_diff[m] <= a.rho_diff[m] + a.rho_budget[m] + b.rho_budget[m] + 2.0 * r.rho_budget[m]
                    && b.drho_diff[m] <= a.drho_diff[m] + a.drho_budget[m] + b.drho_budget[m] + 2.0 * r.drho_budget[m]
            })
        })
    }
}

struct Run {
    rho: Vec<GridFunction>,
    drho: Vec<GridFunction>,
    rho_budget: Vec<f64>,
    drho_budget: Vec<f64>,
    n: usize,
}

/// Solves `ρ` and `(∂ρ) v` on every box of `spec` and compares each on the
/// inner box with the largest box.
#[allow(clippy::too_many_arguments)]
pub fn limit_sweep(
    u: &PairPotential,
    v: &Perturbation,
    beta: f64,
    z: f64,
    consts: &Constants,
    spec: &SweepSpec,
    cfg: KsConfig,
    override_gate: bool,
) -> Result<SweepTable> {
    if spec.sides.is_empty() {
        return Err(KsError::InvalidInput("no box sides to sweep".into()));
    }
    if spec.sides.windows(2).any(|w| w[1] < w[0]) {
        return Err(KsError::InvalidInput("box sides must be nondecreasing".into()));
    }
    if spec.sides[0] < spec.inner_side {
        return Err(KsError::InvalidInput(
            "the inner box is larger than the smallest outer box".into(),
        ));
    }
    let inner = spec.grid(spec.inner_side)?;
    let w = consts.weight();
    // check every embedding before solving anything
    let grids = spec
        .sides
        .iter()
        .map(|&l| {
            let g = spec.grid(l)?;
            let e = ImbeddingSpec::new(g.clone(), inner.clone())?;
            Ok((g, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let runs = grids
        .iter()
        .map(|(g, e)| {
            let sys = KsSystem::new(u, beta, g.clone(), cfg)?;
            let sol = solve_ks(&sys, z, consts, override_gate)?;
            let d = derivative_rho_from(&sys, consts, z, v, &sol.rho)?;
            let tails = sol.report.tail_bounds;
            let rho = sol
                .rho
                .rows
                .iter()
                .map(|f| restrict(e, f))
                .collect::<Result<Vec<_>>>()?;
            let drho = d.dr.rows.iter().map(|f| restrict(e, f)).collect::<Result<Vec<_>>>()?;
            Ok(Run {
                rho,
                drho,
                rho_budget: (1..=cfg.m_max).map(|m| tails.nodewise(m, w)).collect(),
                drho_budget: (1..=cfg.m_max).map(|m| d.report.budget.nodewise(m, w)).collect(),
                n: g.n,
            })
        })
        .collect::<Result<Vec<Run>>>()?;
    let reference = runs.last().expect("nonempty");
    let rows = runs
        .iter()
        .zip(&spec.sides)
        .map(|(r, &side)| SweepRow {
            side,
            nodes_per_axis: r.n,
            rho_diff: r.rho.iter().zip(&reference.rho).map(|(a, b)| a.sup_diff(b)).collect(),
            drho_diff: r.drho.iter().zip(&reference.drho).map(|(a, b)| a.sup_diff(b)).collect(),
            rho_budget: r.rho_budget.clone(),
            drho_budget: r.drho_budget.clone(),
        })
        .collect();
    Ok(SweepTable {
        inner_side: spec.inner_side,
        reference_side: *spec.sides.last().unwrap(),
        rows,
    })
}

use std::path::PathBuf;

use ksfluid::config::{Resolved, RunConfig};
use ksfluid::derivative::{
    d_remainder, derivative_rho_from, epsilon_ladder, finite_difference_defect, kn_remainder, limit_sweep,
    mayer_remainder_study, pinned_jstar_check, RemainderStudy,
};
use ksfluid::ks::{operator_norm_certificates, solve_ks, KsSolution, KsSystem};
use ksfluid::oracle::{compare_rows, DerivativeOracle, GrandCanonicalSums};
use ksfluid::potentials::{stability_probe, PairPotential, Perturbation, RegularityReport};
use ksfluid::KsError;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::CliError;
use crate::output::{FileEntry, RunDir};

pub struct Context {
    pub command: &'static str,
    pub cfg: RunConfig,
    pub config_sha256: String,
    pub res: Resolved,
    pub override_gate: bool,
    pub seed: u64,
    pub out: RunDir,
    /// Truncation bounds and budgets gathered for the manifest.
    pub bounds: Map<String, Value>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    library_version: &'a str,
    config_sha256: &'a str,
    config: &'a RunConfig,
    override_admissibility: bool,
    seed: u64,
    status: &'a str,
    constants: Value,
    bounds: &'a Map<String, Value>,
    files: &'a [FileEntry],
}

impl Context {
    pub fn write_manifest(&mut self, status: &str) -> Result<(), CliError> {
        let r = &self.res;
        let constants = json!({
            "beta": r.consts.beta,
            "c_beta": r.consts.c_beta,
            "c_beta_error": r.c_beta.map(|c| c.error_bar()),
            "stability_B": r.consts.stability_b,
            "z_max": r.z_max,
            "z": r.z,
            "t0": r.t0,
            "norm_weight": r.consts.weight(),
            "v_norm": r.v_norm,
        });
        let files = self.out.files().to_vec();
        let m = Manifest {
            command: self.command,
            library_version: ksfluid::VERSION,
            config_sha256: &self.config_sha256,
            config: &self.cfg,
            override_admissibility: self.override_gate,
            seed: self.seed,
            status,
            constants,
            bounds: &self.bounds,
            files: &files,
        };
        self.out.write_json("manifest.json", &m)
    }

    fn bound<T: Serialize>(&mut self, key: &str, value: &T) {
        self.bounds
            .insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    fn gates(&self) -> Result<(), CliError> {
        if self.override_gate {
            return Ok(());
        }
        let r = &self.res;
        if matches!(r.u, PairPotential::Ideal) {
            return Err(CliError::Refused(
                "the ideal gas has no regularity constant; pass --override-admissibility".into(),
            ));
        }
        if !r.admissible() {
            return Err(CliError::Refused(
                "potential violates its admissibility envelope".into(),
            ));
        }
        if !r.activity_ok() {
            return Err(CliError::Refused(format!(
                "z = {:e} is not below z_max = {:e}",
                r.z,
                r.z_max.unwrap_or(0.0)
            )));
        }
        Ok(())
    }

    fn perturbation(&self) -> Result<(Perturbation, f64), CliError> {
        match (&self.res.v, self.res.v_norm) {
            (Some(v), Some(n)) => Ok((v.clone(), n)),
            _ => Err(CliError::Config(format!("`{}` needs a perturbation", self.command))),
        }
    }

    fn v_gate(&self, v_norm: f64) -> Result<(), CliError> {
        if !v_norm.is_finite() {
            return Err(CliError::Refused(
                "perturbation lies outside the perturbation space (infinite norm)".into(),
            ));
        }
        if !self.override_gate && v_norm > self.res.t0 {
            return Err(CliError::Refused(format!(
                "perturbation norm {v_norm:.6e} exceeds t0 = {}",
                self.res.t0
            )));
        }
        Ok(())
    }

    fn system(&self) -> Result<KsSystem, CliError> {
        Ok(KsSystem::new(
            &self.res.u,
            self.res.consts.beta,
            self.res.grid.clone(),
            self.cfg.ks,
        )?)
    }

    fn solve(&self, sys: &KsSystem) -> Result<KsSolution, CliError> {
        Ok(solve_ks(sys, self.res.z, &self.res.consts, self.override_gate)?)
    }
}

pub fn check(ctx: &mut Context) -> Result<(), CliError> {
    let r = &ctx.res;
    let regularity = match &r.env {
        Some(env) if !matches!(r.u, PairPotential::Ideal) => {
            let mut rep = RegularityReport::compute(
                &r.u,
                env,
                r.consts.beta,
                r.consts.stability_b,
                r.t0,
                ctx.cfg.quadrature_tol,
                &ctx.cfg.sampling,
            )?;
            rep.stability_probe = Some(stability_probe(
                &r.u,
                r.consts.stability_b,
                8,
                ctx.cfg.grid.side,
                2048,
                ctx.seed,
            ));
            Some(rep)
        }
        _ => None,
    };
    let probe_ok = regularity
        .as_ref()
        .and_then(|x| x.stability_probe)
        .is_none_or(|p| p.consistent_with_b);
    let pass = r.admissible() && r.activity_ok() && probe_ok;
    let report = json!({
        "potential": r.u.kind_tag(),
        "regularity": regularity,
        "admissibility": r.admissibility,
        "z": r.z,
        "z_max": r.z_max,
        "z_over_z_max": r.z_max.map(|zm| r.z / zm),
        "contraction_factor": r.consts.contraction(r.z),
        "admissible": r.admissible(),
        "activity_ok": r.activity_ok(),
        "stability_probe_ok": probe_ok,
        "pass": pass,
        "overridden": !pass && ctx.override_gate,
    });
    println!(
        "{}: c_beta = {:.6e}, z = {:.6e}, z_max = {}, admissible = {}",
        r.u.kind_tag(),
        r.consts.c_beta,
        r.z,
        r.z_max.map_or("none".into(), |z| format!("{z:.6e}")),
        r.admissible()
    );
    ctx.out.write_json("check.json", &report)?;
    if pass || ctx.override_gate {
        Ok(())
    } else if !probe_ok {
        Err(CliError::Refused(
            "random configurations show an energy deficit above B".into(),
        ))
    } else {
        ctx.gates()
    }
}

pub fn solve(ctx: &mut Context) -> Result<(), CliError> {
    ctx.gates()?;
    let sys = ctx.system()?;
    let sol = ctx.solve(&sys)?;
    let cert = operator_norm_certificates(&sys, &ctx.res.consts, ctx.cfg.certificate_samples, ctx.seed)?;
    for (m, row) in sol.rho.rows.iter().enumerate() {
        ctx.out.write_grid(&format!("rho_{}", m + 1), row)?;
    }
    ctx.out.write_json("solve_report.json", &sol.report)?;
    ctx.out.write_json("certificates.json", &cert)?;
    ctx.bound("tail_bounds", &sol.report.tail_bounds);
    ctx.bound("iteration_error", &sol.report.iteration_error);
    println!(
        "converged in {} iterations, contraction estimate {:.4}, tail bound {:.3e}",
        sol.report.iterations, sol.report.contraction_estimate, sol.report.tail_bounds.total
    );
    for w in &sol.report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn mayer_cutoff(ctx: &Context) -> f64 {
    match &ctx.res.env {
        Some(env) => env.tail_radius(1e-14),
        None => 3f64.sqrt() * ctx.cfg.grid.side,
    }
}

fn study_json(s: Result<RemainderStudy, KsError>) -> Value {
    match s {
        Ok(s) => serde_json::to_value(s).unwrap_or(Value::Null),
        Err(e) => json!({ "skipped": e.to_string() }),
    }
}

pub fn derivative(ctx: &mut Context) -> Result<(), CliError> {
    let (v, v_norm) = ctx.perturbation()?;
    ctx.gates()?;
    ctx.v_gate(v_norm)?;
    let sys = ctx.system()?;
    let sol = ctx.solve(&sys)?;
    let (consts, z, t0) = (ctx.res.consts, ctx.res.z, ctx.res.t0);
    let d = derivative_rho_from(&sys, &consts, z, &v, &sol.rho)?;
    for (m, row) in d.dr.rows.iter().enumerate() {
        ctx.out.write_grid(&format!("drho_{}", m + 1), row)?;
    }
    ctx.out.write_json("derivative_report.json", &d.report)?;

    let set = ctx.cfg.derivative;
    let eps: Vec<f64> = epsilon_ladder(set.eps_hi, set.eps_lo)
        .into_iter()
        .filter(|e| e * v_norm <= 0.5 * t0)
        .collect();
    let u = ctx.res.u.clone();
    let beta = consts.beta;
    let fd = finite_difference_defect(&sys, &consts, z, &u, &v, v_norm, t0, &sol.rho, &d.dr, &eps);
    let fd_json = match &fd {
        Ok(t) => {
            let rows: Vec<Vec<f64>> = t.rows.iter().map(|r| vec![r.eps, r.defect, r.ratio]).collect();
            ctx.out
                .write_csv_rows("fd_table.csv", &["eps", "defect", "ratio"], &rows)?;
            serde_json::to_value(t).unwrap_or(Value::Null)
        }
        Err(e) => json!({ "skipped": e.to_string() }),
    };
    let remainders = json!({
        "mayer": study_json(mayer_remainder_study(&u, beta, &v, v_norm, &eps, mayer_cutoff(ctx))),
        "d_m": study_json(d_remainder(&sys, &consts, &u, &v, v_norm, t0, &eps)),
        "k_n": study_json(kn_remainder(&sys.grid, &u, beta, &v, v_norm, ctx.cfg.ks.n_max, set.kn_samples, ctx.seed, &eps)),
    });
    let t = if v_norm > 0.0 { t0 / v_norm } else { 0.0 };
    let pinned = pinned_jstar_check(
        &u,
        &v,
        t,
        consts.stability_b,
        ctx.cfg.ks.m_max,
        ctx.cfg.grid.side,
        set.jstar_samples,
        ctx.seed,
    )?;
    let comparison = explicit_comparison(ctx, &v, &d.dr.rows, &d.report.budget)?;
    ctx.out.write_json("fd.json", &fd_json)?;
    ctx.out.write_json("remainders.json", &remainders)?;
    ctx.out.write_json("pinned_jstar.json", &pinned)?;
    ctx.out.write_json("explicit_comparison.json", &comparison)?;
    ctx.bound("tail_bounds", &sol.report.tail_bounds);
    ctx.bound("derivative_budget", &d.report.budget);
    println!(
        "|v| = {v_norm:.4e}, |dr| = {:.4e} (bound {:.4e}), FD slope {}",
        d.report.derivative_norm,
        d.report.norm_bound,
        fd.as_ref()
            .ok()
            .and_then(|t| t.slope)
            .map_or("none".into(), |s| format!("{s:.4}"))
    );
    for w in &d.report.warnings {
        eprintln!("warning: {w}");
    }
    if !pinned.holds {
        eprintln!(
            "warning: the pinned j* lost the stability bound on {} samples",
            pinned.samples
        );
    }
    Ok(())
}

/// Implicit `m = 1, 2` rows against the explicit finite-volume formulas, when
/// the particle-number budget allows it.
fn explicit_comparison(
    ctx: &mut Context,
    v: &Perturbation,
    dr: &[ksfluid::quadrature::GridFunction],
    budget: &ksfluid::derivative::DerivativeBudget,
) -> Result<Value, CliError> {
    let r = &ctx.res;
    let sums = GrandCanonicalSums::compute(
        &ctx.cfg.oracle,
        r.grid.clone(),
        &r.u,
        r.consts.beta,
        r.z,
        r.consts.stability_b,
        4,
    );
    let oracle = match sums.and_then(|s| DerivativeOracle::compute(&s, v)) {
        Ok(o) => o,
        Err(e @ (KsError::Budget { .. } | KsError::InvalidInput(_))) => return Ok(json!({ "skipped": e.to_string() })),
        Err(e) => return Err(e.into()),
    };
    let w = r.consts.weight();
    let budgets = [
        budget.nodewise(1, w) + oracle.tail_rho1,
        budget.nodewise(2, w) + oracle.tail_rho2,
    ];
    let report = compare_rows(&[&dr[0], &dr[1]], &[&oracle.d_rho1, &oracle.d_rho2], &budgets, None)?;
    ctx.out.write_grid("drho_explicit_1", &oracle.d_rho1)?;
    ctx.out.write_grid("drho_explicit_2", &oracle.d_rho2)?;
    Ok(json!({ "d_xi": oracle.d_xi, "oracle_tails": oracle.tails(), "report": report }))
}

pub fn limit_sweep_cmd(ctx: &mut Context) -> Result<(), CliError> {
    let (v, v_norm) = ctx.perturbation()?;
    let spec = ctx
        .cfg
        .sweep_spec()
        .ok_or_else(|| CliError::Config("`limit-sweep` needs a sweep section".into()))?;
    ctx.gates()?;
    ctx.v_gate(v_norm)?;
    let r = &ctx.res;
    let table = limit_sweep(
        &r.u,
        &v,
        r.consts.beta,
        r.z,
        &r.consts,
        &spec,
        ctx.cfg.ks_for_sweep(),
        ctx.override_gate,
    )?;
    let m_max = table.rows.first().map_or(0, |x| x.rho_diff.len());
    let mut header: Vec<String> = vec!["side".into(), "n_g".into()];
    for name in ["rho_diff", "drho_diff", "rho_budget", "drho_budget"] {
        header.extend((1..=m_max).map(|m| format!("{name}_{m}")));
    }
    let rows: Vec<Vec<f64>> = table
        .rows
        .iter()
        .map(|x| {
            let mut row = vec![x.side, x.nodes_per_axis as f64];
            for col in [&x.rho_diff, &x.drho_diff, &x.rho_budget, &x.drho_budget] {
                row.extend(col.iter().copied());
            }
            row
        })
        .collect();
    let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.out.write_csv_rows("sweep.csv", &hdr, &rows)?;
    let nonincreasing = table.nonincreasing();
    ctx.out
        .write_json("sweep.json", &json!({ "table": table, "nonincreasing": nonincreasing }))?;
    let budgets: Vec<Value> = table
        .rows
        .iter()
        .map(|x| json!({ "side": x.side, "rho": x.rho_budget, "drho": x.drho_budget }))
        .collect();
    ctx.bound("sweep_budgets", &budgets);
    println!(
        "{} boxes against L = {}; nonincreasing: {nonincreasing}",
        table.rows.len(),
        table.reference_side
    );
    Ok(())
}

pub fn oracle(ctx: &mut Context) -> Result<(), CliError> {
    let r = &ctx.res;
    let m_max = ctx.cfg.ks.m_max;
    let sums = GrandCanonicalSums::compute(
        &ctx.cfg.oracle,
        r.grid.clone(),
        &r.u,
        r.consts.beta,
        r.z,
        r.consts.stability_b,
        m_max,
    )?;
    let ideal = matches!(r.u, PairPotential::Ideal).then(|| {
        let exact = (r.z * r.grid.cube.volume()).exp();
        json!({ "exp_z_volume": exact, "difference": sums.xi.xi - exact })
    });
    let xi = json!({
        "N_max": ctx.cfg.oracle.n_max_particles,
        "xi": sums.xi.xi,
        "xi_tail": sums.xi.tail,
        "rho_tail": sums.rho_tail,
        "ideal_gas": ideal,
    });
    for (m, (zm, rho)) in sums.numerators.iter().zip(&sums.rho).enumerate() {
        ctx.out.write_grid(&format!("Z_{}", m + 1), zm)?;
        ctx.out.write_grid(&format!("rho_{}", m + 1), rho)?;
    }
    ctx.out.write_json("xi.json", &xi)?;
    ctx.bound("xi_tail", &sums.xi.tail);
    ctx.bound("rho_tail", &sums.rho_tail);

    if let Some(v) = ctx.res.v.clone() {
        if ctx.cfg.oracle.n_max_particles >= 4 {
            let full = GrandCanonicalSums::compute(
                &ctx.cfg.oracle,
                ctx.res.grid.clone(),
                &ctx.res.u,
                ctx.res.consts.beta,
                ctx.res.z,
                ctx.res.consts.stability_b,
                4,
            )?;
            let d = DerivativeOracle::compute(&full, &v)?;
            ctx.out.write_grid("drho_1", &d.d_rho1)?;
            ctx.out.write_grid("drho_2", &d.d_rho2)?;
            ctx.out
                .write_json("derivatives.json", &json!({ "d_xi": d.d_xi, "tails": d.tails() }))?;
            ctx.bound("derivative_tails", &d.tails());
        }
    }

    let comparison = match ctx.gates() {
        Ok(()) => {
            let sys = ctx.system()?;
            let sol = ctx.solve(&sys)?;
            let w = ctx.res.consts.weight();
            let budgets: Vec<f64> = (1..=m_max)
                .map(|m| sol.report.tail_bounds.nodewise(m, w) + sums.rho_tail[m - 1])
                .collect();
            let a: Vec<_> = sol.rho.rows.iter().collect();
            let b: Vec<_> = sums.rho.iter().collect();
            let rep = compare_rows(&a, &b, &budgets, None)?;
            ctx.bound("solver_tail_bounds", &sol.report.tail_bounds);
            Some(rep)
        }
        Err(CliError::Refused(_)) => None,
        Err(e) => return Err(e),
    };
    let pass = comparison.as_ref().is_none_or(|c| c.pass);
    ctx.out.write_json(
        "comparison.json",
        &match &comparison {
            Some(c) => serde_json::to_value(c).unwrap_or(Value::Null),
            None => json!({ "skipped": "solver gates not met" }),
        },
    )?;
    println!(
        "Xi = {:.12e} (tail {:.3e}); solver comparison: {}",
        sums.xi.xi,
        sums.xi.tail,
        match &comparison {
            Some(c) if c.pass => "pass",
            Some(_) => "FAIL",
            None => "skipped",
        }
    );
    if pass {
        Ok(())
    } else {
        Err(CliError::Refused(
            "solver and oracle differ by more than the combined budget".into(),
        ))
    }
}

/// Where outputs go: the flag, then the config, then `ksfluid-out`.
pub fn output_dir(flag: Option<PathBuf>, cfg: &RunConfig, base: &std::path::Path) -> PathBuf {
    flag.or_else(|| {
        cfg.outputs
            .dir
            .as_ref()
            .map(|d| if d.is_absolute() { d.clone() } else { base.join(d) })
    })
    .unwrap_or_else(|| PathBuf::from("ksfluid-out"))
}

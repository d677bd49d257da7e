use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::radial::integrate;
use super::sampling::SamplingConfig;
use super::{mayer_from_value, Envelope, PairPotential, Perturbation};
use crate::error::{KsError, Result};

/// Relative slack applied to sampled envelope comparisons to absorb rounding.
const ENVELOPE_SLACK: f64 = 1e-12;
const MAX_SEGMENTS: usize = 50_000;

/// A sampled radius at which the envelope condition failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub r: f64,
    pub u: f64,
    pub bound: f64,
    /// `"core"` (u >= u_* failed) or `"tail"` (|u| <= u^* failed).
    pub region: &'static str,
}

/// Sampled certificate of the admissibility envelope (not a proof).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityCheck {
    pub admissible: bool,
    pub samples: usize,
    pub violations: Vec<Violation>,
}

/// Checks `u >= u_*` on `(0, s)` and `|u| <= u^*` on `[s, r_max]` on a
/// geometric sample grid.
pub fn check_admissible(u: &PairPotential, env: &Envelope, sampling: &SamplingConfig) -> Result<AdmissibilityCheck> {
    if sampling.per_decade < 16 {
        return Err(KsError::InvalidInput(format!(
            "admissibility sampling needs at least 16 points per decade, got {}",
            sampling.per_decade
        )));
    }
    env.validate()?;
    let inner = sampling.inner_points(env);
    let outer = sampling.outer_points(env);
    sanity_check_bound(&inner, |r| env.u_star_lower(r), "u_*")?;
    sanity_check_bound(&outer, |r| env.u_star_upper(r), "u^*")?;

    let mut violations = Vec::new();
    // the split radius itself belongs to the tail condition
    for &r in inner.iter().filter(|&&r| r < env.s) {
        let (val, bound) = (u.evaluate(r), env.u_star_lower(r));
        if !(val >= bound * (1.0 - ENVELOPE_SLACK)) {
            violations.push(Violation {
                r,
                u: val,
                bound,
                region: "core",
            });
        }
    }
    for &r in &outer {
        let (val, bound) = (u.evaluate(r), env.u_star_upper(r));
        if !(val.abs() <= bound * (1.0 + ENVELOPE_SLACK)) {
            violations.push(Violation {
                r,
                u: val,
                bound,
                region: "tail",
            });
        }
    }
    Ok(AdmissibilityCheck {
        admissible: violations.is_empty(),
        samples: inner.len() + outer.len(),
        violations,
    })
}

fn sanity_check_bound(points: &[f64], b: impl Fn(f64) -> f64, name: &str) -> Result<()> {
    let vals: Vec<f64> = points.iter().map(|&r| b(r)).collect();
    if vals.iter().any(|&x| !(x > 0.0)) {
        return Err(KsError::InvalidInput(format!(
            "{name} is not positive on the sample grid"
        )));
    }
    if vals.windows(2).any(|w| w[1] > w[0]) {
        return Err(KsError::InvalidInput(format!(
            "{name} is not decreasing on the sample grid"
        )));
    }
    Ok(())
}

fn ratio(v: f64, w: f64) -> f64 {
    if v == 0.0 || w == f64::INFINITY {
        0.0
    } else if w == 0.0 || !v.is_finite() {
        f64::INFINITY
    } else {
        (v / w).abs()
    }
}

/// Sampled `max(sup |v/u| on (0, s), sup |v/u^*| on (s, ∞))`; `+inf` means `v` is
/// outside the perturbation space.
pub fn vu_norm(v: &Perturbation, u: &PairPotential, env: &Envelope, sampling: &SamplingConfig) -> f64 {
    let inner = sampling.inner_points(env);
    let outer = sampling.outer_points(env);
    let core = inner
        .iter()
        .filter(|&&r| r < env.s)
        .map(|&r| ratio(v.evaluate(r), u.evaluate(r)))
        .fold(0.0, f64::max);
    let tail = outer
        .iter()
        .filter(|&&r| r > env.s)
        .map(|&r| ratio(v.evaluate(r), env.u_star_upper(r)))
        .fold(0.0, f64::max);
    core.max(tail)
}

/// `u + t v`, provided `||t v|| <= t0`.
pub fn perturbed(
    u: &PairPotential,
    env: &Envelope,
    v: &Perturbation,
    t: f64,
    t0: f64,
    sampling: &SamplingConfig,
) -> Result<PairPotential> {
    if !(t0 > 0.0 && t0 < 1.0) {
        return Err(KsError::InvalidInput(format!("t0 must lie in (0, 1), got {t0}")));
    }
    if t == 0.0 {
        return Ok(u.clone());
    }
    let norm = vu_norm(&v.scaled(t), u, env, sampling);
    if !(norm <= t0) {
        return Err(KsError::Gate(format!("perturbation norm {norm:.6e} exceeds t0 = {t0}")));
    }
    Ok(PairPotential::Perturbed {
        base: Arc::new(u.clone()),
        v: v.clone(),
        t,
    })
}

/// A regularity integral with its error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CBetaEstimate {
    pub value: f64,
    pub quadrature_error: f64,
    /// Bound on the neglected integral beyond `r_max`.
    pub tail_bound: f64,
    pub r_max: f64,
}

impl CBetaEstimate {
    pub fn error_bar(&self) -> f64 {
        self.quadrature_error + self.tail_bound
    }
}

/// `4π ∫_0^∞ |exp(-β u) - 1| r^2 dr`.
pub fn c_beta(u: &PairPotential, beta: f64, env: &Envelope, stability_b: f64, tol: f64) -> Result<CBetaEstimate> {
    c_beta_tail(u, beta, env, stability_b, 0.0, tol)
}

/// `4π ∫_d^∞ |exp(-β u) - 1| r^2 dr`.
pub fn c_beta_tail(
    u: &PairPotential,
    beta: f64,
    env: &Envelope,
    stability_b: f64,
    d: f64,
    tol: f64,
) -> Result<CBetaEstimate> {
    if !(d >= 0.0) {
        return Err(KsError::InvalidInput(format!(
            "tail radius must be nonnegative, got {d}"
        )));
    }
    if !(tol > 0.0) {
        return Err(KsError::InvalidInput("quadrature tolerance must be positive".into()));
    }
    let prefactor = beta * (2.0 * beta * stability_b).exp();
    let tail_at = |r: f64| prefactor * env.tail_integral(r);
    let mut r_max = env.tail_radius(tol / prefactor);
    let mut cuts = u.breakpoints();
    cuts.push(env.s);
    r_max = cuts.iter().copied().filter(|x| x.is_finite()).fold(r_max, f64::max) * (1.0 + 1e-12);
    let mut x = env.s;
    while x < r_max {
        cuts.push(x);
        x *= 2.0;
    }
    if d >= r_max {
        return Ok(CBetaEstimate {
            value: 0.0,
            quadrature_error: 0.0,
            tail_bound: tail_at(d),
            r_max: d,
        });
    }
    let integrand = |r: f64| 4.0 * PI * mayer_from_value(beta, u.evaluate(r)).abs() * r * r;
    let res = integrate(integrand, d, r_max, &cuts, tol, MAX_SEGMENTS)?;
    Ok(CBetaEstimate {
        value: res.value,
        quadrature_error: res.error,
        tail_bound: tail_at(r_max),
        r_max,
    })
}

/// Upper limit `1 / (c_β e^{2βB+1})` on the activity.
pub fn activity_bound(c_beta: f64, stability_b: f64, beta: f64) -> Result<f64> {
    if !(c_beta > 0.0) {
        return Err(KsError::InvalidInput(format!("c_beta must be positive, got {c_beta}")));
    }
    if !(stability_b >= 0.0) {
        return Err(KsError::InvalidInput(format!(
            "B must be nonnegative, got {stability_b}"
        )));
    }
    Ok(1.0 / (c_beta * (2.0 * beta * stability_b + 1.0).exp()))
}

/// Largest `-U_N / N` seen over random configurations. Non-certifying: it
/// can only show that a configured `B` is too small.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityProbe {
    pub particles: usize,
    pub samples: usize,
    pub max_energy_deficit: f64,
    pub consistent_with_b: bool,
    pub certifying: bool,
}

pub fn stability_probe(
    u: &PairPotential,
    stability_b: f64,
    particles: usize,
    side: f64,
    samples: usize,
    seed: u64,
) -> StabilityProbe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut pos = vec![[0.0f64; 3]; particles];
    for _ in 0..samples {
        for p in pos.iter_mut() {
            for c in p.iter_mut() {
                *c = side * (rng.random::<f64>() - 0.5);
            }
        }
        let mut energy = 0.0;
        for i in 0..particles {
            for j in 0..i {
                let d = ((pos[i][0] - pos[j][0]).powi(2)
                    + (pos[i][1] - pos[j][1]).powi(2)
                    + (pos[i][2] - pos[j][2]).powi(2))
                .sqrt();
                energy += u.evaluate(d);
            }
        }
        if particles > 0 {
            worst = worst.max(-energy / particles as f64);
        }
    }
    StabilityProbe {
        particles,
        samples,
        max_energy_deficit: worst,
        consistent_with_b: worst <= stability_b,
        certifying: false,
    }
}

/// Stability and regularity constants that gate every downstream run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub beta: f64,
    pub c_beta: f64,
    pub c_beta_error: f64,
    pub stability_b: f64,
    pub t0: f64,
    pub z_max: f64,
    /// `(d, c_{β,d})` at `d = s, 2s, 4s, ..`.
    pub c_beta_d: Vec<(f64, f64)>,
    pub admissible: bool,
    pub diagnostics: Vec<String>,
    pub stability_probe: Option<StabilityProbe>,
}

impl RegularityReport {
    pub fn compute(
        u: &PairPotential,
        env: &Envelope,
        beta: f64,
        stability_b: f64,
        t0: f64,
        tol: f64,
        sampling: &SamplingConfig,
    ) -> Result<Self> {
        if !(t0 > 0.0 && t0 < 1.0) {
            return Err(KsError::InvalidInput(format!("t0 must lie in (0, 1), got {t0}")));
        }
        let check = check_admissible(u, env, sampling)?;
        let mut diagnostics: Vec<String> = check
            .violations
            .iter()
            .take(32)
            .map(|v| {
                format!(
                    "{} violation at r = {:.6e}: u = {:.6e}, bound = {:.6e}",
                    v.region, v.r, v.u, v.bound
                )
            })
            .collect();
        if check.violations.len() > 32 {
            diagnostics.push(format!("... {} violations in total", check.violations.len()));
        }
        let cb = c_beta(u, beta, env, stability_b, tol)?;
        let z_max = activity_bound(cb.value, stability_b, beta)?;
        let mut c_beta_d = Vec::new();
        let mut d = env.s;
        for _ in 0..6 {
            c_beta_d.push((d, c_beta_tail(u, beta, env, stability_b, d, tol)?.value));
            d *= 2.0;
        }
        Ok(Self {
            beta,
            c_beta: cb.value,
            c_beta_error: cb.error_bar(),
            stability_b,
            t0,
            z_max,
            c_beta_d,
            admissible: check.admissible,
            diagnostics,
            stability_probe: None,
        })
    }

    /// `q = z c_β e^{2βB+1}`, the a-priori contraction factor of the hierarchy.
    pub fn contraction_factor(&self, z: f64) -> f64 {
        z * self.c_beta * (2.0 * self.beta * self.stability_b + 1.0).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::BoundForm;

    fn hs() -> (PairPotential, Envelope) {
        (
            PairPotential::hard_sphere(1.0).unwrap(),
            Envelope::new(
                1.0,
                BoundForm::InversePower {
                    coefficient: 1.0,
                    exponent: 4.0,
                    length: 1.0,
                },
                BoundForm::Exponential {
                    coefficient: 1.0,
                    rate: 1.0,
                },
            )
            .unwrap(),
        )
    }

    fn lj_env(s: f64) -> Envelope {
        Envelope::new(
            s,
            BoundForm::InversePower {
                coefficient: 2.0,
                exponent: 12.0,
                length: 1.0,
            },
            BoundForm::InversePower {
                coefficient: 8.0,
                exponent: 6.0,
                length: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn hard_sphere_is_admissible() {
        let (u, env) = hs();
        let c = check_admissible(&u, &env, &SamplingConfig::default()).unwrap();
        assert!(c.admissible, "{:?}", &c.violations[..c.violations.len().min(3)]);
    }

    #[test]
    fn lennard_jones_split_radius() {
        // 4(x^12 - x^6) >= 2 x^12 needs x^6 >= 2, i.e. r <= 2^{-1/6} ≈ 0.8909
        let u = PairPotential::lennard_jones(1.0, 1.0).unwrap();
        let ok = check_admissible(&u, &lj_env(0.88), &SamplingConfig::default()).unwrap();
        assert!(ok.admissible);
        let bad = check_admissible(&u, &lj_env(0.9), &SamplingConfig::default()).unwrap();
        assert!(!bad.admissible);
        let edge = 2f64.powf(-1.0 / 6.0);
        for v in &bad.violations {
            assert_eq!(v.region, "core");
            assert!(v.r > edge * (1.0 - 1e-9) && v.r <= 0.9);
        }
    }

    #[test]
    fn zero_potential_is_not_admissible() {
        let (_, env) = hs();
        let c = check_admissible(&PairPotential::Ideal, &env, &SamplingConfig::default()).unwrap();
        assert!(!c.admissible);
        assert!(c.violations.iter().any(|v| v.region == "core"));
    }

    #[test]
    fn sampling_density_precondition() {
        let (u, env) = hs();
        assert!(check_admissible(&u, &env, &SamplingConfig::with_density(8)).is_err());
    }

    #[test]
    fn vu_norm_examples() {
        let (u, env) = hs();
        let s = SamplingConfig::default();
        assert_eq!(vu_norm(&Perturbation::Zero, &u, &env, &s), 0.0);
        let v = Perturbation::Exponential {
            amplitude: 1.0,
            rate: 1.0,
            r_min: 0.0,
            r_max: f64::INFINITY,
        };
        assert!((vu_norm(&v, &u, &env, &s) - 1.0).abs() < 1e-14);

        // v = u/2 with u = u^* on the tail
        let env2 = Envelope::new(
            1.0,
            BoundForm::InversePower {
                coefficient: 1.0,
                exponent: 4.0,
                length: 1.0,
            },
            BoundForm::InversePower {
                coefficient: 1.0,
                exponent: 4.0,
                length: 1.0,
            },
        )
        .unwrap();
        let u2 = Arc::new(PairPotential::custom("r^-4", |r| r.powi(-4)));
        let half = Perturbation::ScaledPotential {
            factor: 0.5,
            potential: u2.clone(),
        };
        assert!((vu_norm(&half, &u2, &env2, &s) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn c_beta_hard_sphere_volumes() {
        let (u, env) = hs();
        for beta in [0.3, 1.0, 4.0] {
            let c = c_beta(&u, beta, &env, 0.0, 1e-10).unwrap();
            assert!((c.value - 4.0 * PI / 3.0).abs() < 1e-9, "{c:?}");
        }
        let wide = PairPotential::hard_sphere(2.0).unwrap();
        let c = c_beta(&wide, 1.0, &env, 0.0, 1e-10).unwrap();
        assert!((c.value - 32.0 * PI / 3.0).abs() < 1e-9);
    }

    #[test]
    fn c_beta_tail_shells() {
        let (u, env) = hs();
        let t = c_beta_tail(&u, 1.0, &env, 0.0, 1.0, 1e-10).unwrap();
        assert!(t.value.abs() < 1e-12);
        let t = c_beta_tail(&u, 1.0, &env, 0.0, 0.5, 1e-10).unwrap();
        assert!((t.value - 4.0 * PI / 3.0 * (1.0 - 0.125)).abs() < 1e-9);
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn c_beta_lennard_jones_against_reference_rule() {
        let u = PairPotential::lennard_jones(1.0, 1.0).unwrap();
        let env = lj_env(0.88);
        let c = c_beta(&u, 0.5, &env, 0.0, 1e-10).unwrap();
        let g = |r: f64| 4.0 * PI * ((-0.5 * u.evaluate(r)).exp() - 1.0).abs() * r * r;
        // composite Simpson on [1e-6, 60] plus the analytic LJ tail 4π ∫ β·4 r^-6 r^2
        let head = simpson(g, 1e-6, 1.0, 200_000) + simpson(g, 1.0, 60.0, 2_000_000);
        let tail_approx = 4.0 * PI * 0.5 * 4.0 / (3.0 * 60f64.powi(3));
        let reference = head + tail_approx;
        assert!(c.value > 0.0 && c.value.is_finite());
        assert!((c.value - reference).abs() < 1e-7, "{} vs {}", c.value, reference);

        let t3 = c_beta_tail(&u, 0.5, &env, 0.0, 3.0, 1e-10).unwrap().value;
        let t4 = c_beta_tail(&u, 0.5, &env, 0.0, 4.0, 1e-10).unwrap().value;
        let ref3 = simpson(g, 3.0, 60.0, 2_000_000) + tail_approx;
        assert!(t3 > t4 && t4 > 0.0);
        assert!((t3 - ref3).abs() < 1e-8);
    }

    #[test]
    fn activity_bound_examples() {
        let z = activity_bound(4.0 * PI / 3.0, 0.0, 1.0).unwrap();
        assert!((z - 3.0 / (4.0 * PI * std::f64::consts::E)).abs() < 1e-15);
        assert!((z - 0.0878247).abs() < 1e-6);
        assert!((activity_bound(1.0, 0.0, 7.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let v = activity_bound(2.0, 0.25, 2.0).unwrap();
        assert!((v - 1.0 / (2.0 * 1f64.exp().powi(2))).abs() < 1e-15);
        assert!((v - 0.067668).abs() < 1e-6);
        assert!(activity_bound(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn perturbed_gate() {
        let (u, env) = hs();
        let s = SamplingConfig::default();
        let v = Perturbation::Exponential {
            amplitude: 0.3,
            rate: 1.0,
            r_min: 1.0,
            r_max: f64::INFINITY,
        };
        assert!((vu_norm(&v, &u, &env, &s) - 0.3).abs() < 1e-14);
        assert!(perturbed(&u, &env, &v, 1.0, 0.5, &s).is_ok());
        let err = perturbed(&u, &env, &v, 2.0, 0.5, &s).unwrap_err();
        assert!(err.to_string().contains("6.0000"), "{err}");
        let same = perturbed(&u, &env, &v, 0.0, 0.5, &s).unwrap();
        assert_eq!(same.evaluate(0.5), f64::INFINITY);
        assert_eq!(same.evaluate(1.5), 0.0);
    }

    #[test]
    fn report_for_hard_spheres() {
        let (u, env) = hs();
        let r = RegularityReport::compute(&u, &env, 1.0, 0.0, 0.5, 1e-10, &SamplingConfig::default()).unwrap();
        assert!(r.admissible);
        assert_eq!(r.z_max, activity_bound(r.c_beta, 0.0, 1.0).unwrap());
        assert!(r.c_beta_d.iter().all(|&(_, c)| c <= r.c_beta));
        assert!(r.c_beta_d.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn probe_does_not_contradict_hard_sphere_stability() {
        let u = PairPotential::hard_sphere(1.0).unwrap();
        let p = stability_probe(&u, 0.0, 6, 3.0, 200, 7);
        assert!(p.consistent_with_b && !p.certifying);
        let lj = PairPotential::lennard_jones(1.0, 1.0).unwrap();
        let p = stability_probe(&lj, 0.0, 8, 2.0, 500, 7);
        // an attractive well makes B = 0 too small somewhere
        assert!(p.max_energy_deficit.is_finite());
    }

    proptest::proptest! {
        #[test]
        fn vu_norm_is_homogeneous(alpha in -5.0f64..5.0, amp in 0.01f64..2.0, rate in 0.5f64..3.0) {
            let (u, env) = hs();
            let s = SamplingConfig::with_density(64);
            let v = Perturbation::Exponential { amplitude: amp, rate, r_min: 0.0, r_max: f64::INFINITY };
            let n1 = vu_norm(&v, &u, &env, &s);
            let n2 = vu_norm(&v.scaled(alpha), &u, &env, &s);
            proptest::prop_assert!((n2 - alpha.abs() * n1).abs() <= 4.0 * f64::EPSILON * n2.max(1e-300));
        }

        #[test]
        fn activity_bound_decreasing(c in 0.1f64..10.0, b in 0.0f64..2.0, beta in 0.1f64..3.0) {
            let z = activity_bound(c, b, beta).unwrap();
            proptest::prop_assert!(activity_bound(c * 1.01, b, beta).unwrap() < z);
            proptest::prop_assert!(activity_bound(c, b + 0.01, beta).unwrap() < z);
        }

        #[test]
        fn widening_the_core_does_not_reduce_inner_contribution(a in 0.2f64..0.9, extra in 0.0f64..0.1) {
            // hard cores only: integrand is 1 inside the core and 0 outside
            let (_, env) = hs();
            let u1 = PairPotential::hard_sphere(a).unwrap();
            let u2 = PairPotential::hard_sphere(a + extra).unwrap();
            let c1 = c_beta(&u1, 1.0, &env, 0.0, 1e-10).unwrap().value;
            let c2 = c_beta(&u2, 1.0, &env, 0.0, 1e-10).unwrap().value;
            proptest::prop_assert!(c2 >= c1 - 1e-9);
        }
    }
}

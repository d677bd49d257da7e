//! Pair potentials, admissibility envelopes, perturbations and the
//! stability/regularity constants derived from them.

mod envelope;
mod perturbation;
pub mod radial;
mod regularity;
mod sampling;
mod table;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};

pub use envelope::{BoundForm, Envelope};
pub use perturbation::Perturbation;
pub use regularity::{
    activity_bound, c_beta, c_beta_tail, check_admissible, perturbed, stability_probe, vu_norm, AdmissibilityCheck,
    CBetaEstimate, RegularityReport, StabilityProbe, Violation,
};
pub use sampling::SamplingConfig;
pub use table::{CoreForm, Table, TailForm};

/// Separation used in place of `r = 0` when two particles share a grid node.
pub const MIN_SEPARATION: f64 = 1e-12;

/// Signature of user-supplied radial functions.
pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Inverse temperature and activity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoParams {
    pub beta: f64,
    pub z: f64,
}

impl ThermoParams {
    pub fn new(beta: f64, z: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(KsError::InvalidInput(format!("beta must be positive, got {beta}")));
        }
        if !(z > 0.0 && z.is_finite()) {
            return Err(KsError::InvalidInput(format!("activity must be positive, got {z}")));
        }
        Ok(Self { beta, z })
    }
}

/// A spherically symmetric pair potential `u(r)`; `+inf` encodes hard cores.
#[derive(Clone)]
pub enum PairPotential {
    HardSphere {
        diameter: f64,
    },
    LennardJones {
        epsilon: f64,
        sigma: f64,
    },
    /// Lennard-Jones cut (not shifted) at `cutoff`.
    TruncatedLennardJones {
        epsilon: f64,
        sigma: f64,
        cutoff: f64,
    },
    Tabulated(Arc<Table>),
    /// `u == 0`, the ideal gas. Not admissible; used with explicit overrides.
    Ideal,
    Custom {
        name: String,
        f: RadialFn,
        breakpoints: Vec<f64>,
    },
    /// `base + t * v`.
    Perturbed {
        base: Arc<PairPotential>,
        v: Perturbation,
        t: f64,
    },
}

impl fmt::Debug for PairPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::HardSphere { diameter } => write!(f, "HardSphere(a={diameter})"),
            Self::LennardJones { epsilon, sigma } => {
                write!(f, "LennardJones(eps={epsilon}, sigma={sigma})")
            }
            Self::TruncatedLennardJones { epsilon, sigma, cutoff } => {
                write!(f, "TruncatedLennardJones(eps={epsilon}, sigma={sigma}, rc={cutoff})")
            }
            Self::Tabulated(t) => write!(f, "Tabulated({} nodes)", t.len()),
            Self::Ideal => write!(f, "Ideal"),
            Self::Custom { name, .. } => write!(f, "Custom({name})"),
            Self::Perturbed { base, v, t } => write!(f, "Perturbed({base:?} + {t} * {v:?})"),
        }
    }
}

impl PairPotential {
    pub fn hard_sphere(diameter: f64) -> Result<Self> {
        positive("diameter", diameter)?;
        Ok(Self::HardSphere { diameter })
    }

    pub fn lennard_jones(epsilon: f64, sigma: f64) -> Result<Self> {
        positive("epsilon", epsilon)?;
        positive("sigma", sigma)?;
        Ok(Self::LennardJones { epsilon, sigma })
    }

    pub fn truncated_lennard_jones(epsilon: f64, sigma: f64, cutoff: f64) -> Result<Self> {
        positive("epsilon", epsilon)?;
        positive("sigma", sigma)?;
        positive("cutoff", cutoff)?;
        Ok(Self::TruncatedLennardJones { epsilon, sigma, cutoff })
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom {
            name: name.into(),
            f: Arc::new(f),
            breakpoints: Vec::new(),
        }
    }

    /// Short tag naming the family of the potential.
    pub fn kind_tag(&self) -> &'static str {
        match self {
            Self::HardSphere { .. } => "hard-sphere",
            Self::LennardJones { .. } => "lennard-jones",
            Self::TruncatedLennardJones { .. } => "truncated-lennard-jones",
            Self::Tabulated(_) => "tabulated",
            Self::Ideal => "ideal",
            Self::Custom { .. } | Self::Perturbed { .. } => "custom",
        }
    }

    /// `u(r)`. Separations below [`MIN_SEPARATION`] are clamped to it.
    pub fn evaluate(&self, r: f64) -> f64 {
        let r = r.max(MIN_SEPARATION);
        match self {
            Self::HardSphere { diameter } => {
                if r < *diameter {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Self::LennardJones { epsilon, sigma } => lj(*epsilon, *sigma, r),
            Self::TruncatedLennardJones { epsilon, sigma, cutoff } => {
                if r < *cutoff {
                    lj(*epsilon, *sigma, r)
                } else {
                    0.0
                }
            }
            Self::Tabulated(t) => t.evaluate(r),
            Self::Ideal => 0.0,
            Self::Custom { f, .. } => f(r),
            Self::Perturbed { base, v, t } => {
                let u = base.evaluate(r);
                if u == f64::INFINITY {
                    u
                } else {
                    u + t * v.evaluate(r)
                }
            }
        }
    }

    /// Radii where `u` may jump or kink; used to split radial quadratures.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::HardSphere { diameter } => vec![*diameter],
            Self::TruncatedLennardJones { cutoff, sigma, .. } => vec![*sigma, *cutoff],
            Self::LennardJones { sigma, .. } => vec![*sigma],
            Self::Tabulated(t) => t.nodes().to_vec(),
            Self::Ideal => Vec::new(),
            Self::Custom { breakpoints, .. } => breakpoints.clone(),
            Self::Perturbed { base, v, .. } => {
                let mut b = base.breakpoints();
                b.extend(v.breakpoints());
                b
            }
        }
    }
}

fn lj(epsilon: f64, sigma: f64, r: f64) -> f64 {
    let x6 = (sigma / r).powi(6);
    4.0 * epsilon * (x6 * x6 - x6)
}

pub(crate) fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(KsError::InvalidInput(format!(
            "{name} must be positive and finite, got {x}"
        )))
    }
}

/// Boltzmann factor `exp(-beta u)`, with `exp(-inf) = 0`.
#[inline]
pub fn boltzmann(beta: f64, u: f64) -> f64 {
    if u == f64::INFINITY {
        0.0
    } else {
        (-beta * u).exp()
    }
}

/// Mayer function `exp(-beta u(r)) - 1`.
pub fn mayer_f(u: &PairPotential, beta: f64, r: f64) -> f64 {
    mayer_from_value(beta, u.evaluate(r))
}

#[inline]
pub(crate) fn mayer_from_value(beta: f64, u: f64) -> f64 {
    if u == f64::INFINITY {
        -1.0
    } else {
        (-beta * u).exp_m1()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hard_sphere_core() {
        let u = PairPotential::hard_sphere(1.0).unwrap();
        assert_eq!(u.evaluate(0.5), f64::INFINITY);
        assert_eq!(u.evaluate(1.0), 0.0);
        assert_eq!(u.evaluate(3.0), 0.0);
        assert_eq!(u.evaluate(0.0), f64::INFINITY);
    }

    #[test]
    fn mayer_values() {
        let ideal = PairPotential::Ideal;
        assert_eq!(mayer_f(&ideal, 1.0, 1.3), 0.0);

        let ln2 = PairPotential::custom("ln2", |_| std::f64::consts::LN_2);
        assert!((mayer_f(&ln2, 1.0, 1.0) + 0.5).abs() < 1e-15);

        let lj = PairPotential::lennard_jones(1.0, 1.0).unwrap();
        let rmin = 2f64.powf(1.0 / 6.0);
        assert!((mayer_f(&lj, 1.0, rmin) - 1.718281828459045).abs() < 1e-12);

        let hs = PairPotential::hard_sphere(1.0).unwrap();
        assert_eq!(mayer_f(&hs, 2.0, 0.3), -1.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PairPotential::hard_sphere(0.0).is_err());
        assert!(PairPotential::lennard_jones(1.0, -1.0).is_err());
        assert!(ThermoParams::new(0.0, 0.1).is_err());
        assert!(ThermoParams::new(1.0, 0.0).is_err());
    }

    #[test]
    fn perturbed_keeps_core_infinite() {
        let base = Arc::new(PairPotential::hard_sphere(1.0).unwrap());
        let v = Perturbation::Constant {
            value: 2.0,
            r_min: 0.0,
            r_max: f64::INFINITY,
        };
        let u = PairPotential::Perturbed { base, v, t: -0.5 };
        assert_eq!(u.evaluate(0.5), f64::INFINITY);
        assert_eq!(u.evaluate(1.5), -1.0);
    }

    proptest::proptest! {
        #[test]
        fn mayer_is_bounded_below(r in 1e-6f64..10.0, beta in 0.01f64..5.0, a in 0.1f64..3.0) {
            let lj = PairPotential::lennard_jones(1.0, a).unwrap();
            let hs = PairPotential::hard_sphere(a).unwrap();
            let f1 = mayer_f(&lj, beta, r);
            let f2 = mayer_f(&hs, beta, r);
            proptest::prop_assert!(f1 >= -1.0);
            proptest::prop_assert!(f2 >= -1.0);
            proptest::prop_assert_eq!(f2 == -1.0, hs.evaluate(r).is_infinite());
        }
    }
}

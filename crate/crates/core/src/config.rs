//! JSON run configuration and its resolution into library objects.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::derivative::SweepSpec;
use crate::error::{KsError, Result};
use crate::ks::{Constants, KsConfig};
use crate::oracle::OracleConfig;
use crate::potentials::{
    c_beta, check_admissible, vu_norm, AdmissibilityCheck, CBetaEstimate, CoreForm, Envelope, PairPotential,
    Perturbation, SamplingConfig, Table, TailForm,
};
use crate::quadrature::{Cube, Grid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    HardSphere {
        diameter: f64,
    },
    LennardJones {
        epsilon: f64,
        sigma: f64,
    },
    TruncatedLennardJones {
        epsilon: f64,
        sigma: f64,
        cutoff: f64,
    },
    /// Two-column `r,u` CSV; relative paths are taken from the config file's directory.
    Tabulated {
        path: PathBuf,
        core: CoreForm,
        tail: TailForm,
    },
    Ideal,
}

impl PotentialSpec {
    pub fn build(&self, base_dir: &Path) -> Result<PairPotential> {
        Ok(match self {
            Self::HardSphere { diameter } => PairPotential::hard_sphere(*diameter)?,
            Self::LennardJones { epsilon, sigma } => PairPotential::lennard_jones(*epsilon, *sigma)?,
            Self::TruncatedLennardJones { epsilon, sigma, cutoff } => {
                PairPotential::truncated_lennard_jones(*epsilon, *sigma, *cutoff)?
            }
            Self::Tabulated { path, core, tail } => {
                let p = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                PairPotential::Tabulated(Arc::new(Table::from_csv(&p, *core, *tail)?))
            }
            Self::Ideal => PairPotential::Ideal,
        })
    }
}

/// A radial perturbation. Windows default to `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PerturbationSpec {
    Zero,
    Constant {
        value: f64,
        #[serde(default)]
        r_min: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_max: Option<f64>,
    },
    Exponential {
        amplitude: f64,
        rate: f64,
        #[serde(default)]
        r_min: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_max: Option<f64>,
    },
    InversePower {
        amplitude: f64,
        exponent: f64,
        #[serde(default)]
        r_min: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_max: Option<f64>,
    },
    Bump {
        amplitude: f64,
        center: f64,
        half_width: f64,
    },
    /// `factor * u` for the configured potential.
    ScaledPotential {
        factor: f64,
    },
}

fn finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(KsError::InvalidInput(format!("{name} must be finite, got {x}")))
    }
}

fn window(r_min: f64, r_max: Option<f64>) -> Result<(f64, f64)> {
    let hi = r_max.unwrap_or(f64::INFINITY);
    if !(r_min >= 0.0 && hi > r_min) {
        return Err(KsError::InvalidInput(format!(
            "bad perturbation window [{r_min}, {hi})"
        )));
    }
    Ok((r_min, hi))
}

impl PerturbationSpec {
    pub fn build(&self, u: &PairPotential) -> Result<Perturbation> {
        Ok(match *self {
            Self::Zero => Perturbation::Zero,
            Self::Constant { value, r_min, r_max } => {
                let (r_min, r_max) = window(r_min, r_max)?;
                Perturbation::Constant {
                    value: finite("value", value)?,
                    r_min,
                    r_max,
                }
            }
            Self::Exponential {
                amplitude,
                rate,
                r_min,
                r_max,
            } => {
                let (r_min, r_max) = window(r_min, r_max)?;
                Perturbation::Exponential {
                    amplitude: finite("amplitude", amplitude)?,
                    rate: finite("rate", rate)?,
                    r_min,
                    r_max,
                }
            }
            Self::InversePower {
                amplitude,
                exponent,
                r_min,
                r_max,
            } => {
                let (r_min, r_max) = window(r_min, r_max)?;
                Perturbation::InversePower {
                    amplitude: finite("amplitude", amplitude)?,
                    exponent: finite("exponent", exponent)?,
                    r_min,
                    r_max,
                }
            }
            Self::Bump {
                amplitude,
                center,
                half_width,
            } => {
                if !(half_width > 0.0 && center >= 0.0) {
                    return Err(KsError::InvalidInput(
                        "bump needs center >= 0 and half_width > 0".into(),
                    ));
                }
                Perturbation::Bump {
                    amplitude: finite("amplitude", amplitude)?,
                    center,
                    half_width,
                }
            }
            Self::ScaledPotential { factor } => Perturbation::ScaledPotential {
                factor: finite("factor", factor)?,
                potential: Arc::new(u.clone()),
            },
        })
    }
}

/// Exactly one of `z` and `z_fraction` (of `z_max`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thermo {
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "L")]
    pub side: f64,
    #[serde(rename = "n_g")]
    pub nodes_per_axis: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DerivativeSettings {
    /// Largest and smallest finite-difference step.
    pub eps_hi: f64,
    pub eps_lo: f64,
    /// Random node configurations for the `k_n` remainder.
    pub kn_samples: usize,
    /// Random tuples for the pinned-`j*` check.
    pub jstar_samples: usize,
}

impl Default for DerivativeSettings {
    fn default() -> Self {
        Self {
            eps_hi: 0.1,
            eps_lo: 1e-3,
            kn_samples: 256,
            jstar_samples: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub inner_side: f64,
    pub sides: Vec<f64>,
    pub spacing: f64,
    #[serde(default = "two")]
    pub m_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub formats: Vec<OutputFormat>,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            dir: None,
            formats: vec![OutputFormat::Csv],
        }
    }
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

fn half() -> f64 {
    0.5
}

fn default_tol() -> f64 {
    1e-10
}

fn default_cert() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Envelope>,
    pub thermo: Thermo,
    #[serde(rename = "stability_B", default)]
    pub stability_b: f64,
    #[serde(default = "half")]
    pub t0: f64,
    pub grid: GridSpec,
    #[serde(default)]
    pub ks: KsConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(default)]
    pub derivative: DerivativeSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSettings>,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default = "default_tol")]
    pub quadrature_tol: f64,
    #[serde(default = "default_cert")]
    pub certificate_samples: usize,
    #[serde(default)]
    pub outputs: Outputs,
}

/// A configuration turned into potentials, constants and a grid.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub u: PairPotential,
    pub env: Option<Envelope>,
    /// `None` for the ideal gas.
    pub c_beta: Option<CBetaEstimate>,
    pub admissibility: Option<AdmissibilityCheck>,
    pub consts: Constants,
    pub z_max: Option<f64>,
    pub z: f64,
    pub t0: f64,
    pub grid: Arc<Grid>,
    pub v: Option<Perturbation>,
    pub v_norm: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field checks that need no quadrature.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KsError::InvalidInput(m));
        if !(self.thermo.beta > 0.0 && self.thermo.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.thermo.beta));
        }
        match (self.thermo.z, self.thermo.z_fraction) {
            (Some(z), None) if z > 0.0 && z.is_finite() => {}
            (None, Some(f)) if f > 0.0 && f.is_finite() => {}
            (Some(_), Some(_)) | (None, None) => {
                return bad("give exactly one of thermo.z and thermo.z_fraction".into())
            }
            _ => return bad("activity must be positive".into()),
        }
        if !(self.stability_b >= 0.0 && self.stability_b.is_finite()) {
            return bad(format!("stability_B must be nonnegative, got {}", self.stability_b));
        }
        if !(self.t0 > 0.0 && self.t0 < 1.0) {
            return bad(format!("t0 must lie in (0, 1), got {}", self.t0));
        }
        if self.grid.nodes_per_axis == 0 || !(self.grid.side > 0.0 && self.grid.side.is_finite()) {
            return bad("grid needs L > 0 and n_g >= 1".into());
        }
        self.ks.validate()?;
        self.oracle.validate(self.ks.m_max)?;
        let d = &self.derivative;
        if !(d.eps_hi > 0.0 && d.eps_lo > 0.0 && d.eps_lo <= d.eps_hi) {
            return bad("derivative needs 0 < eps_lo <= eps_hi".into());
        }
        if let Some(s) = &self.sweep {
            if s.m_max < 2 || !(s.spacing > 0.0) {
                return bad("sweep needs m_max >= 2 and spacing > 0".into());
            }
        }
        if !(self.quadrature_tol > 0.0) {
            return bad("quadrature_tol must be positive".into());
        }
        if self.envelope.is_none() && self.potential != PotentialSpec::Ideal {
            return bad("an envelope is required for interacting potentials".into());
        }
        if let Some(e) = &self.envelope {
            e.validate()?;
        }
        Ok(())
    }

    /// Canonical JSON: defaults filled in, fixed field order.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn ks_for_sweep(&self) -> KsConfig {
        match &self.sweep {
            Some(s) => KsConfig {
                m_max: s.m_max,
                ..self.ks
            },
            None => self.ks,
        }
    }

    pub fn sweep_spec(&self) -> Option<SweepSpec> {
        self.sweep.as_ref().map(|s| SweepSpec {
            inner_side: s.inner_side,
            sides: s.sides.clone(),
            spacing: s.spacing,
        })
    }

    /// Builds the potential, computes `c_β` and `z_max`, and fixes `z`.
    /// Gates are left to the caller.
    pub fn resolve(&self, base_dir: &Path) -> Result<Resolved> {
        self.validate()?;
        let beta = self.thermo.beta;
        let u = self.potential.build(base_dir)?;
        let (cb, admissibility) = match (&u, &self.envelope) {
            (PairPotential::Ideal, _) => (None, None),
            (_, Some(env)) => (
                Some(c_beta(&u, beta, env, self.stability_b, self.quadrature_tol)?),
                Some(check_admissible(&u, env, &self.sampling)?),
            ),
            (_, None) => unreachable!("validated"),
        };
        let consts = Constants {
            beta,
            c_beta: cb.map_or(0.0, |c| c.value),
            stability_b: self.stability_b,
        };
        let z_max = consts.z_max();
        let z = match (self.thermo.z, self.thermo.z_fraction, z_max) {
            (Some(z), _, _) => z,
            (None, Some(f), Some(zm)) => f * zm,
            (None, Some(_), None) => {
                return Err(KsError::InvalidInput(
                    "z_fraction needs a potential with c_beta > 0".into(),
                ))
            }
            (None, None, _) => unreachable!("validated"),
        };
        let grid = Arc::new(Grid::new(Cube::new(self.grid.side)?, self.grid.nodes_per_axis)?);
        let v = self.perturbation.as_ref().map(|p| p.build(&u)).transpose()?;
        let v_norm = v.as_ref().map(|v| match &self.envelope {
            Some(env) => vu_norm(v, &u, env, &self.sampling),
            None => sup_norm(v, self.grid.side),
        });
        Ok(Resolved {
            u,
            env: self.envelope,
            c_beta: cb,
            admissibility,
            consts,
            z_max,
            z,
            t0: self.t0,
            grid,
            v,
            v_norm,
        })
    }
}

/// Sampled `sup |v|` on `(0, √3 L]`, the norm used without an envelope.
fn sup_norm(v: &Perturbation, side: f64) -> f64 {
    let r_hi = 3f64.sqrt() * side;
    (0..=4096)
        .map(|k| v.evaluate(r_hi * (k as f64 + 0.5) / 4097.0).abs())
        .fold(0.0, f64::max)
}

impl Resolved {
    /// Activity gate `z < z_max`; the ideal gas never passes it.
    pub fn activity_ok(&self) -> bool {
        self.z_max.is_some_and(|zm| self.z < zm)
    }

    pub fn admissible(&self) -> bool {
        self.admissibility.as_ref().is_some_and(|a| a.admissible)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DESK: &str = r#"{
        "potential": {"kind": "hard-sphere", "params": {"diameter": 1.0}},
        "envelope": {"s": 1.0,
            "lower": {"form": "inverse-power", "coefficient": 1.0, "exponent": 4.0, "length": 1.0},
            "upper": {"form": "exponential", "coefficient": 1.0, "rate": 1.0}},
        "thermo": {"beta": 1.0, "z_fraction": 0.5},
        "grid": {"L": 2.0, "n_g": 3},
        "perturbation": {"kind": "exponential", "params": {"amplitude": 0.125, "rate": 1.0, "r_min": 1.0}}
    }"#;

    #[test]
    fn desk_config_resolves() {
        let cfg = RunConfig::from_json(DESK).unwrap();
        assert_eq!(cfg.ks, KsConfig::default());
        assert_eq!(cfg.t0, 0.5);
        let r = cfg.resolve(Path::new(".")).unwrap();
        let zm = r.z_max.unwrap();
        assert!((r.z - 0.5 * zm).abs() < 1e-15);
        assert!(r.activity_ok() && r.admissible());
        assert!((r.v_norm.unwrap() - 0.125).abs() < 1e-3);
    }

    #[test]
    fn canonical_json_round_trips() {
        let cfg = RunConfig::from_json(DESK).unwrap();
        let text = cfg.canonical_json().unwrap();
        let again = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(text, again.canonical_json().unwrap());
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(matches!(
            RunConfig::from_json(&DESK.replace("\"L\"", "\"side\"")),
            Err(KsError::Json(_))
        ));
        let both = DESK.replace("\"z_fraction\": 0.5", "\"z_fraction\": 0.5, \"z\": 0.01");
        assert!(matches!(RunConfig::from_json(&both), Err(KsError::InvalidInput(_))));
        let low = DESK.replace(
            "\"n_g\": 3}",
            "\"n_g\": 3}, \"ks\": {\"m_max\": 3}, \"oracle\": {\"N_max\": 1}",
        );
        assert!(matches!(RunConfig::from_json(&low), Err(KsError::InvalidInput(_))));
    }

    #[test]
    fn ideal_gas_needs_no_envelope() {
        let text = r#"{"potential": {"kind": "ideal"}, "thermo": {"z": 0.1}, "grid": {"L": 2.0, "n_g": 3},
            "perturbation": {"kind": "constant", "params": {"value": 0.2, "r_max": 1.0}}}"#;
        let r = RunConfig::from_json(text).unwrap().resolve(Path::new(".")).unwrap();
        assert!(r.z_max.is_none() && !r.activity_ok() && !r.admissible());
        assert_eq!(r.consts.weight(), 1.0);
        assert!((r.v_norm.unwrap() - 0.2).abs() < 1e-15);
        let frac = text.replace("\"z\": 0.1", "\"z_fraction\": 0.1");
        assert!(RunConfig::from_json(&frac).unwrap().resolve(Path::new(".")).is_err());
    }
}

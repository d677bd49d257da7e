use std::fmt;
use std::sync::Arc;

use super::{PairPotential, RadialFn};

/// A finite radial perturbation `v(r)` of the pair potential.
///
/// Windowed forms vanish outside `[r_min, r_max)`.
#[derive(Clone)]
pub enum Perturbation {
    Zero,
    Constant {
        value: f64,
        r_min: f64,
        r_max: f64,
    },
    /// `amplitude * exp(-rate * r)`
    Exponential {
        amplitude: f64,
        rate: f64,
        r_min: f64,
        r_max: f64,
    },
    /// `amplitude * r^(-exponent)`
    InversePower {
        amplitude: f64,
        exponent: f64,
        r_min: f64,
        r_max: f64,
    },
    /// Smooth compactly supported bump of height `amplitude` on `center ± half_width`.
    Bump {
        amplitude: f64,
        center: f64,
        half_width: f64,
    },
    /// `factor * u(r)` (finite values only).
    ScaledPotential {
        factor: f64,
        potential: Arc<PairPotential>,
    },
    /// `Σ c_i v_i`.
    Combination(Vec<(f64, Perturbation)>),
    Custom {
        name: String,
        f: RadialFn,
        breakpoints: Vec<f64>,
    },
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant { value, r_min, r_max } => write!(f, "Constant({value} on [{r_min},{r_max}))"),
            Self::Exponential {
                amplitude,
                rate,
                r_min,
                r_max,
            } => {
                write!(f, "Exponential({amplitude} e^(-{rate} r) on [{r_min},{r_max}))")
            }
            Self::InversePower {
                amplitude,
                exponent,
                r_min,
                r_max,
            } => {
                write!(f, "InversePower({amplitude} r^-{exponent} on [{r_min},{r_max}))")
            }
            Self::Bump {
                amplitude,
                center,
                half_width,
            } => {
                write!(f, "Bump({amplitude} at {center}±{half_width})")
            }
            Self::ScaledPotential { factor, potential } => write!(f, "{factor} * {potential:?}"),
            Self::Combination(terms) => write!(f, "Combination({terms:?})"),
            Self::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

fn window(r: f64, lo: f64, hi: f64) -> bool {
    r >= lo && r < hi
}

impl Perturbation {
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom {
            name: name.into(),
            f: Arc::new(f),
            breakpoints: Vec::new(),
        }
    }

    /// `alpha * self`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self::Combination(vec![(alpha, self.clone())])
    }

    /// `self + other`.
    pub fn plus(&self, other: &Perturbation) -> Self {
        Self::Combination(vec![(1.0, self.clone()), (1.0, other.clone())])
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Combination(t) => t.iter().all(|(c, v)| *c == 0.0 || v.is_zero()),
            _ => false,
        }
    }

    pub fn evaluate(&self, r: f64) -> f64 {
        let r = r.max(super::MIN_SEPARATION);
        match self {
            Self::Zero => 0.0,
            Self::Constant { value, r_min, r_max } => {
                if window(r, *r_min, *r_max) {
                    *value
                } else {
                    0.0
                }
            }
            Self::Exponential {
                amplitude,
                rate,
                r_min,
                r_max,
            } => {
                if window(r, *r_min, *r_max) {
                    amplitude * (-rate * r).exp()
                } else {
                    0.0
                }
            }
            Self::InversePower {
                amplitude,
                exponent,
                r_min,
                r_max,
            } => {
                if window(r, *r_min, *r_max) {
                    amplitude * r.powf(-exponent)
                } else {
                    0.0
                }
            }
            Self::Bump {
                amplitude,
                center,
                half_width,
            } => {
                let x = (r - center) / half_width;
                if x.abs() < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - x * x)).exp()
                } else {
                    0.0
                }
            }
            Self::ScaledPotential { factor, potential } => factor * potential.evaluate(r),
            Self::Combination(terms) => terms
                .iter()
                .filter(|(c, _)| *c != 0.0)
                .map(|(c, v)| c * v.evaluate(r))
                .sum(),
            Self::Custom { f, .. } => f(r),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let finite = |xs: &[f64]| xs.iter().copied().filter(|x| x.is_finite() && *x > 0.0).collect();
        match self {
            Self::Zero => Vec::new(),
            Self::Constant { r_min, r_max, .. }
            | Self::Exponential { r_min, r_max, .. }
            | Self::InversePower { r_min, r_max, .. } => finite(&[*r_min, *r_max]),
            Self::Bump { center, half_width, .. } => finite(&[center - half_width, *center, center + half_width]),
            Self::ScaledPotential { potential, .. } => potential.breakpoints(),
            Self::Combination(terms) => terms.iter().flat_map(|(_, v)| v.breakpoints()).collect(),
            Self::Custom { breakpoints, .. } => breakpoints.clone(),
        }
    }
}

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};

/// Parametric positive decreasing function used on one side of the split radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum BoundForm {
    /// `coefficient * (length / r)^exponent`
    InversePower {
        coefficient: f64,
        exponent: f64,
        length: f64,
    },
    /// `coefficient * exp(-rate * r)`
    Exponential { coefficient: f64, rate: f64 },
}

impl BoundForm {
    pub fn evaluate(&self, r: f64) -> f64 {
        match *self {
            Self::InversePower {
                coefficient,
                exponent,
                length,
            } => coefficient * (length / r).powf(exponent),
            Self::Exponential { coefficient, rate } => coefficient * (-rate * r).exp(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Self::InversePower {
                coefficient,
                exponent,
                length,
            } => Self::InversePower {
                coefficient: coefficient * factor,
                exponent,
                length,
            },
            Self::Exponential { coefficient, rate } => Self::Exponential {
                coefficient: coefficient * factor,
                rate,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::InversePower {
                coefficient,
                exponent,
                length,
            } => coefficient > 0.0 && exponent > 0.0 && length > 0.0,
            Self::Exponential { coefficient, rate } => coefficient > 0.0 && rate > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(KsError::InvalidInput(format!(
                "envelope bound {self:?} is not positive and decreasing"
            )))
        }
    }

    /// Whether `∫_0^s b(r) r^2 dr` diverges.
    fn diverges_at_origin(&self) -> bool {
        matches!(*self, Self::InversePower { exponent, .. } if exponent >= 3.0)
    }

    /// `4π ∫_d^∞ b(r) r^2 dr`, or `None` when it diverges.
    fn tail_integral(&self, d: f64) -> Option<f64> {
        match *self {
            Self::InversePower {
                coefficient,
                exponent,
                length,
            } => {
                if exponent <= 3.0 {
                    None
                } else {
                    Some(4.0 * PI * coefficient * length.powf(exponent) * d.powf(3.0 - exponent) / (exponent - 3.0))
                }
            }
            Self::Exponential { coefficient, rate } => {
                let a = rate;
                Some(4.0 * PI * coefficient * (-a * d).exp() * (d * d / a + 2.0 * d / (a * a) + 2.0 / (a * a * a)))
            }
        }
    }
}

/// Lower bound `u_*` on `(0, s]` and upper bound `u^*` on `[s, ∞)` that
/// an admissible potential must respect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub s: f64,
    pub lower: BoundForm,
    pub upper: BoundForm,
}

impl Envelope {
    /// Validates the closed-form integrability conditions.
    pub fn new(s: f64, lower: BoundForm, upper: BoundForm) -> Result<Self> {
        let env = Self { s, lower, upper };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(KsError::InvalidInput(format!(
                "split radius must be positive, got {}",
                self.s
            )));
        }
        self.lower.validate()?;
        self.upper.validate()?;
        if !self.lower.diverges_at_origin() {
            return Err(KsError::InvalidInput(
                "lower envelope must have a divergent integral of u_*(r) r^2 near the origin".into(),
            ));
        }
        if self.upper.tail_integral(self.s).is_none() {
            return Err(KsError::InvalidInput(
                "upper envelope must have a finite integral of u^*(r) r^2 at infinity".into(),
            ));
        }
        Ok(())
    }

    pub fn u_star_lower(&self, r: f64) -> f64 {
        self.lower.evaluate(r)
    }

    pub fn u_star_upper(&self, r: f64) -> f64 {
        self.upper.evaluate(r)
    }

    /// `4π ∫_d^∞ u^*(r) r^2 dr`.
    pub fn tail_integral(&self, d: f64) -> f64 {
        self.upper.tail_integral(d).unwrap_or(f64::INFINITY)
    }

    /// Smallest radius `>= s` (to bisection accuracy) with `tail_integral < threshold`.
    pub fn tail_radius(&self, threshold: f64) -> f64 {
        let mut hi = self.s;
        while self.tail_integral(hi) >= threshold {
            hi *= 2.0;
            if hi > 1e12 {
                return hi;
            }
        }
        if hi == self.s {
            return hi;
        }
        let mut lo = hi / 2.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.tail_integral(mid) < threshold {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// `(q u_*, p u^*)`.
    pub fn scaled(&self, lower_factor: f64, upper_factor: f64) -> Self {
        Self {
            s: self.s,
            lower: self.lower.scaled(lower_factor),
            upper: self.upper.scaled(upper_factor),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hs_env() -> Envelope {
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
        .unwrap()
    }

    #[test]
    fn exponential_tail_integral_closed_form() {
        let env = hs_env();
        // 4π e^{-d}(d^2 + 2d + 2)
        let d: f64 = 2.0;
        let want = 4.0 * PI * (-d).exp() * (d * d + 2.0 * d + 2.0);
        assert!((env.tail_integral(d) - want).abs() < 1e-14);
    }

    #[test]
    fn tail_integral_decreases_to_zero() {
        let env = hs_env();
        let mut prev = env.tail_integral(env.s);
        for k in 1..60 {
            let t = env.tail_integral(env.s + k as f64);
            assert!(t <= prev);
            prev = t;
        }
        assert!(prev < 1e-15);
        let r = env.tail_radius(1e-12);
        assert!(env.tail_integral(r) < 1e-12);
        assert!(env.tail_integral(r * 0.99) >= 1e-12);
    }

    #[test]
    fn rejects_integrable_lower_bound() {
        let e = Envelope::new(
            1.0,
            BoundForm::InversePower {
                coefficient: 1.0,
                exponent: 2.0,
                length: 1.0,
            },
            BoundForm::Exponential {
                coefficient: 1.0,
                rate: 1.0,
            },
        );
        assert!(e.is_err());
        let e = Envelope::new(
            1.0,
            BoundForm::InversePower {
                coefficient: 1.0,
                exponent: 12.0,
                length: 1.0,
            },
            BoundForm::InversePower {
                coefficient: 1.0,
                exponent: 3.0,
                length: 1.0,
            },
        );
        assert!(e.is_err());
        let e = Envelope::new(0.0, hs_env().lower, hs_env().upper);
        assert!(e.is_err());
    }

    #[test]
    fn inverse_power_tail() {
        let upper = BoundForm::InversePower {
            coefficient: 8.0,
            exponent: 6.0,
            length: 1.0,
        };
        let d = 1.5;
        let want = 4.0 * PI * 8.0 / (3.0 * d * d * d);
        assert!((upper.tail_integral(d).unwrap() - want).abs() < 1e-13);
    }
}

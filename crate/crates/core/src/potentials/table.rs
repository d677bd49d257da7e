use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};

/// Behaviour of a tabulated potential below its first node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum CoreForm {
    /// `+inf` below the first node.
    HardCore,
    /// `u_0 (r_0 / r)^p`, continuous at the first node.
    InversePower { exponent: f64 },
}

/// Behaviour of a tabulated potential beyond its last node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum TailForm {
    /// Zero beyond the last node.
    Cutoff,
    /// `u_n (r_n / r)^p`.
    InversePower { exponent: f64 },
    /// `u_n exp(-k (r - r_n))`.
    Exponential { rate: f64 },
}

/// Potential values on strictly increasing abscissae with linear
/// interpolation between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    r: Vec<f64>,
    u: Vec<f64>,
    core: CoreForm,
    tail: TailForm,
}

impl Table {
    pub fn new(r: Vec<f64>, u: Vec<f64>, core: CoreForm, tail: TailForm) -> Result<Self> {
        if r.len() != u.len() || r.len() < 2 {
            return Err(KsError::InvalidInput(
                "table needs at least two (r, u) rows of equal length".into(),
            ));
        }
        if r[0] <= 0.0 {
            return Err(KsError::InvalidInput("table abscissae must be positive".into()));
        }
        if let Some(w) = r.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(KsError::InvalidInput(format!(
                "table abscissae must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(KsError::InvalidInput("table values must be finite".into()));
        }
        Ok(Self { r, u, core, tail })
    }

    /// Reads a two-column `r,u` CSV; a non-numeric first line is treated as a header.
    pub fn from_csv(path: &Path, core: CoreForm, tail: TailForm) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text, core, tail)
    }

    pub fn parse_csv(text: &str, core: CoreForm, tail: TailForm) -> Result<Self> {
        let mut r = Vec::new();
        let mut u = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line
                .split(|c| c == ',' || c == ';' || char::is_whitespace(c))
                .filter(|s| !s.is_empty());
            let (a, b) = match (cols.next(), cols.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(KsError::InvalidInput(format!(
                        "line {}: expected two columns",
                        lineno + 1
                    )))
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    r.push(x);
                    u.push(y);
                }
                _ if r.is_empty() && lineno == 0 => continue,
                _ => {
                    return Err(KsError::InvalidInput(format!(
                        "line {}: could not parse '{line}'",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(r, u, core, tail)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.r
    }

    pub fn evaluate(&self, r: f64) -> f64 {
        let n = self.r.len();
        if r < self.r[0] {
            return match self.core {
                CoreForm::HardCore => f64::INFINITY,
                CoreForm::InversePower { exponent } => self.u[0] * (self.r[0] / r).powf(exponent),
            };
        }
        if r > self.r[n - 1] {
            let (rn, un) = (self.r[n - 1], self.u[n - 1]);
            return match self.tail {
                TailForm::Cutoff => 0.0,
                TailForm::InversePower { exponent } => un * (rn / r).powf(exponent),
                TailForm::Exponential { rate } => un * (-rate * (r - rn)).exp(),
            };
        }
        // first node strictly greater than r
        let hi = self.r.partition_point(|&x| x <= r).min(n - 1);
        let lo = hi - 1;
        let t = (r - self.r[lo]) / (self.r[hi] - self.r[lo]);
        self.u[lo] + t * (self.u[hi] - self.u[lo])
    }
}

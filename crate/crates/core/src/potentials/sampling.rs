use serde::{Deserialize, Serialize};

use super::Envelope;

/// Geometric sampling used for sampled suprema and admissibility certificates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub per_decade: usize,
    /// Smallest sampled radius as a fraction of the split radius.
    pub inner_fraction: f64,
    /// The outer sampling radius is where the envelope tail integral drops below this.
    pub tail_threshold: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            per_decade: 512,
            inner_fraction: 1e-4,
            tail_threshold: 1e-12,
        }
    }
}

impl SamplingConfig {
    pub fn with_density(per_decade: usize) -> Self {
        Self {
            per_decade,
            ..Self::default()
        }
    }

    /// Log-spaced points on `[inner_fraction * s, s]`, both ends included.
    pub fn inner_points(&self, env: &Envelope) -> Vec<f64> {
        geometric(self.inner_fraction * env.s, env.s, self.per_decade)
    }

    /// Log-spaced points on `[s, r_max]`.
    pub fn outer_points(&self, env: &Envelope) -> Vec<f64> {
        let r_max = env.tail_radius(self.tail_threshold).max(env.s * (1.0 + 1e-9));
        geometric(env.s, r_max, self.per_decade)
    }
}

pub(crate) fn geometric(a: f64, b: f64, per_decade: usize) -> Vec<f64> {
    let decades = (b / a).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(1);
    let ratio = (b / a).powf(1.0 / n as f64);
    let mut out = Vec::with_capacity(n + 1);
    let mut x = a;
    for _ in 0..n {
        out.push(x);
        x *= ratio;
    }
    out.push(b);
    out
}

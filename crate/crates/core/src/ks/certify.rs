use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::solve::{grid_kernel_norm, truncation_bounds};
use super::system::KsSystem;
use super::vector::CorrelationVector;
use super::Constants;
use crate::error::Result;
use crate::quadrature::GridFunction;

/// Sampled operator-norm check of `D` and `K` on random unit vectors.
#[derive(Debug, Clone, Serialize)]
pub struct NormCertificate {
    pub samples: usize,
    pub max_d_norm: f64,
    /// `e^{2βB}`.
    pub d_bound: f64,
    pub max_k_norm: f64,
    /// `c e` plus the continuum kernel tail.
    pub k_bound: f64,
    /// Rigorous bound on `‖K‖` for this grid.
    pub grid_k_bound: f64,
    pub d_ok: bool,
    pub k_ok: bool,
}

/// A random vector with entries uniform in `[-1, 1]·c^{-m}`, scaled to unit norm.
pub fn random_unit_vector(sys: &KsSystem, weight: f64, rng: &mut impl Rng) -> Result<CorrelationVector> {
    let rows = (1..=sys.m_max())
        .map(|m| {
            let scale = weight.powi(-(m as i32));
            let vals = (0..sys.grid.tuple_count(m) as usize)
                .map(|_| scale * rng.random_range(-1.0..1.0))
                .collect();
            GridFunction::new(m, sys.grid.clone(), vals)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut v = CorrelationVector::from_rows(rows)?;
    let nrm = v.norm(weight);
    v.scale(1.0 / nrm);
    Ok(v)
}

pub fn operator_norm_certificates(
    sys: &KsSystem,
    consts: &Constants,
    samples: usize,
    seed: u64,
) -> Result<NormCertificate> {
    let w = consts.weight();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut dmax, mut kmax) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let phi = random_unit_vector(sys, w, &mut rng)?;
        dmax = dmax.max(sys.apply_d(&phi).norm(w));
        kmax = kmax.max(sys.apply_k(&phi)?.norm(w));
    }
    let d_bound = consts.d_bound();
    let tails = truncation_bounds(sys, consts, 0.0);
    let k_bound = w * std::f64::consts::E + tails.kernel_tail;
    Ok(NormCertificate {
        samples,
        max_d_norm: dmax,
        d_bound,
        max_k_norm: kmax,
        k_bound,
        grid_k_bound: grid_kernel_norm(sys, w),
        d_ok: dmax <= d_bound * (1.0 + 1e-12),
        k_ok: kmax <= k_bound,
    })
}

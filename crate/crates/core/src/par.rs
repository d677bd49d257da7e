//! Data-parallel helpers.
//!
//! With the `parallel` feature the maps below run on the rayon pool; without
//! it, or after [`set_parallel(false)`](set_parallel), they run sequentially.
//! Every output slot is computed by exactly one closure call, so results do
//! not depend on the number of workers.

use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Enables or disables the rayon path at runtime (no-op without the feature).
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled, Ordering::Relaxed);
}

/// Whether maps will currently use rayon.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && PARALLEL.load(Ordering::Relaxed)
}

/// Collects `f(0), f(1), .., f(len - 1)`.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel_enabled() {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    (0..len).map(f).collect()
}

/// Applies `f(i, &mut out[i])` to every slot.
pub fn for_each_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel_enabled() {
            use rayon::prelude::*;
            out.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
            return;
        }
    }
    out.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Compensated (Neumaier) sum accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sums per-chunk partials in a fixed pairwise tree.
pub fn pairwise_sum(parts: &[f64]) -> f64 {
    match parts.len() {
        0 => 0.0,
        1 => parts[0],
        n => {
            let (a, b) = parts.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

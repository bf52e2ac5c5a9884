//! L1 Wasserstein distance between empirical distributions on the real line,
//! evaluated as the integral of the absolute difference of the two quantile
//! step functions. No coupling is ever formed.

use crate::error::{Error, Result};

/// A finite, nonempty multiset of reals, kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(samples: impl Into<Vec<f64>>) -> Result<Self> {
        let mut sorted = samples.into();
        if sorted.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if let Some(bad) = sorted.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sample {bad}")));
        }
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Left-continuous quantile function `F^{-1}(u)` for `u` in `(0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.sorted.len();
        let idx = ((u * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[idx - 1]
    }
}

pub fn wasserstein_1d(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    wasserstein_sorted(a.sorted(), b.sorted())
}

/// Distance between two ascending, nonempty sample slices.
///
/// The quantile functions are step functions with jumps at multiples of
/// `1/len`; the integral is summed exactly over the merged partition, using
/// integer breakpoints scaled by `len_a * len_b`.
pub fn wasserstein_sorted(a: &[f64], b: &[f64]) -> f64 {
    debug_assert!(!a.is_empty() && !b.is_empty());
    if a.len() == b.len() {
        let total: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
        return total / a.len() as f64;
    }
    let (na, nb) = (a.len() as u64, b.len() as u64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut cursor = 0u64;
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let next_a = (i as u64 + 1) * nb;
        let next_b = (j as u64 + 1) * na;
        let next = next_a.min(next_b);
        total += (a[i] - b[j]).abs() * (next - cursor) as f64;
        cursor = next;
        if next == next_a {
            i += 1;
        }
        if next == next_b {
            j += 1;
        }
    }
    total / (na * nb) as f64
}

/// Sorts two windows and returns their distance. Used by the rolling sweep.
pub(crate) fn wasserstein_windows(a: &[f64], b: &[f64], scratch: &mut (Vec<f64>, Vec<f64>)) -> f64 {
    scratch.0.clear();
    scratch.0.extend_from_slice(a);
    scratch.0.sort_by(f64::total_cmp);
    scratch.1.clear();
    scratch.1.extend_from_slice(b);
    scratch.1.sort_by(f64::total_cmp);
    wasserstein_sorted(&scratch.0, &scratch.1)
}

//! Thin wrappers over `libm` so the crate computes identically with and without `std`.

use alloc::vec::Vec;

/// Exponents of a monomial `x^α` in `D` variables.
pub type MultiIndex<const D: usize> = [u32; D];

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub(crate) fn powi(x: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc *= x;
    }
    acc
}

/// Binomial coefficient `n choose k` (0 when `k > n`).
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// All multi-indices with `|α| ≤ max_degree`, ordered by total degree and,
/// within one degree, lexicographically with the first exponent largest first.
pub fn graded_multi_indices<const D: usize>(max_degree: u32) -> Vec<MultiIndex<D>> {
    let mut out = Vec::new();
    for degree in 0..=max_degree {
        let mut current = [0u32; D];
        push_degree(&mut out, &mut current, 0, degree);
    }
    out
}

fn push_degree<const D: usize>(
    out: &mut Vec<MultiIndex<D>>,
    current: &mut MultiIndex<D>,
    axis: usize,
    remaining: u32,
) {
    if D == 0 {
        return;
    }
    if axis == D - 1 {
        current[axis] = remaining;
        out.push(*current);
        return;
    }
    for e in (0..=remaining).rev() {
        current[axis] = e;
        push_degree(out, current, axis + 1, remaining - e);
    }
}

pub(crate) fn degree<const D: usize>(alpha: &MultiIndex<D>) -> u32 {
    alpha.iter().sum()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if abs(self.sum) >= abs(x) {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// SplitMix64; used where a deterministic pseudo-random vector is needed.
#[derive(Debug, Clone)]
pub(crate) struct SplitMix64(u64);

impl SplitMix64 {
    pub(crate) fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub(crate) fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub(crate) fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

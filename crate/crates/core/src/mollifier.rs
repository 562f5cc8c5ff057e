//! Friedrichs' mollifier and the one-dimensional partition function built from it.
//!
//! The mollifier is `ζ(x) = K⁻¹ exp(-1/(1-4x²))` on `|x| < 1/2` and zero elsewhere,
//! with `K` chosen so that `∫ζ = 1`. Its `d`-dimensional version is the tensor
//! product of the one-dimensional factors.
//!
//! The reference partition function is `φ̂(x) = ∫_{(-1/2,1/2)} ζ(x - y) dy`. It has no
//! closed form; values are tabulated once and interpolated with cubic Hermite
//! splines, while derivatives of order `k ≥ 1` use the exact identity
//! `φ̂⁽ᵏ⁾(x) = ζ⁽ᵏ⁻¹⁾(x + 1/2) - ζ⁽ᵏ⁻¹⁾(x - 1/2)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, exp, floor, ln};
use crate::quadrature::integrate_adaptive;
use crate::{Error, Result};

/// Published value of the normalization constant `K = ∫ exp(-1/(1-4x²)) dx`.
pub const REFERENCE_K: f64 = 0.221_996_908_084_039_719;

pub const DEFAULT_MAX_DERIVATIVE: usize = 6;

/// Default number of table subintervals on `[-1, 1]`.
pub const DEFAULT_TABLE_RESOLUTION: usize = 4096;

/// Within this distance of `±1/2` the mollifier and all its derivatives are
/// returned as exactly zero (the exponential underflows long before).
const SUPPORT_GUARD: f64 = 1e-12;

const NORMALIZATION_TOLERANCE: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierConstant {
    pub k: f64,
    /// Error estimate reported by the adaptive quadrature.
    pub precision: f64,
}

/// Unnormalized bump `exp(-1/(1-4x²))`.
fn bump(x: f64) -> f64 {
    if abs(x) >= 0.5 - SUPPORT_GUARD {
        return 0.0;
    }
    let u = (1.0 - 2.0 * x) * (1.0 + 2.0 * x);
    exp(-1.0 / u)
}

/// Computes `K` by adaptive Gauss–Kronrod quadrature to `1e-15` absolute error.
pub fn compute_normalization() -> Result<MollifierConstant> {
    let (k, precision) = integrate_adaptive(bump, -0.5, 0.5, NORMALIZATION_TOLERANCE, 4000)?;
    Ok(MollifierConstant { k, precision })
}

/// Friedrichs' mollifier with precomputed derivative recurrences.
///
/// `ζ⁽ᵏ⁾(x) = p_k(x) / u^{2k} · ζ(x)` with `u = 1 - 4x²`, where
/// `p_0 = 1` and `p_{k+1} = u² p_k' + 16 k x u p_k - 8 x p_k`.
#[derive(Debug, Clone)]
pub struct Mollifier {
    constant: MollifierConstant,
    inv_k: f64,
    /// Monomial coefficients of `p_k`, lowest degree first.
    numerators: Vec<Vec<f64>>,
}

impl Mollifier {
    pub fn new() -> Result<Self> {
        Self::with_max_order(DEFAULT_MAX_DERIVATIVE)
    }

    pub fn with_max_order(max_order: usize) -> Result<Self> {
        let constant = compute_normalization()?;
        let mut numerators = vec![vec![1.0]];
        for k in 0..max_order {
            let next = next_numerator(&numerators[k], k);
            numerators.push(next);
        }
        Ok(Self {
            constant,
            inv_k: 1.0 / constant.k,
            numerators,
        })
    }

    pub fn constant(&self) -> MollifierConstant {
        self.constant
    }

    pub fn max_order(&self) -> usize {
        self.numerators.len() - 1
    }

    /// One-dimensional mollifier `ζ(x)`.
    #[inline]
    pub fn zeta_1d(&self, x: f64) -> f64 {
        bump(x) * self.inv_k
    }

    /// Tensor-product mollifier `ζ(x) = ∏ ζ(x_k)`.
    pub fn zeta<const D: usize>(&self, x: &[f64; D]) -> f64 {
        x.iter().map(|&xk| self.zeta_1d(xk)).product()
    }

    /// `ζ⁽ᵏ⁾(x)` for `k ≤ max_order()`.
    pub fn derivative(&self, x: f64, k: usize) -> Result<f64> {
        if k > self.max_order() {
            return Err(Error::DerivativeOrder {
                order: k,
                max: self.max_order(),
            });
        }
        Ok(self.derivative_unchecked(x, k))
    }

    #[inline]
    pub(crate) fn derivative_unchecked(&self, x: f64, k: usize) -> f64 {
        if abs(x) >= 0.5 - SUPPORT_GUARD {
            return 0.0;
        }
        let u = (1.0 - 2.0 * x) * (1.0 + 2.0 * x);
        if k == 0 {
            return exp(-1.0 / u) * self.inv_k;
        }
        let p = horner(&self.numerators[k], x);
        p * exp(-1.0 / u - 2.0 * k as f64 * ln(u)) * self.inv_k
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, x) in b.iter().enumerate() {
        out[i] += x;
    }
    out
}

fn poly_derivative(a: &[f64]) -> Vec<f64> {
    if a.len() <= 1 {
        return vec![0.0];
    }
    a.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect()
}

fn next_numerator(p: &[f64], k: usize) -> Vec<f64> {
    let u = [1.0, 0.0, -4.0];
    let u2 = poly_mul(&u, &u);
    let term1 = poly_mul(&u2, &poly_derivative(p));
    let term2 = poly_mul(&poly_mul(&[0.0, 16.0 * k as f64], &u), p);
    let term3 = poly_mul(&[0.0, -8.0], p);
    poly_add(&poly_add(&term1, &term2), &term3)
}

/// Tabulated reference partition function `φ̂` on `[-1, 1]` with a cubic Hermite
/// interpolant. Immutable after construction.
#[derive(Debug, Clone)]
pub struct PartitionFunction {
    mollifier: Mollifier,
    /// `(abscissa, value, first derivative)` at the uniform nodes of `[-1, 1]`.
    samples: Vec<(f64, f64, f64)>,
    /// Number of subintervals on `[-1, 1]`.
    resolution: usize,
    step: f64,
}

impl PartitionFunction {
    /// Default table: 4096 subintervals, derivatives up to order 6 of `ζ`.
    pub fn new() -> Result<Self> {
        Self::build(DEFAULT_TABLE_RESOLUTION, Mollifier::new()?)
    }

    /// Tabulates `φ̂` on `resolution` uniform subintervals of `[-1, 1]`.
    ///
    /// `resolution` must be a multiple of 4 and at least 64, so that `0` and
    /// `±1/2` are table nodes and the table is symmetric about `1/2`.
    pub fn build(resolution: usize, mollifier: Mollifier) -> Result<Self> {
        if resolution < 64 || resolution % 4 != 0 {
            return Err(Error::InvalidParameter(
                "table resolution must be a multiple of 4 and at least 64",
            ));
        }
        let half = resolution / 2;
        let step = 1.0 / half as f64;
        // Tail integrals T(s) = ∫_s^{1/2} ζ for s in [0, 1/2] at the nodes s = j·step.
        let quarter = half / 2;
        let mut tail = vec![0.0; quarter + 1];
        tail[0] = 0.5;
        for (j, t) in tail.iter_mut().enumerate().skip(1) {
            let s = j as f64 * step;
            let (v, _) = integrate_adaptive(|y| mollifier.zeta_1d(y), s, 0.5, 1e-17, 4000)?;
            *t = v;
        }
        // φ̂(x) on [0, 1]: x = 1/2 + s gives T(s); x = 1/2 - s gives 1 - T(s).
        let mut values = vec![0.0; half + 1];
        for j in 0..=quarter {
            values[quarter + j] = tail[j];
            values[quarter - j] = 1.0 - tail[j];
        }
        values[quarter] = 0.5;
        values[0] = 1.0;
        values[half] = 0.0;

        let mut samples = Vec::with_capacity(resolution + 1);
        for i in 0..=resolution {
            let x = -1.0 + i as f64 * step;
            let j = if i >= half { i - half } else { half - i };
            let v = values[j];
            let d = mollifier.zeta_1d(x + 0.5) - mollifier.zeta_1d(x - 0.5);
            samples.push((x, v, d));
        }
        Ok(Self {
            mollifier,
            samples,
            resolution,
            step,
        })
    }

    pub fn mollifier(&self) -> &Mollifier {
        &self.mollifier
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn samples(&self) -> &[(f64, f64, f64)] {
        &self.samples
    }

    /// Largest derivative order available through [`PartitionFunction::derivative`].
    pub fn max_derivative(&self) -> usize {
        self.mollifier.max_order() + 1
    }

    /// Interpolated `φ̂(x)`, clamped to `[0, 1]`; exactly symmetric and zero for `|x| ≥ 1`.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let y = abs(x);
        if y >= 1.0 {
            return 0.0;
        }
        let half = self.resolution / 2;
        let mut i = floor(y / self.step) as usize;
        if i >= half {
            i = half - 1;
        }
        let (x0, v0, d0) = self.samples[half + i];
        let (_, v1, d1) = self.samples[half + i + 1];
        let t = (y - x0) / self.step;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        (h00 * v0 + h10 * self.step * d0 + h01 * v1 + h11 * self.step * d1).clamp(0.0, 1.0)
    }

    /// `φ̂⁽ᵏ⁾(x)`: the table for `k = 0`, the exact closed form for `k ≥ 1`.
    pub fn derivative(&self, x: f64, k: usize) -> Result<f64> {
        if k == 0 {
            return Ok(self.value(x));
        }
        if k > self.max_derivative() {
            return Err(Error::DerivativeOrder {
                order: k,
                max: self.max_derivative(),
            });
        }
        Ok(self.derivative_unchecked(x, k))
    }

    #[inline]
    pub(crate) fn derivative_unchecked(&self, x: f64, k: usize) -> f64 {
        if k == 0 {
            return self.value(x);
        }
        if abs(x) >= 1.0 {
            return 0.0;
        }
        self.mollifier.derivative_unchecked(x + 0.5, k - 1)
            - self.mollifier.derivative_unchecked(x - 0.5, k - 1)
    }

    /// `φ̂(x)` by direct adaptive integration of the mollifier (no table).
    ///
    /// Slow; used where table interpolation error must not enter, e.g. the
    /// reference element integrals.
    pub fn value_exact(&self, x: f64) -> Result<f64> {
        let y = abs(x);
        if y >= 1.0 {
            return Ok(0.0);
        }
        // φ̂(y) = ∫_{y-1/2}^{1/2} ζ; integrate the shorter side for relative accuracy.
        let s = y - 0.5;
        if s >= 0.0 {
            let (v, _) = integrate_adaptive(|t| self.mollifier.zeta_1d(t), s, 0.5, 1e-17, 4000)?;
            Ok(v)
        } else {
            let (v, _) = integrate_adaptive(|t| self.mollifier.zeta_1d(t), -s, 0.5, 1e-17, 4000)?;
            Ok(1.0 - v)
        }
    }

    /// `φ_i(x) = ∏_k φ̂((x_k - i_k σ)/σ)` for a grid through the origin.
    pub fn pou_value<const D: usize>(&self, node: &[i64; D], sigma: f64, x: &[f64; D]) -> f64 {
        let mut acc = 1.0;
        for k in 0..D {
            acc *= self.value((x[k] - node[k] as f64 * sigma) / sigma);
            if acc == 0.0 {
                break;
            }
        }
        acc
    }
}

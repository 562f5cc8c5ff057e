//! Jacobi-preconditioned conjugate gradients and Lanczos estimates of the
//! spectrum of the diagonally scaled operator `D^{-1/2} A D^{-1/2}`.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, sqrt, SplitMix64};
use crate::sparse::LinearOperator;
use crate::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_ITERATIONS: usize = 2000;
pub const DEFAULT_LANCZOS_STEPS: usize = 600;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    /// `sqrt(rᵀD⁻¹r) / sqrt(bᵀD⁻¹b)` at exit.
    pub relative_residual: f64,
    /// Set when a search direction had non-positive curvature `pᵀAp ≤ 0`.
    pub breakdown: bool,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn positive_diagonal<A: LinearOperator + ?Sized>(op: &A) -> Result<Vec<f64>> {
    let diag = op.diagonal();
    if let Some((row, &value)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
        return Err(Error::NonPositiveDiagonal { row, value });
    }
    Ok(diag)
}

pub fn solve_pcg<A: LinearOperator + ?Sized>(op: &A, rhs: &[f64], tol: f64, max_iterations: usize) -> Result<SolveReport> {
    solve_pcg_monitored(op, rhs, tol, max_iterations, |_, _| {})
}

/// [`solve_pcg`] calling `monitor(iteration, x)` after every update.
pub fn solve_pcg_monitored<A, F>(op: &A, rhs: &[f64], tol: f64, max_iterations: usize, mut monitor: F) -> Result<SolveReport>
where
    A: LinearOperator + ?Sized,
    F: FnMut(usize, &[f64]),
{
    let n = op.dim();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rhs.len(),
        });
    }
    let diag = positive_diagonal(op)?;
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let norm_b = sqrt(rz);
    if norm_b == 0.0 {
        return Ok(SolveReport {
            coefficients: x,
            iterations: 0,
            relative_residual: 0.0,
            breakdown: false,
            converged: true,
        });
    }
    let mut relative = 1.0;
    for it in 1..=max_iterations {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Ok(SolveReport {
                coefficients: x,
                iterations: it - 1,
                relative_residual: relative,
                breakdown: true,
                converged: false,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] / diag[i];
        }
        monitor(it, &x);
        let rz_new = dot(&r, &z);
        relative = sqrt(rz_new.max(0.0)) / norm_b;
        if relative <= tol {
            return Ok(SolveReport {
                coefficients: x,
                iterations: it,
                relative_residual: relative,
                breakdown: false,
                converged: true,
            });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(SolveReport {
        coefficients: x,
        iterations: max_iterations,
        relative_residual: relative,
        breakdown: false,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumStatus {
    PositiveDefinite,
    /// A negative diagonal entry or a negative Ritz value.
    Indefinite,
    /// A zero diagonal entry, or a smallest Ritz value negligible against the largest.
    Singular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEstimate {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `λ_max / λ_min` when positive definite, `+∞` otherwise.
    pub condition: f64,
    pub status: SpectrumStatus,
    pub steps: usize,
    /// Both extreme Ritz pairs met the residual criterion.
    pub converged: bool,
    pub residual_min: f64,
    pub residual_max: f64,
}

/// Ratio below which the smallest Ritz value counts as zero.
const SINGULAR_RATIO: f64 = 1e-10;

pub fn estimate_condition<A: LinearOperator + ?Sized>(op: &A) -> ConditionEstimate {
    estimate_condition_with(op, DEFAULT_LANCZOS_STEPS, 1)
}

/// Lanczos with full reorthogonalization on the Jacobi-scaled operator.
/// Stops when the residual bounds of both extreme Ritz values are small or after
/// `max_steps` steps; the start vector comes from `seed`.
pub fn estimate_condition_with<A: LinearOperator + ?Sized>(op: &A, max_steps: usize, seed: u64) -> ConditionEstimate {
    let n = op.dim();
    let diag = op.diagonal();
    let flagged = |status, steps| ConditionEstimate {
        lambda_min: f64::NAN,
        lambda_max: f64::NAN,
        condition: f64::INFINITY,
        status,
        steps,
        converged: false,
        residual_min: f64::NAN,
        residual_max: f64::NAN,
    };
    if diag.iter().any(|&d| d < 0.0) {
        return flagged(SpectrumStatus::Indefinite, 0);
    }
    if n == 0 || diag.iter().any(|&d| d == 0.0) {
        return flagged(SpectrumStatus::Singular, 0);
    }
    let scale: Vec<f64> = diag.iter().map(|&d| 1.0 / sqrt(d)).collect();
    let apply_scaled = |v: &[f64], out: &mut [f64], tmp: &mut Vec<f64>| {
        tmp.clear();
        tmp.extend(v.iter().zip(&scale).map(|(a, s)| a * s));
        op.apply(tmp, out);
        out.iter_mut().zip(&scale).for_each(|(o, s)| *o *= s);
    };

    let mut rng = SplitMix64::new(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.next_f64() - 0.5).collect();
    let norm = sqrt(dot(&v, &v));
    v.iter_mut().for_each(|x| *x /= norm);

    let steps_cap = max_steps.min(n).max(1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps_cap);
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut tmp = Vec::with_capacity(n);
    let mut result = None;
    for j in 0..steps_cap {
        apply_scaled(&v, &mut w, &mut tmp);
        let alpha = dot(&w, &v);
        for i in 0..n {
            w[i] -= alpha * v[i];
        }
        if let (Some(prev), Some(&beta)) = (basis.last(), betas.last()) {
            let prev: &Vec<f64> = prev;
            for i in 0..n {
                w[i] -= beta * prev[i];
            }
        }
        basis.push(core::mem::take(&mut v));
        // Two passes of classical Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                for i in 0..n {
                    w[i] -= c * q[i];
                }
            }
        }
        alphas.push(alpha);
        let beta = sqrt(dot(&w, &w));
        let steps = j + 1;
        let exhausted = beta <= 1e-14 * alphas.iter().map(|a| abs(*a)).fold(0.0, f64::max).max(1e-300);
        let check = exhausted || steps == steps_cap || steps < 20 || steps % 5 == 0;
        if check {
            let (lo, hi) = extreme_ritz(&alphas, &betas, beta);
            let tol_max = 1e-8 * abs(hi.0);
            let tol_min = 1e-4 * abs(lo.0) + 1e-14 * abs(hi.0);
            let converged = exhausted || (hi.1 <= tol_max && lo.1 <= tol_min);
            if converged || steps == steps_cap {
                result = Some((lo, hi, steps, converged));
                break;
            }
        }
        if exhausted {
            break;
        }
        v = w.iter().map(|x| x / beta).collect();
        betas.push(beta);
    }
    let ((lambda_min, residual_min), (lambda_max, residual_max), steps, converged) =
        result.expect("Lanczos loop always records a result");
    let status = if lambda_min < 0.0 {
        SpectrumStatus::Indefinite
    } else if lambda_min <= SINGULAR_RATIO * lambda_max {
        SpectrumStatus::Singular
    } else {
        SpectrumStatus::PositiveDefinite
    };
    ConditionEstimate {
        lambda_min,
        lambda_max,
        condition: if status == SpectrumStatus::PositiveDefinite {
            lambda_max / lambda_min
        } else {
            f64::INFINITY
        },
        status,
        steps,
        converged,
        residual_min,
        residual_max,
    }
}

/// Smallest and largest eigenvalues of the tridiagonal matrix with diagonal
/// `alphas` and off-diagonal `betas`, each with the Lanczos residual bound
/// `|β_next · y_last|`.
fn extreme_ritz(alphas: &[f64], betas: &[f64], beta_next: f64) -> ((f64, f64), (f64, f64)) {
    let k = alphas.len();
    let lo = tridiagonal_eigenvalue(alphas, betas, 0);
    let hi = tridiagonal_eigenvalue(alphas, betas, k - 1);
    let r_lo = abs(beta_next * last_eigenvector_component(alphas, betas, lo));
    let r_hi = abs(beta_next * last_eigenvector_component(alphas, betas, hi));
    ((lo, r_lo), (hi, r_hi))
}

/// Number of eigenvalues strictly below `x` (Sturm sequence).
fn count_below(alphas: &[f64], betas: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..alphas.len() {
        let b2 = if i == 0 { 0.0 } else { betas[i - 1] * betas[i - 1] };
        d = alphas[i] - x - if i == 0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = -1e-300;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `index`-th smallest eigenvalue by bisection.
fn tridiagonal_eigenvalue(alphas: &[f64], betas: &[f64], index: usize) -> f64 {
    let k = alphas.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let r = if i > 0 { abs(betas[i - 1]) } else { 0.0 } + if i + 1 < k { abs(betas[i]) } else { 0.0 };
        lo = lo.min(alphas[i] - r);
        hi = hi.max(alphas[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(alphas, betas, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Last component of the unit eigenvector for `lambda`, by inverse iteration.
fn last_eigenvector_component(alphas: &[f64], betas: &[f64], lambda: f64) -> f64 {
    let k = alphas.len();
    if k == 1 {
        return 1.0;
    }
    let scale = alphas.iter().map(|a| abs(*a)).fold(0.0, f64::max).max(1e-300);
    let shift = lambda + 1e-13 * scale;
    let mut y = vec![1.0; k];
    for _ in 0..3 {
        y = solve_shifted_tridiagonal(alphas, betas, shift, &y);
        let norm = sqrt(dot(&y, &y));
        if !(norm > 0.0) || !norm.is_finite() {
            return 0.0;
        }
        y.iter_mut().for_each(|v| *v /= norm);
    }
    y[k - 1]
}

/// Solves `(T - shift I) y = rhs` by Gaussian elimination with partial pivoting.
fn solve_shifted_tridiagonal(alphas: &[f64], betas: &[f64], shift: f64, rhs: &[f64]) -> Vec<f64> {
    let k = alphas.len();
    // Row i holds columns i, i+1, i+2 after elimination (one fill-in diagonal).
    let mut d: Vec<f64> = alphas.iter().map(|a| a - shift).collect();
    let mut u1: Vec<f64> = (0..k).map(|i| if i + 1 < k { betas[i] } else { 0.0 }).collect();
    let mut u2 = vec![0.0; k];
    let mut l: Vec<f64> = (0..k).map(|i| if i + 1 < k { betas[i] } else { 0.0 }).collect();
    let mut b = rhs.to_vec();
    for i in 0..k.saturating_sub(1) {
        // Candidate pivot rows: i (d[i], u1[i], u2[i]) and i+1 (l[i], d[i+1], u1[i+1]).
        if abs(l[i]) > abs(d[i]) {
            let (a0, a1, a2) = (l[i], d[i + 1], u1[i + 1]);
            let (c0, c1, c2) = (d[i], u1[i], u2[i]);
            d[i] = a0;
            u1[i] = a1;
            u2[i] = a2;
            l[i] = c0;
            d[i + 1] = c1;
            u1[i + 1] = c2;
            b.swap(i, i + 1);
        }
        let piv = if d[i] == 0.0 { 1e-300 } else { d[i] };
        let m = l[i] / piv;
        d[i + 1] -= m * u1[i];
        u1[i + 1] -= m * u2[i];
        b[i + 1] -= m * b[i];
    }
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = b[i];
        if i + 1 < k {
            s -= u1[i] * y[i + 1];
        }
        if i + 2 < k {
            s -= u2[i] * y[i + 2];
        }
        let piv = if d[i] == 0.0 { 1e-300 } else { d[i] };
        y[i] = s / piv;
    }
    y
}

//! One-dimensional and simplex quadrature: Gauss–Legendre rules, adaptive
//! Gauss–Kronrod integration, and collapsed-coordinate rules on simplices.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, cos, CompensatedSum};
use crate::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if abs(dx) < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule with `order` nodes on each of `panels`
/// equal subintervals of `[a, b]`.
pub fn composite_gauss_legendre(order: usize, panels: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(order * panels);
    let mut weights = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let lo = a + width * p as f64;
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(lo + 0.5 * width * (x + 1.0));
            weights.push(0.5 * width * w);
        }
    }
    (nodes, weights)
}

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd-indexed Kronrod nodes.
const GAUSS7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * KRONROD_WEIGHTS[7];
    let mut gauss = fc * GAUSS7_WEIGHTS[3];
    let mut magnitude = abs(fc) * KRONROD_WEIGHTS[7];
    for j in 0..7 {
        let dx = half * KRONROD_NODES[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += KRONROD_WEIGHTS[j] * (f1 + f2);
        magnitude += KRONROD_WEIGHTS[j] * (abs(f1) + abs(f2));
        if j % 2 == 1 {
            gauss += GAUSS7_WEIGHTS[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let raw = abs((kronrod - gauss) * half);
    // Differences at the rounding level of the segment carry no information;
    // such a segment is converged.
    let floor = 50.0 * f64::EPSILON * magnitude * abs(half);
    Segment {
        a,
        b,
        value,
        error: if raw <= floor { 0.0 } else { raw },
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`
/// to an absolute error estimate of at most `abs_tol`.
///
/// Returns `(value, error_estimate)`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let mut segments = vec![gauss_kronrod_15(&f, a, b)];
    loop {
        let total_error: f64 = segments.iter().map(|s| s.error).sum();
        if total_error <= abs_tol {
            let mut sum = CompensatedSum::default();
            for s in &segments {
                sum.add(s.value);
            }
            return Ok((sum.value(), total_error));
        }
        if segments.len() >= max_segments {
            return Err(Error::QuadratureNonConvergence {
                estimate: total_error,
                tolerance: abs_tol,
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, s)| {
                if s.error > acc.1 {
                    (i, s.error)
                } else {
                    acc
                }
            });
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            return Err(Error::QuadratureNonConvergence {
                estimate: total_error,
                tolerance: abs_tol,
            });
        }
        segments.push(gauss_kronrod_15(&f, s.a, mid));
        segments.push(gauss_kronrod_15(&f, mid, s.b));
    }
}

/// Number of collapsed Gauss points per axis that integrate polynomials of
/// total degree `degree` exactly on a `d`-simplex.
pub fn simplex_points_per_axis(dim: usize, degree: usize) -> usize {
    (degree + dim).div_ceil(2).max(1)
}

/// Collapsed-coordinate (Duffy) Gauss rule on the reference simplex
/// `{x ≥ 0, Σ x_k ≤ 1}` with `n` Gauss–Legendre points per axis.
/// Weights are positive and sum to `1/D!`.
pub fn reference_simplex_rule<const D: usize>(n: usize) -> Result<(Vec<[f64; D]>, Vec<f64>)> {
    let (gx, gw) = gauss_legendre(n);
    let t: Vec<f64> = gx.iter().map(|x| 0.5 * (x + 1.0)).collect();
    let w: Vec<f64> = gw.iter().map(|w| 0.5 * w).collect();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match D {
        1 => {
            for i in 0..n {
                let mut p = [0.0; D];
                p[0] = t[i];
                points.push(p);
                weights.push(w[i]);
            }
        }
        2 => {
            for i in 0..n {
                for j in 0..n {
                    let (u, v) = (t[i], t[j]);
                    let mut p = [0.0; D];
                    p[0] = u;
                    p[1] = (1.0 - u) * v;
                    points.push(p);
                    weights.push(w[i] * w[j] * (1.0 - u));
                }
            }
        }
        3 => {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let (u, v, s) = (t[i], t[j], t[k]);
                        let mut p = [0.0; D];
                        p[0] = u;
                        p[1] = (1.0 - u) * v;
                        p[2] = (1.0 - u) * (1.0 - v) * s;
                        points.push(p);
                        weights.push(w[i] * w[j] * w[k] * (1.0 - u) * (1.0 - u) * (1.0 - v));
                    }
                }
            }
        }
        d => return Err(Error::UnsupportedDimension(d)),
    }
    Ok((points, weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-13, "n={n} p={p}: {approx} vs {exact}");
            }
        }
    }

    #[test]
    fn adaptive_integrates_smooth_and_peaked_functions() {
        let (v, _) = integrate_adaptive(|x: f64| x.sin(), 0.0, core::f64::consts::PI, 1e-14, 500).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
        let (v, _) = integrate_adaptive(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-10, 2000).unwrap();
        let exact = 2.0 * (1.0 / 1e-2) * (1.0f64 / 1e-2).atan();
        assert!((v - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn adaptive_reports_non_convergence() {
        let r = integrate_adaptive(|x: f64| 1.0 / x.abs().sqrt().max(1e-300), -1.0, 1.0, 1e-15, 10);
        assert!(matches!(r, Err(Error::QuadratureNonConvergence { .. })));
    }

    #[test]
    fn simplex_rules_reach_their_degree() {
        // ∫ x^a y^b z^c over the unit simplex = a! b! c! / (a+b+c+3)!
        let fact = |n: u32| (1..=n).fold(1.0, |a, k| a * k as f64);
        for degree in 0..=5usize {
            let n = simplex_points_per_axis(3, degree);
            let (p, w) = reference_simplex_rule::<3>(n).unwrap();
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let c = degree as u32 - a - b;
                    let approx: f64 = p
                        .iter()
                        .zip(&w)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
                        .sum();
                    let exact = fact(a) * fact(b) * fact(c) / fact(a + b + c + 3);
                    assert!((approx - exact).abs() < 1e-15, "deg {degree}: {approx} vs {exact}");
                }
            }
        }
        let n = simplex_points_per_axis(2, 4);
        let (p, w) = reference_simplex_rule::<2>(n).unwrap();
        let approx: f64 = p.iter().zip(&w).map(|(p, w)| w * p[0].powi(2) * p[1].powi(2)).sum();
        assert!((approx - 4.0 / 720.0).abs() < 1e-15);
    }
}

//! Library values checked against independently computed references.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use pufem_core::assembly::{assemble_mass, assemble_stabilization, precompute_reference_tables, system};
use pufem_core::grid::{classify_elements, BoxDomain, CartesianGrid, DomainGeometry, DEFAULT_MAX_CHAIN};
use pufem_core::mesh::QuadratureRule;
use pufem_core::mollifier::{compute_normalization, Mollifier, PartitionFunction, REFERENCE_K};
use pufem_core::quadrature::composite_gauss_legendre;
use pufem_core::solver::{estimate_condition_with, SpectrumStatus};
use pufem_core::space::PufemSpace;
use pufem_core::sparse::SymmetricSparseMatrix;
use pufem_core::{graded_multi_indices, MultiIndex};

/// Tanh-sinh quadrature on `[a, b]` with step `2^-level`. Abscissae are
/// measured from the nearer endpoint so integrands are never sampled at it.
fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, level: u32) -> f64 {
    let half = 0.5 * (b - a);
    let h = 0.5f64.powi(level as i32);
    let mut sum = 0.0;
    let mut k = 0i64;
    loop {
        let t = k as f64 * h;
        let s = FRAC_PI_2 * t.sinh();
        let cosh_s = s.cosh();
        // 1 - tanh(s), stable for large s
        let gap = 2.0 / ((2.0 * s).exp() + 1.0);
        let w = half * FRAC_PI_2 * t.cosh() / (cosh_s * cosh_s);
        if w < 1e-300 || gap * half == 0.0 {
            break;
        }
        let right = f(b - half * gap);
        sum += if k == 0 { w * right } else { w * (right + f(a + half * gap)) };
        k += 1;
    }
    sum * h
}

fn bump(x: f64) -> f64 {
    let w = 1.0 - 4.0 * x * x;
    if w <= 0.0 {
        0.0
    } else {
        (-1.0 / w).exp()
    }
}

struct Oracle {
    k: f64,
}

impl Oracle {
    fn new() -> Self {
        Self {
            k: tanh_sinh(bump, -0.5, 0.5, 7),
        }
    }

    fn zeta(&self, x: f64) -> f64 {
        bump(x) / self.k
    }

    /// `ζ'` and `ζ''` from `ζ' = g ζ`, `g = -8x/w²`.
    fn zeta_derivative(&self, x: f64, order: usize) -> f64 {
        let w = 1.0 - 4.0 * x * x;
        if w <= 0.0 {
            return 0.0;
        }
        let z = self.zeta(x);
        let g = -8.0 * x / (w * w);
        match order {
            0 => z,
            1 => g * z,
            2 => z * (g * g - 8.0 / (w * w) - 128.0 * x * x / (w * w * w)),
            _ => unreachable!(),
        }
    }

    fn phi(&self, x: f64) -> f64 {
        let y = x.abs();
        if y >= 1.0 {
            return 0.0;
        }
        tanh_sinh(|t| self.zeta(t), y - 0.5, 0.5, 7)
    }

    fn phi_derivative(&self, x: f64, order: usize) -> f64 {
        if order == 0 {
            return self.phi(x);
        }
        self.zeta_derivative(x + 0.5, order - 1) - self.zeta_derivative(x - 0.5, order - 1)
    }

    /// `d^g/dt^g [φ̂(u) u^a]` with `u = t - m`.
    fn shape(&self, t: f64, m: usize, a: usize, g: usize) -> f64 {
        let u = t - m as f64;
        let mut acc = 0.0;
        for j in 0..=g.min(a) {
            let binom = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]][g][j];
            let falling: f64 = (0..j).map(|i| (a - i) as f64).product();
            acc += binom * self.phi_derivative(u, g - j) * falling * u.powi((a - j) as i32);
        }
        acc
    }

    /// `∫₀¹ f^{(g)}_{m,a} f^{(g)}_{n,b}`.
    fn one_d(&self, g: usize, m: usize, a: usize, n: usize, b: usize, level: u32) -> f64 {
        tanh_sinh(|t| self.shape(t, m, a, g) * self.shape(t, n, b, g), 0.0, 1.0, level)
    }
}

fn partition() -> Arc<PartitionFunction> {
    Arc::new(PartitionFunction::new().unwrap())
}

#[test]
fn normalization_constant_matches_oracle_and_published_digits() {
    let oracle = Oracle::new();
    let k = compute_normalization().unwrap().k;
    assert!((oracle.k - tanh_sinh(bump, -0.5, 0.5, 8)).abs() < 1e-15);
    assert!((k - oracle.k).abs() < 1e-15, "{k} vs {}", oracle.k);
    assert!((k - REFERENCE_K).abs() < 1e-15, "{k}");
}

#[test]
fn partition_function_matches_oracle() {
    let oracle = Oracle::new();
    let pf = PartitionFunction::new().unwrap();
    for i in 0..=200 {
        let x = -1.0 + i as f64 * 0.01 + 1.3e-3;
        let reference = oracle.phi(x);
        assert!((pf.value(x) - reference).abs() < 1e-12, "table at {x}");
        assert!((pf.value_exact(x).unwrap() - reference).abs() < 1e-14, "exact at {x}");
        for k in 1..=3 {
            let d = pf.derivative(x, k).unwrap();
            let r = oracle.phi_derivative(x, k);
            assert!((d - r).abs() <= 1e-12 * (1.0 + r.abs()), "order {k} at {x}: {d} vs {r}");
        }
    }
}

#[test]
fn mollifier_derivatives_match_finite_differences() {
    let m = Mollifier::new().unwrap();
    let h = 1e-6;
    for i in 1..40 {
        let x = -0.49 + i as f64 * 0.0245;
        for k in 0..4 {
            let fd = (m.derivative(x + h, k).unwrap() - m.derivative(x - h, k).unwrap()) / (2.0 * h);
            let exact = m.derivative(x, k + 1).unwrap();
            let scale = exact.abs().max(1e-3);
            assert!((fd - exact).abs() <= 1e-6 * scale, "order {} at {x}: {fd} vs {exact}", k + 1);
        }
    }
}

fn check_tables<const D: usize>(degree: u32) {
    let oracle = Oracle::new();
    let pf = partition();
    let table = precompute_reference_tables::<D>(&pf, degree, 16).unwrap();
    let p = degree as usize + 1;
    let g_max = degree as usize + 1;
    // one_d[g][m][a][n][b]
    let mut one_d = vec![0.0; (g_max + 1) * 4 * p * p];
    let idx = |g: usize, m: usize, a: usize, n: usize, b: usize| (((g * 2 + m) * p + a) * 2 + n) * p + b;
    for g in 0..=g_max {
        for m in 0..2 {
            for a in 0..p {
                for n in 0..2 {
                    for b in 0..p {
                        let coarse = oracle.one_d(g, m, a, n, b, 6);
                        let fine = oracle.one_d(g, m, a, n, b, 7);
                        assert!((coarse - fine).abs() < 1e-14 * (1.0 + fine.abs()), "oracle not converged");
                        one_d[idx(g, m, a, n, b)] = fine;
                        let lib = table.one_dimensional(g, m, a, n, b);
                        assert!((lib - fine).abs() < 1e-12 * (1.0 + fine.abs()), "1d g={g} {m}{a}{n}{b}: {lib} vs {fine}");
                    }
                }
            }
        }
    }
    let monomials: Vec<MultiIndex<D>> = graded_multi_indices::<D>(degree);
    let betas: Vec<MultiIndex<D>> = graded_multi_indices::<D>(degree + 1)
        .into_iter()
        .filter(|b| b.iter().sum::<u32>() == degree + 1)
        .collect();
    let per = monomials.len();
    let local = per << D;
    assert_eq!(table.local_size(), local);
    let corner = |c: usize| -> [usize; D] { std::array::from_fn(|k| (c >> (D - 1 - k)) & 1) };
    for i in 0..local {
        let (oi, ai) = (corner(i / per), monomials[i % per]);
        for j in 0..local {
            let (oj, aj) = (corner(j / per), monomials[j % per]);
            let term = |g: &[usize; D]| -> f64 {
                (0..D)
                    .map(|k| one_d[idx(g[k], oi[k], ai[k] as usize, oj[k], aj[k] as usize)])
                    .product()
            };
            let mass = term(&[0; D]);
            let stab: f64 = betas
                .iter()
                .map(|b| term(&std::array::from_fn(|k| b[k] as usize)))
                .sum();
            assert!((table.mass(i, j) - mass).abs() < 1e-12, "mass {i},{j}");
            assert!((table.stab(i, j) - stab).abs() < 1e-12 * (1.0 + stab.abs()), "stab {i},{j}");
        }
    }
}

#[test]
fn reference_tables_match_oracle_2d_linear() {
    check_tables::<2>(1);
}

#[test]
fn reference_tables_match_oracle_3d_linear() {
    check_tables::<3>(1);
}

#[test]
fn reference_tables_match_oracle_2d_quadratic() {
    check_tables::<2>(2);
}

fn shifted_space<const D: usize>(sigma: f64, origin: [f64; D], degree: u32) -> PufemSpace<D> {
    let domain = BoxDomain::<D>::centered_unit_cube();
    let grid = CartesianGrid::new(sigma, origin).unwrap();
    let mut cls = classify_elements(&grid, &DomainGeometry::new(&domain), 4).unwrap();
    cls.verify_chain_condition(DEFAULT_MAX_CHAIN).unwrap();
    PufemSpace::new(cls, partition(), degree).unwrap()
}

#[test]
fn basis_derivatives_match_finite_differences() {
    let space = shifted_space::<2>(0.3, [0.07, -0.11], 2);
    let h = 1e-6;
    for x in [[0.013, -0.2], [0.31, 0.44], [-0.42, 0.05], [0.2, 0.2]] {
        let exact = space.eval_basis_derivatives(&x, 2).unwrap();
        for (bi, beta) in exact.betas.iter().enumerate() {
            let total: u32 = beta.iter().sum();
            if total == 0 {
                continue;
            }
            // Differentiate one order lower along the first axis where β is nonzero.
            let axis = beta.iter().position(|&e| e > 0).unwrap();
            let mut lower = *beta;
            lower[axis] -= 1;
            let mut plus = x;
            let mut minus = x;
            plus[axis] += h;
            minus[axis] -= h;
            let dp = space.eval_basis_derivatives(&plus, 1).unwrap();
            let dm = space.eval_basis_derivatives(&minus, 1).unwrap();
            assert_eq!(dp.dofs, exact.dofs);
            let li = dp.betas.iter().position(|b| *b == lower).unwrap();
            let scale = (0..exact.dofs.len())
                .map(|l| exact.get(l, bi).abs())
                .fold(0.0, f64::max);
            for l in 0..exact.dofs.len() {
                let fd = (dp.get(l, li) - dm.get(l, li)) / (2.0 * h);
                let e = exact.get(l, bi);
                assert!((fd - e).abs() <= 1e-6 * scale, "β={beta:?} dof {l} at {x:?}: {fd} vs {e}");
            }
        }
    }
}

fn product_rule(panels: usize, order: usize) -> QuadratureRule<2> {
    let (x, w) = composite_gauss_legendre(order, panels, -0.5, 0.5);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (xi, wi) in x.iter().zip(&w) {
        for (yj, wj) in x.iter().zip(&w) {
            nodes.push([*xi, *yj]);
            weights.push(wi * wj);
        }
    }
    QuadratureRule {
        nodes,
        weights,
        exactness_degree: (2 * order - 1) as u32,
    }
}

/// Extreme eigenvalues of `D^{-1/2} A D^{-1/2}`.
fn dense_scaled_extremes(dense: &[f64], n: usize) -> (f64, f64) {
    let diag: Vec<f64> = (0..n).map(|i| dense[i * n + i]).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| dense[i * n + j] / (diag[i] * diag[j]).sqrt());
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    (eig.min(), eig.max())
}

#[test]
fn condition_estimates_match_dense_eigenvalues() {
    let space = shifted_space::<2>(0.3, [0.043, -0.021], 1);
    let n = space.dofs().len();
    assert!(n <= 100, "{n} dofs");
    let pf = partition();
    let table = precompute_reference_tables::<2>(&pf, 1, 16).unwrap();
    let rule = product_rule(24, 8);
    let mass = assemble_mass(&space, &table, &rule).unwrap();
    let stab = assemble_stabilization(&space, &table).unwrap();
    for eps in [1e-3, 1e-2, 1e-1] {
        let bundle = system(mass.clone(), stab.clone(), eps, Vec::new()).unwrap();
        let m = mass.to_dense();
        let s = stab.to_dense();
        let dense: Vec<f64> = m.iter().zip(&s).map(|(a, b)| a + eps * b).collect();
        let (lo, hi) = dense_scaled_extremes(&dense, n);
        let est = estimate_condition_with(&bundle, 600, 7);
        assert_eq!(est.status, SpectrumStatus::PositiveDefinite, "ε={eps}");
        assert!((est.lambda_min / lo - 1.0).abs() < 0.01, "ε={eps}: {} vs {lo}", est.lambda_min);
        assert!((est.lambda_max / hi - 1.0).abs() < 0.01, "ε={eps}: {} vs {hi}", est.lambda_max);
        assert!((est.condition / (hi / lo) - 1.0).abs() < 0.01, "ε={eps}");
    }
}

#[test]
fn condition_estimates_match_dense_eigenvalues_on_random_spd() {
    // Deterministic linear congruential entries; B Bᵀ + δ I is SPD.
    let n = 50;
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    for shift in [1e-1, 1e-3] {
        let b: Vec<f64> = (0..n * n).map(|_| next()).collect();
        let mut triplets = Vec::new();
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let mut v: f64 = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum();
                if i == j {
                    v += shift;
                }
                dense[i * n + j] = v;
                dense[j * n + i] = v;
                triplets.push((i, j, v));
            }
        }
        let matrix = SymmetricSparseMatrix::from_triplets(n, triplets).unwrap();
        let (lo, hi) = dense_scaled_extremes(&dense, n);
        let est = estimate_condition_with(&matrix, 200, 3);
        assert!((est.lambda_min / lo - 1.0).abs() < 0.01, "{} vs {lo}", est.lambda_min);
        assert!((est.lambda_max / hi - 1.0).abs() < 0.01, "{} vs {hi}", est.lambda_max);
        assert!((est.condition / (hi / lo) - 1.0).abs() < 0.01);
    }
}

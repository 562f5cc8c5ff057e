//! Coefficient vectors interpreted as smooth fields: evaluation, error norms,
//! moments, and direct-summation Biot–Savart velocities.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::grid::{BoxDomain, Domain};
use crate::math::{abs, ceil, cos, powi, sin, sqrt, MultiIndex};
use crate::quadrature::gauss_legendre;
use crate::mesh::{ParticleField, QuadratureRule};
use crate::par::{chunk_ranges, map_indices};
use crate::polynomial::Polynomial;
use crate::space::{BasisValues, PufemSpace};
use crate::sparse::SymmetricSparseMatrix;
use crate::{Error, Result};

/// Default Biot–Savart exclusion radius, as a multiple of `σ`.
pub const DEFAULT_EXCLUSION_FACTOR: f64 = 1e-3;

const ERROR_CHUNKS: usize = 8;

#[derive(Debug, Clone)]
pub struct SmoothedField<'a, const D: usize> {
    space: &'a PufemSpace<D>,
    coefficients: Vec<Vec<f64>>,
}

impl<'a, const D: usize> SmoothedField<'a, D> {
    /// One coefficient vector per component.
    pub fn new(space: &'a PufemSpace<D>, coefficients: Vec<Vec<f64>>) -> Result<Self> {
        let n = space.dofs().len();
        if coefficients.is_empty() {
            return Err(Error::InvalidParameter("a field needs at least one component"));
        }
        if let Some(c) = coefficients.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.len(),
            });
        }
        Ok(Self { space, coefficients })
    }

    pub fn space(&self) -> &PufemSpace<D> {
        self.space
    }

    pub fn components(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn evaluate(&self, x: &[f64; D]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.components()];
        self.evaluate_into(x, &mut BasisValues::default(), &mut out)?;
        Ok(out)
    }

    pub fn evaluate_into(&self, x: &[f64; D], basis: &mut BasisValues, out: &mut [f64]) -> Result<()> {
        self.space.eval_basis_into(x, basis)?;
        for (o, c) in out.iter_mut().zip(&self.coefficients) {
            *o = basis.dofs.iter().zip(&basis.values).map(|(d, v)| c[*d] * v).sum();
        }
        Ok(())
    }

    /// Gradient of every component.
    pub fn gradient(&self, x: &[f64; D]) -> Result<Vec<[f64; D]>> {
        let d = self.space.eval_basis_derivatives(x, 1)?;
        // Graded order puts the first-order derivatives at positions 1..=D.
        Ok(self
            .coefficients
            .iter()
            .map(|c| {
                core::array::from_fn(|k| (0..d.dofs.len()).map(|i| c[d.dofs[i]] * d.get(i, k + 1)).sum())
            })
            .collect())
    }

    /// `sqrt(Σ_q w_q |u_σ(x_q) - u(x_q)|²)` summed over components; `reference`
    /// writes the exact components at a point.
    pub fn l2_error<F>(&self, reference: F, rule: &QuadratureRule<D>) -> Result<f64>
    where
        F: Fn(&[f64; D], &mut [f64]) + Sync,
    {
        let comps = self.components();
        let sum = chunked_sum(rule.len(), |range| {
            let mut basis = BasisValues::default();
            let mut u = vec![0.0; comps];
            let mut exact = vec![0.0; comps];
            let mut acc = 0.0;
            for q in range {
                self.evaluate_into(&rule.nodes[q], &mut basis, &mut u)?;
                reference(&rule.nodes[q], &mut exact);
                acc += rule.weights[q] * u.iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
            Ok(acc)
        })?;
        Ok(sqrt(sum))
    }

    /// `sqrt(Σ_q w_q |∇u_σ(x_q) - ∇u(x_q)|²)`; `reference` writes one gradient per component.
    pub fn h1_seminorm_error<F>(&self, reference: F, rule: &QuadratureRule<D>) -> Result<f64>
    where
        F: Fn(&[f64; D], &mut [[f64; D]]) + Sync,
    {
        let comps = self.components();
        let sum = chunked_sum(rule.len(), |range| {
            let mut exact = vec![[0.0; D]; comps];
            let mut acc = 0.0;
            for q in range {
                let g = self.gradient(&rule.nodes[q])?;
                reference(&rule.nodes[q], &mut exact);
                let mut local = 0.0;
                for (a, b) in g.iter().zip(&exact) {
                    for k in 0..D {
                        local += (a[k] - b[k]) * (a[k] - b[k]);
                    }
                }
                acc += rule.weights[q] * local;
            }
            Ok(acc)
        })?;
        Ok(sqrt(sum))
    }

    /// Largest deviation `|∫ (u_σ - u) χ_j|` over a fixed family of smooth test
    /// functions `χ_j(x) = ∏_k cos(π m_k (x_k + 1/2))`, `m ∈ {0,1,2}^D`.
    /// A computable stand-in for a negative-norm error.
    pub fn weak_error_proxy<F>(&self, reference: F, rule: &QuadratureRule<D>) -> Result<f64>
    where
        F: Fn(&[f64; D], &mut [f64]) + Sync,
    {
        let comps = self.components();
        let family = 3usize.pow(D as u32);
        let mut worst: f64 = 0.0;
        let mut u = vec![0.0; comps];
        let mut exact = vec![0.0; comps];
        let mut basis = BasisValues::default();
        let mut sums = vec![0.0; family * comps];
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            self.evaluate_into(x, &mut basis, &mut u)?;
            reference(x, &mut exact);
            for j in 0..family {
                let mut rest = j;
                let mut chi = 1.0;
                for xk in x.iter() {
                    chi *= cos(PI * (rest % 3) as f64 * (xk + 0.5));
                    rest /= 3;
                }
                for c in 0..comps {
                    sums[j * comps + c] += w * (u[c] - exact[c]) * chi;
                }
            }
        }
        for s in sums {
            worst = worst.max(abs(s));
        }
        Ok(worst)
    }

    /// `a_h(u_σ, x^α)` per component, with `a_h` the assembled mass form. This is
    /// the moment for which the projection preserves particle moments exactly.
    pub fn discrete_moment(&self, mass: &SymmetricSparseMatrix, alpha: &MultiIndex<D>) -> Vec<f64> {
        let p = self.space.polynomial_coefficients(&Polynomial::monomial(*alpha));
        self.coefficients.iter().map(|c| mass.bilinear(&p, c)).collect()
    }

    /// `Σ_q w_q u_σ(x_q) x_q^α` per component.
    pub fn quadrature_moment(&self, alpha: &MultiIndex<D>, rule: &QuadratureRule<D>) -> Result<Vec<f64>> {
        let comps = self.components();
        let mut out = vec![0.0; comps];
        let mut u = vec![0.0; comps];
        let mut basis = BasisValues::default();
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            self.evaluate_into(x, &mut basis, &mut u)?;
            let mono = monomial(x, alpha);
            for (o, v) in out.iter_mut().zip(&u) {
                *o += w * v * mono;
            }
        }
        Ok(out)
    }
}

fn monomial<const D: usize>(x: &[f64; D], alpha: &MultiIndex<D>) -> f64 {
    (0..D).map(|k| powi(x[k], alpha[k])).product()
}

/// `Σ_i Γ_i x_i^α` per component.
pub fn particle_moment<const D: usize>(particles: &ParticleField<D>, alpha: &MultiIndex<D>) -> Vec<f64> {
    let mut out = vec![0.0; particles.components];
    for (i, x) in particles.positions.iter().enumerate() {
        let mono = monomial(x, alpha);
        for (o, g) in out.iter_mut().zip(particles.circulation(i)) {
            *o += g * mono;
        }
    }
    out
}

fn chunked_sum<F>(n: usize, f: F) -> Result<f64>
where
    F: Fn(core::ops::Range<usize>) -> Result<f64> + Sync + Send,
{
    let ranges = chunk_ranges(n, ERROR_CHUNKS);
    let parts = map_indices(ranges.len(), |c| f(ranges[c].clone()));
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total)
}

/// Velocities at evaluation points and the number of kernel terms skipped
/// because source and target were closer than the exclusion radius.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySamples<const D: usize> {
    pub velocity: Vec<[f64; D]>,
    pub skipped: usize,
}

/// Sources for a direct Biot–Savart sum: quadrature nodes, weights and
/// vorticity values (1 component in 2D, 3 in 3D, flattened).
#[derive(Debug, Clone, Copy)]
pub struct VorticitySources<'a, const D: usize> {
    pub points: &'a [[f64; D]],
    pub weights: &'a [f64],
    pub vorticity: &'a [f64],
}

fn vorticity_components(d: usize) -> usize {
    if d == 2 {
        1
    } else {
        3
    }
}

/// `u(x) = Σ_q w_q K(x - y_q) ω(y_q)` with the free-space kernel
/// `K(x) = (-x₂, x₁)/(2π|x|²)` in 2D and `u(x) = -(1/4π) Σ_q w_q (x - y_q)/|x - y_q|³ × ω(y_q)`
/// in 3D. Terms with `|x - y_q| < eta` are skipped.
pub fn biot_savart_sum<const D: usize>(
    eval_points: &[[f64; D]],
    sources: &VorticitySources<'_, D>,
    eta: f64,
) -> Result<VelocitySamples<D>> {
    check_sources(sources)?;
    let per_point = map_indices(eval_points.len(), |i| {
        let x = &eval_points[i];
        let mut u = [0.0; D];
        let mut skipped = 0usize;
        for (q, y) in sources.points.iter().enumerate() {
            let r: [f64; D] = core::array::from_fn(|k| x[k] - y[k]);
            let r2: f64 = r.iter().map(|v| v * v).sum();
            if r2 < eta * eta {
                skipped += 1;
                continue;
            }
            let w = sources.weights[q];
            if D == 2 {
                let s = w * sources.vorticity[q] / (2.0 * PI * r2);
                u[0] -= s * r[1];
                u[1] += s * r[0];
            } else {
                let om = &sources.vorticity[3 * q..3 * q + 3];
                let s = -w / (4.0 * PI * r2 * sqrt(r2));
                u[0] += s * (r[1] * om[2] - r[2] * om[1]);
                u[1] += s * (r[2] * om[0] - r[0] * om[2]);
                u[2] += s * (r[0] * om[1] - r[1] * om[0]);
            }
        }
        (u, skipped)
    });
    Ok(collect_samples(per_point))
}

fn check_sources<const D: usize>(sources: &VorticitySources<'_, D>) -> Result<()> {
    if D != 2 && D != 3 {
        return Err(Error::UnsupportedDimension(D));
    }
    let n = sources.points.len();
    if sources.weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: sources.weights.len(),
        });
    }
    let comps = vorticity_components(D);
    if sources.vorticity.len() != n * comps {
        return Err(Error::DimensionMismatch {
            expected: n * comps,
            found: sources.vorticity.len(),
        });
    }
    Ok(())
}

fn collect_samples<const D: usize>(per_point: Vec<([f64; D], usize)>) -> VelocitySamples<D> {
    let skipped = per_point.iter().map(|p| p.1).sum();
    VelocitySamples {
        velocity: per_point.into_iter().map(|p| p.0).collect(),
        skipped,
    }
}

/// Angular and radial resolution of [`polar_box_rule`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarResolution {
    /// Gauss–Legendre nodes in `cos θ`.
    pub polar: usize,
    /// Equispaced nodes in the azimuth.
    pub azimuthal: usize,
    /// Upper bound on the length of one radial Gauss panel.
    pub panel_length: f64,
    pub panel_order: usize,
}

/// Rule for `∫_box f(y) dy` in spherical coordinates around `x ∈ box`: nodes
/// `y = x + ρ θ` along rays to the box boundary with weights `ρ² w_ρ w_θ`.
/// Integrands with a `|x - y|^{-2}` singularity at `x` are integrated as
/// smooth functions, which makes this the rule of choice for the velocity of
/// a smooth vorticity field at `x`.
pub fn polar_box_rule(x: &[f64; 3], domain: &BoxDomain<3>, res: &PolarResolution) -> Result<QuadratureRule<3>> {
    if res.polar == 0 || res.azimuthal == 0 || res.panel_order == 0 || !(res.panel_length > 0.0) {
        return Err(Error::InvalidParameter("polar rule resolution must be positive"));
    }
    if !domain.contains_closed(x) {
        return Err(Error::InvalidParameter("polar rule center must lie in the box"));
    }
    let (ct, wt) = gauss_legendre(res.polar);
    let (gr, wr) = gauss_legendre(res.panel_order);
    let dphi = 2.0 * PI / res.azimuthal as f64;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (&t, &w_t) in ct.iter().zip(&wt) {
        let st = sqrt((1.0 - t * t).max(0.0));
        for j in 0..res.azimuthal {
            let phi = dphi * (j as f64 + 0.5);
            let dir = [st * cos(phi), st * sin(phi), t];
            let mut reach = f64::INFINITY;
            for k in 0..3 {
                if dir[k] > 0.0 {
                    reach = reach.min((domain.hi[k] - x[k]) / dir[k]);
                } else if dir[k] < 0.0 {
                    reach = reach.min((domain.lo[k] - x[k]) / dir[k]);
                }
            }
            if !(reach > 0.0) {
                continue;
            }
            let panels = ceil(reach / res.panel_length).max(1.0) as usize;
            let len = reach / panels as f64;
            for p in 0..panels {
                for (&g, &w_g) in gr.iter().zip(&wr) {
                    let rho = len * (p as f64 + 0.5 * (g + 1.0));
                    nodes.push(core::array::from_fn(|k| x[k] + rho * dir[k]));
                    weights.push(rho * rho * 0.5 * len * w_g * w_t * dphi);
                }
            }
        }
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        exactness_degree: 0,
    })
}

/// Direct Biot–Savart velocity of a smoothed vorticity field sampled at the
/// nodes of `rule` (1 component in 2D, 3 in 3D).
pub fn biot_savart_direct<const D: usize>(
    field: &SmoothedField<'_, D>,
    eval_points: &[[f64; D]],
    rule: &QuadratureRule<D>,
    eta: f64,
) -> Result<VelocitySamples<D>> {
    let comps = vorticity_components(D);
    if field.components() != comps {
        return Err(Error::DimensionMismatch {
            expected: comps,
            found: field.components(),
        });
    }
    let vorticity = sample_field(field, &rule.nodes)?;
    biot_savart_sum(
        eval_points,
        &VorticitySources {
            points: &rule.nodes,
            weights: &rule.weights,
            vorticity: &vorticity,
        },
        eta,
    )
}

/// Field values at `points`, flattened component-fastest.
pub fn sample_field<const D: usize>(field: &SmoothedField<'_, D>, points: &[[f64; D]]) -> Result<Vec<f64>> {
    let comps = field.components();
    let ranges = chunk_ranges(points.len(), ERROR_CHUNKS);
    let parts = map_indices(ranges.len(), |c| -> Result<Vec<f64>> {
        let mut out = vec![0.0; ranges[c].len() * comps];
        let mut basis = BasisValues::default();
        for (slot, i) in ranges[c].clone().enumerate() {
            field.evaluate_into(&points[i], &mut basis, &mut out[slot * comps..(slot + 1) * comps])?;
        }
        Ok(out)
    });
    let mut all = Vec::with_capacity(points.len() * comps);
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

//! Assembly of the stabilized projection system.
//!
//! The mass form pairs basis functions whose supports avoid cut elements
//! exactly, through reference-element integrals scaled by `σ^D`; every other
//! pair is integrated with the particle quadrature rule. The stabilization form
//! sums order-`P+1` derivative products over cut elements.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{corner_offset, ElementClass};
use crate::math::{abs, binomial, graded_multi_indices, powi, MultiIndex};
use crate::mesh::{ParticleField, QuadratureRule};
use crate::mollifier::PartitionFunction;
use crate::par::{chunk_ranges, map_indices};
use crate::quadrature::composite_gauss_legendre;
use crate::space::{BasisValues, PufemSpace};
use crate::sparse::{LinearOperator, SymmetricSparseMatrix};
use crate::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-3;
/// Gauss–Legendre points per panel for the first reference-integral pass.
pub const DEFAULT_REFERENCE_ORDER: usize = 16;
const REFERENCE_PANELS: usize = 8;
const MAX_REFERENCE_ORDER: usize = 256;
const REFERENCE_TOLERANCE: f64 = 1e-12;
/// Work is split into this many ordered chunks whatever the thread count, so
/// sums are reproducible.
const ASSEMBLY_CHUNKS: usize = 8;

/// Integrals over the reference element `(0,1)^D` of products of basis
/// functions attached to its corners, in local order (corner-major, then monomial).
#[derive(Debug, Clone)]
pub struct ReferenceIntegralTable<const D: usize> {
    degree: u32,
    quad_order: usize,
    local_size: usize,
    /// One-dimensional integrals `∫₀¹ f^{(g)}_{m,a} f^{(g)}_{n,b}`, layout `[g][m][a][n][b]`.
    one_d: Vec<f64>,
    mass: Vec<f64>,
    stab: Vec<f64>,
}

impl<const D: usize> ReferenceIntegralTable<D> {
    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Gauss order per panel of the accepted (finer) pass.
    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    /// `2^D · binomial(P + D, D)`.
    pub fn local_size(&self) -> usize {
        self.local_size
    }

    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.local_size + j]
    }

    pub fn stab(&self, i: usize, j: usize) -> f64 {
        self.stab[i * self.local_size + j]
    }

    /// `∫₀¹ f^{(g)}_{m,a} f^{(g)}_{n,b}` with `f_{m,a}(t) = φ̂(t - m)(t - m)^a`.
    pub fn one_dimensional(&self, g: usize, m: usize, a: usize, n: usize, b: usize) -> f64 {
        let p = self.degree as usize + 1;
        self.one_d[(((g * 2 + m) * p + a) * 2 + n) * p + b]
    }
}

/// Composite Gauss–Legendre values of the one-dimensional integrals, using the
/// exact `φ̂` rather than its table.
fn one_d_integrals(pf: &PartitionFunction, degree: usize, order: usize) -> Result<Vec<f64>> {
    let g_max = degree + 1;
    let p = degree + 1;
    let (nodes, weights) = composite_gauss_legendre(order, REFERENCE_PANELS, 0.0, 1.0);
    // f[q][g][m][a]
    let per_node = (g_max + 1) * 2 * p;
    let mut f = vec![0.0; nodes.len() * per_node];
    for (q, &t) in nodes.iter().enumerate() {
        for m in 0..2 {
            let u = t - m as f64;
            let mut phi = vec![0.0; g_max + 1];
            phi[0] = pf.value_exact(u)?;
            for (g, slot) in phi.iter_mut().enumerate().skip(1) {
                *slot = pf.derivative_unchecked(u, g);
            }
            for g in 0..=g_max {
                for a in 0..p {
                    let mut acc = 0.0;
                    let mut falling = 1.0;
                    for j in 0..=g.min(a) {
                        if j > 0 {
                            falling *= (a + 1 - j) as f64;
                        }
                        acc += binomial(g, j) as f64 * phi[g - j] * falling * powi(u, (a - j) as u32);
                    }
                    f[q * per_node + (g * 2 + m) * p + a] = acc;
                }
            }
        }
    }
    let mut out = vec![0.0; (g_max + 1) * 4 * p * p];
    for g in 0..=g_max {
        for m in 0..2 {
            for a in 0..p {
                for n in 0..2 {
                    for b in 0..p {
                        let mut acc = 0.0;
                        for (q, w) in weights.iter().enumerate() {
                            acc += w * f[q * per_node + (g * 2 + m) * p + a] * f[q * per_node + (g * 2 + n) * p + b];
                        }
                        out[(((g * 2 + m) * p + a) * 2 + n) * p + b] = acc;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Tensor-product Gauss–Legendre integration of the reference mass and
/// stabilization entries. The Gauss order doubles from `quad_order` until no
/// one-dimensional factor changes by more than `1e-12` relative to `max(1, |value|)`.
pub fn precompute_reference_tables<const D: usize>(
    pf: &PartitionFunction,
    degree: u32,
    quad_order: usize,
) -> Result<ReferenceIntegralTable<D>> {
    if quad_order < 8 {
        return Err(Error::InvalidParameter("reference quadrature order must be at least 8"));
    }
    if degree as usize + 1 > pf.max_derivative() {
        return Err(Error::DerivativeOrder {
            order: degree as usize + 1,
            max: pf.max_derivative(),
        });
    }
    let p = degree as usize;
    let mut order = quad_order;
    let mut coarse = one_d_integrals(pf, p, order)?;
    let one_d = loop {
        let fine = one_d_integrals(pf, p, 2 * order)?;
        let change = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| abs(a - b) / abs(*b).max(1.0))
            .fold(0.0, f64::max);
        order *= 2;
        if change <= REFERENCE_TOLERANCE {
            break fine;
        }
        if order >= MAX_REFERENCE_ORDER {
            return Err(Error::ReferenceTableNonConvergence {
                max_change: change,
                order,
            });
        }
        coarse = fine;
    };

    let monomials = graded_multi_indices::<D>(degree);
    let stab_orders: Vec<MultiIndex<D>> = graded_multi_indices::<D>(degree + 1)
        .into_iter()
        .filter(|g| g.iter().sum::<u32>() == degree + 1)
        .collect();
    let per = monomials.len();
    let local_size = per << D;
    let pp = p + 1;
    let idx = |g: usize, m: usize, a: usize, n: usize, b: usize| (((g * 2 + m) * pp + a) * 2 + n) * pp + b;
    let mut mass = vec![0.0; local_size * local_size];
    let mut stab = vec![0.0; local_size * local_size];
    for ci in 0..(1usize << D) {
        let mi = corner_offset::<D>(ci);
        for (ai, alpha) in monomials.iter().enumerate() {
            for cj in 0..(1usize << D) {
                let mj = corner_offset::<D>(cj);
                for (bj, beta) in monomials.iter().enumerate() {
                    let factor = |g: &[u32; D]| -> f64 {
                        (0..D)
                            .map(|k| {
                                one_d[idx(
                                    g[k] as usize,
                                    mi[k] as usize,
                                    alpha[k] as usize,
                                    mj[k] as usize,
                                    beta[k] as usize,
                                )]
                            })
                            .product()
                    };
                    let i = ci * per + ai;
                    let j = cj * per + bj;
                    mass[i * local_size + j] = factor(&[0; D]);
                    stab[i * local_size + j] = stab_orders.iter().map(factor).sum();
                }
            }
        }
    }
    Ok(ReferenceIntegralTable {
        degree,
        quad_order: order,
        local_size,
        one_d,
        mass,
        stab,
    })
}

/// Dense `per × per` blocks for each node and each neighbor offset in the
/// upper half of `{-1,0,1}^D`.
struct NodeBlockAccumulator {
    per: usize,
    slots: usize,
    values: Vec<f64>,
    touched: Vec<bool>,
}

/// Neighbor structure shared by all accumulators of one space.
struct BlockPattern {
    slots: usize,
    /// `neighbor[a * slots + s]`: node position of `a + offset(s)`, or `u32::MAX`.
    neighbor: Vec<u32>,
}

fn upper_offsets<const D: usize>() -> Vec<[i64; D]> {
    let total = 3usize.pow(D as u32);
    let mut out = Vec::new();
    for n in 0..total {
        let mut o = [0i64; D];
        let mut rest = n;
        for k in (0..D).rev() {
            o[k] = (rest % 3) as i64 - 1;
            rest /= 3;
        }
        let first = o.iter().find(|&&v| v != 0);
        if first.is_none_or(|&v| v > 0) {
            out.push(o);
        }
    }
    out
}

fn slot_of<const D: usize>(offset: &[i64; D]) -> usize {
    // Position of `offset` within `upper_offsets`: its base-3 rank minus the
    // number of lower-half offsets, which is exactly (3^D - 1) / 2.
    let mut rank = 0usize;
    for k in 0..D {
        rank = rank * 3 + (offset[k] + 1) as usize;
    }
    rank - (3usize.pow(D as u32) - 1) / 2
}

impl BlockPattern {
    fn new<const D: usize>(space: &PufemSpace<D>) -> Self {
        let offsets = upper_offsets::<D>();
        let dofs = space.dofs();
        let mut neighbor = Vec::with_capacity(dofs.num_nodes() * offsets.len());
        for node in dofs.nodes() {
            for o in &offsets {
                let nb: [i64; D] = core::array::from_fn(|k| node[k] + o[k]);
                neighbor.push(dofs.node_position(&nb).map_or(u32::MAX, |p| p as u32));
            }
        }
        Self {
            slots: offsets.len(),
            neighbor,
        }
    }
}

impl NodeBlockAccumulator {
    fn new(nodes: usize, per: usize, slots: usize) -> Self {
        Self {
            per,
            slots,
            values: vec![0.0; nodes * slots * per * per],
            touched: vec![false; nodes * slots],
        }
    }

    /// Adds `s · local[i][j]` for `i` in the block of corner `ci` and `j` in the
    /// block of corner `cj`, where node `a` (corner `ci`) precedes node `b`.
    #[inline]
    fn add_block(&mut self, a: usize, slot: usize, s: f64, local: &[f64], ld: usize, ci: usize, cj: usize) {
        let per = self.per;
        let base = (a * self.slots + slot) * per * per;
        self.touched[a * self.slots + slot] = true;
        for i in 0..per {
            let row = &local[(ci * per + i) * ld + cj * per..(ci * per + i) * ld + cj * per + per];
            let dst = &mut self.values[base + i * per..base + i * per + per];
            for (d, v) in dst.iter_mut().zip(row) {
                *d += s * v;
            }
        }
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        for (a, b) in self.touched.iter_mut().zip(&other.touched) {
            *a |= b;
        }
    }

    fn into_matrix(self, pattern: &BlockPattern) -> SymmetricSparseMatrix {
        let per = self.per;
        let nodes = self.touched.len() / self.slots;
        let n = nodes * per;
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        for a in 0..nodes {
            for i in 0..per {
                for s in 0..self.slots {
                    if !self.touched[a * self.slots + s] {
                        continue;
                    }
                    let b = pattern.neighbor[a * self.slots + s] as usize;
                    let base = (a * self.slots + s) * per * per + i * per;
                    // Slot 0 is the diagonal block; keep its upper triangle only.
                    let start = if s == 0 { i } else { 0 };
                    for j in start..per {
                        cols.push(b * per + j);
                        values.push(self.values[base + j]);
                    }
                }
                row_ptr.push(cols.len());
            }
        }
        SymmetricSparseMatrix::from_csr_unchecked(n, row_ptr, cols, values)
    }
}

/// Corner node positions of an element and whether each has cut support.
fn corner_info<const D: usize>(space: &PufemSpace<D>, element: usize, node_cut: &[bool]) -> (Vec<usize>, Vec<bool>) {
    let cls = space.classification();
    let idx = cls.element_index(element);
    let positions: Vec<usize> = cls
        .incident_nodes(&idx)
        .iter()
        .map(|n| space.dofs().node_position(n).expect("active corner"))
        .collect();
    let cut = positions.iter().map(|&p| node_cut[p]).collect();
    (positions, cut)
}

/// A node has cut support unless all `2^D` elements of its patch are interior,
/// i.e. unless its support lies inside the closed domain.
pub fn nodes_with_cut_support<const D: usize>(space: &PufemSpace<D>) -> Vec<bool> {
    let cls = space.classification();
    space
        .dofs()
        .nodes()
        .iter()
        .map(|node| {
            let patch = cls.incident_elements(node);
            patch.len() < (1 << D) || patch.iter().any(|&e| cls.class(e) != ElementClass::Interior)
        })
        .collect()
}

fn corner_slot<const D: usize>(ci: usize, cj: usize) -> usize {
    let (a, b) = (corner_offset::<D>(ci), corner_offset::<D>(cj));
    let o: [i64; D] = core::array::from_fn(|k| b[k] - a[k]);
    slot_of::<D>(&o)
}

fn run_chunks<const D: usize, F>(space: &PufemSpace<D>, pattern: &BlockPattern, items: usize, work: F) -> SymmetricSparseMatrix
where
    F: Fn(&mut NodeBlockAccumulator, usize) + Sync + Send,
{
    let per = space.dofs().per_node();
    let nodes = space.dofs().num_nodes();
    let ranges = chunk_ranges(items, ASSEMBLY_CHUNKS);
    let partial = map_indices(ranges.len(), |c| {
        let mut acc = NodeBlockAccumulator::new(nodes, per, pattern.slots);
        for item in ranges[c].clone() {
            work(&mut acc, item);
        }
        acc
    });
    let mut iter = partial.into_iter();
    let mut total = iter
        .next()
        .unwrap_or_else(|| NodeBlockAccumulator::new(nodes, per, pattern.slots));
    for acc in iter {
        total.merge(&acc);
    }
    total.into_matrix(pattern)
}

/// The approximate mass form `a_h`.
pub fn assemble_mass<const D: usize>(
    space: &PufemSpace<D>,
    table: &ReferenceIntegralTable<D>,
    rule: &QuadratureRule<D>,
) -> Result<SymmetricSparseMatrix> {
    check_table(space, table)?;
    let cls = space.classification();
    let node_cut = nodes_with_cut_support(space);
    let pattern = BlockPattern::new(space);
    let corners = 1usize << D;
    let scale = powi(space.sigma(), D as u32);
    let interior = cls.interior_elements();
    let ld = table.local_size();

    // Evaluate the basis at every rule node once, then locate failures up front.
    let located: Vec<Result<BasisValues>> = map_indices(rule.len(), |q| space.eval_basis(&rule.nodes[q]));
    let mut values = Vec::with_capacity(located.len());
    for v in located {
        values.push(v?);
    }
    let n_interior = interior.len();
    let matrix = run_chunks(space, &pattern, n_interior + rule.len(), |acc, item| {
        if item < n_interior {
            let (pos, cut) = corner_info(space, interior[item], &node_cut);
            for ci in 0..corners {
                for cj in ci..corners {
                    if !cut[ci] && !cut[cj] {
                        acc.add_block(pos[ci], corner_slot::<D>(ci, cj), scale, &table.mass, ld, ci, cj);
                    }
                }
            }
        } else {
            let q = item - n_interior;
            let b = &values[q];
            let w = rule.weights[q];
            let (pos, cut) = corner_info(space, b.element, &node_cut);
            let local = outer(&b.values);
            for ci in 0..corners {
                for cj in ci..corners {
                    if cut[ci] || cut[cj] {
                        acc.add_block(pos[ci], corner_slot::<D>(ci, cj), w, &local, ld, ci, cj);
                    }
                }
            }
        }
    });
    Ok(matrix)
}

fn outer(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = v[i] * v[j];
        }
    }
    out
}

fn check_table<const D: usize>(space: &PufemSpace<D>, table: &ReferenceIntegralTable<D>) -> Result<()> {
    if table.degree() != space.degree() {
        return Err(Error::DimensionMismatch {
            expected: space.degree() as usize,
            found: table.degree() as usize,
        });
    }
    Ok(())
}

/// The stabilization form `j`: `σ^D` times the reference entries on each cut element.
pub fn assemble_stabilization<const D: usize>(
    space: &PufemSpace<D>,
    table: &ReferenceIntegralTable<D>,
) -> Result<SymmetricSparseMatrix> {
    check_table(space, table)?;
    let cut = space.classification().cut_elements();
    let pattern = BlockPattern::new(space);
    let corners = 1usize << D;
    let scale = powi(space.sigma(), D as u32);
    let ld = table.local_size();
    let no_cut = vec![false; space.dofs().num_nodes()];
    Ok(run_chunks(space, &pattern, cut.len(), |acc, item| {
        let (pos, _) = corner_info(space, cut[item], &no_cut);
        for ci in 0..corners {
            for cj in ci..corners {
                acc.add_block(pos[ci], corner_slot::<D>(ci, cj), scale, &table.stab, ld, ci, cj);
            }
        }
    }))
}

/// `b_k = Σ_i Γ_i ψ_k(x_i)`, one vector per particle component.
pub fn assemble_rhs<const D: usize>(space: &PufemSpace<D>, particles: &ParticleField<D>) -> Result<Vec<Vec<f64>>> {
    let n = space.dofs().len();
    let comps = particles.components;
    let ranges = chunk_ranges(particles.len(), ASSEMBLY_CHUNKS);
    let partial: Vec<Result<Vec<f64>>> = map_indices(ranges.len(), |c| {
        let mut out = vec![0.0; n * comps];
        let mut b = BasisValues::default();
        for i in ranges[c].clone() {
            space.eval_basis_into(&particles.positions[i], &mut b)?;
            let gamma = particles.circulation(i);
            for (d, v) in b.dofs.iter().zip(&b.values) {
                for (comp, g) in gamma.iter().enumerate() {
                    out[comp * n + d] += g * v;
                }
            }
        }
        Ok(out)
    });
    let mut total = vec![0.0; n * comps];
    for part in partial {
        for (t, v) in total.iter_mut().zip(part?) {
            *t += v;
        }
    }
    Ok(total.chunks(n.max(1)).take(comps).map(|c| c.to_vec()).collect())
}

/// Mass and stabilization parts with the right-hand sides; applies
/// `mass + ε stab` without forming it.
#[derive(Debug, Clone)]
pub struct SystemBundle {
    pub mass: SymmetricSparseMatrix,
    pub stab: SymmetricSparseMatrix,
    pub epsilon: f64,
    pub rhs: Vec<Vec<f64>>,
    diag: Vec<f64>,
}

pub fn system(
    mass: SymmetricSparseMatrix,
    stab: SymmetricSparseMatrix,
    epsilon: f64,
    rhs: Vec<Vec<f64>>,
) -> Result<SystemBundle> {
    let n = mass.dim();
    if stab.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: stab.dim(),
        });
    }
    if let Some(b) = rhs.iter().find(|b| b.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter("stabilization parameter must be non-negative"));
    }
    let diag = mass
        .diag()
        .iter()
        .zip(stab.diag())
        .map(|(m, s)| m + epsilon * s)
        .collect();
    Ok(SystemBundle {
        mass,
        stab,
        epsilon,
        rhs,
        diag,
    })
}

impl SystemBundle {
    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    /// The same parts with another stabilization parameter.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        system(self.mass.clone(), self.stab.clone(), epsilon, self.rhs.clone())
    }
}

impl LinearOperator for SystemBundle {
    fn dim(&self) -> usize {
        self.mass.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mass.matvec(x, y);
        if self.epsilon != 0.0 {
            self.stab.matvec_add(self.epsilon, x, y);
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.diag.clone()
    }
}

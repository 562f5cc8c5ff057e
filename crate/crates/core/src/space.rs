//! The partition-of-unity space on the active grid: degree-of-freedom numbering
//! and basis evaluation.
//!
//! Each active node `j` carries the functions `ψ_{j,α}(x) = φ_j(x) t^α` with
//! `t = (x - x_j)/σ` and `|α| ≤ P`. Both factors are tensor products, so every
//! derivative reduces to one-dimensional Leibniz sums.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{corner_offset, GridClassification, NodeIndex};
use crate::math::{binomial, degree, factorial, graded_multi_indices, powi, MultiIndex};
use crate::mollifier::PartitionFunction;
use crate::polynomial::Polynomial;
use crate::{Error, Result};

const NO_NODE: u32 = u32::MAX;

/// Numbering of `(node, monomial)` pairs: nodes in lexicographic order, then
/// monomials in graded order.
#[derive(Debug, Clone)]
pub struct DofMap<const D: usize> {
    nodes: Vec<NodeIndex<D>>,
    monomials: Vec<MultiIndex<D>>,
    lower: [i64; D],
    shape: [usize; D],
    lookup: Vec<u32>,
}

pub fn enumerate_dofs<const D: usize>(cls: &GridClassification<D>, degree: u32) -> Result<DofMap<D>> {
    if cls.active_elements().is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let lower = cls.lower();
    let shape: [usize; D] = core::array::from_fn(|k| cls.shape()[k] + 1);
    let total: usize = shape.iter().product();
    let mut marked = vec![false; total];
    let node_linear = |node: &NodeIndex<D>| -> usize {
        let mut lin = 0;
        for k in 0..D {
            lin = lin * shape[k] + (node[k] - lower[k]) as usize;
        }
        lin
    };
    for &e in cls.active_elements() {
        for node in cls.incident_nodes(&cls.element_index(e)) {
            marked[node_linear(&node)] = true;
        }
    }
    // Linear order over the node block is lexicographic in the node index.
    let mut lookup = vec![NO_NODE; total];
    let mut nodes = Vec::new();
    for (lin, _) in marked.iter().enumerate().filter(|(_, &m)| m) {
        lookup[lin] = nodes.len() as u32;
        let mut idx = [0i64; D];
        let mut rest = lin;
        for k in (0..D).rev() {
            idx[k] = lower[k] + (rest % shape[k]) as i64;
            rest /= shape[k];
        }
        nodes.push(idx);
    }
    Ok(DofMap {
        nodes,
        monomials: graded_multi_indices::<D>(degree),
        lower,
        shape,
        lookup,
    })
}

impl<const D: usize> DofMap<D> {
    /// Total number of degrees of freedom.
    pub fn len(&self) -> usize {
        self.nodes.len() * self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn per_node(&self) -> usize {
        self.monomials.len()
    }

    pub fn nodes(&self) -> &[NodeIndex<D>] {
        &self.nodes
    }

    pub fn monomials(&self) -> &[MultiIndex<D>] {
        &self.monomials
    }

    /// Position of `node` in the node list, if active.
    pub fn node_position(&self, node: &NodeIndex<D>) -> Option<usize> {
        let mut lin = 0usize;
        for k in 0..D {
            let off = node[k] - self.lower[k];
            if off < 0 || off >= self.shape[k] as i64 {
                return None;
            }
            lin = lin * self.shape[k] + off as usize;
        }
        match self.lookup[lin] {
            NO_NODE => None,
            p => Some(p as usize),
        }
    }

    pub fn dof(&self, node_position: usize, monomial: usize) -> usize {
        node_position * self.monomials.len() + monomial
    }

    /// `(node, α)` of a degree of freedom.
    pub fn entry(&self, dof: usize) -> (NodeIndex<D>, MultiIndex<D>) {
        let p = self.monomials.len();
        (self.nodes[dof / p], self.monomials[dof % p])
    }
}

/// Per-axis factors `f^{(g)}_{m,a}(s)` of a basis function restricted to one
/// element, for corner offset `m ∈ {0,1}`, derivative order `g ≤ order`,
/// and monomial exponent `a ≤ degree`, evaluated at the local coordinate
/// `s ∈ [0,1]`. Layout: `[m][g][a]`.
pub(crate) fn axis_factors(
    pf: &PartitionFunction,
    s: f64,
    order: usize,
    degree: usize,
    out: &mut Vec<f64>,
) {
    let stride_g = degree + 1;
    let stride_m = (order + 1) * stride_g;
    out.clear();
    out.resize(2 * stride_m, 0.0);
    for m in 0..2 {
        let t = s - m as f64;
        let mut phi = [0.0; 16];
        for (g, slot) in phi.iter_mut().enumerate().take(order + 1) {
            *slot = pf.derivative_unchecked(t, g);
        }
        for g in 0..=order {
            for a in 0..=degree {
                let mut acc = 0.0;
                for j in 0..=g.min(a) {
                    // d^j/dt^j t^a = a!/(a-j)! t^{a-j}
                    let falling = factorial(a as u32) / factorial((a - j) as u32);
                    acc += binomial(g, j) as f64 * phi[g - j] * falling * powi(t, (a - j) as u32);
                }
                out[m * stride_m + g * stride_g + a] = acc;
            }
        }
    }
}

/// Nonzero basis values at one point.
#[derive(Debug, Clone, Default)]
pub struct BasisValues {
    /// Linear index of the element containing the point.
    pub element: usize,
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
}

/// Nonzero basis derivatives at one point: `values[i * betas.len() + b]` is
/// `∂^{betas[b]} ψ_{dofs[i]}`.
#[derive(Debug, Clone)]
pub struct BasisDerivatives<const D: usize> {
    pub element: usize,
    pub dofs: Vec<usize>,
    pub betas: Vec<MultiIndex<D>>,
    pub values: Vec<f64>,
}

impl<const D: usize> BasisDerivatives<D> {
    pub fn get(&self, local: usize, beta: usize) -> f64 {
        self.values[local * self.betas.len() + beta]
    }
}

#[derive(Debug, Clone)]
pub struct PufemSpace<const D: usize> {
    cls: GridClassification<D>,
    pf: Arc<PartitionFunction>,
    degree: u32,
    dofs: DofMap<D>,
}

impl<const D: usize> PufemSpace<D> {
    pub fn new(cls: GridClassification<D>, pf: Arc<PartitionFunction>, degree: u32) -> Result<Self> {
        if degree as usize + 1 > pf.max_derivative() {
            return Err(Error::DerivativeOrder {
                order: degree as usize + 1,
                max: pf.max_derivative(),
            });
        }
        let dofs = enumerate_dofs(&cls, degree)?;
        Ok(Self { cls, pf, degree, dofs })
    }

    pub fn classification(&self) -> &GridClassification<D> {
        &self.cls
    }

    pub fn partition_function(&self) -> &PartitionFunction {
        &self.pf
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn dofs(&self) -> &DofMap<D> {
        &self.dofs
    }

    pub fn sigma(&self) -> f64 {
        self.cls.grid().sigma()
    }

    /// Degrees of freedom of an active element, corner-major then monomial.
    pub fn element_dofs(&self, element: usize) -> Vec<usize> {
        let idx = self.cls.element_index(element);
        let per = self.dofs.per_node();
        let mut out = Vec::with_capacity(per << D);
        for node in self.cls.incident_nodes(&idx) {
            let p = self
                .dofs
                .node_position(&node)
                .expect("corner of an active element is an active node");
            out.extend((0..per).map(|a| self.dofs.dof(p, a)));
        }
        out
    }

    fn local_coordinates(&self, x: &[f64; D]) -> Result<(usize, [f64; D])> {
        let e = self.cls.locate(x).ok_or(Error::OutsideActiveSet)?;
        let (lo, _) = self.cls.grid().element_bounds(&self.cls.element_index(e));
        let sigma = self.sigma();
        Ok((e, core::array::from_fn(|k| (x[k] - lo[k]) / sigma)))
    }

    pub fn eval_basis(&self, x: &[f64; D]) -> Result<BasisValues> {
        let mut out = BasisValues::default();
        self.eval_basis_into(x, &mut out)?;
        Ok(out)
    }

    /// Buffer-reusing form of [`PufemSpace::eval_basis`].
    pub fn eval_basis_into(&self, x: &[f64; D], out: &mut BasisValues) -> Result<()> {
        let (e, s) = self.local_coordinates(x)?;
        let p = self.degree as usize;
        let mut phi = [[0.0; 2]; D];
        let mut pows = [[[0.0; 8]; 2]; D];
        for k in 0..D {
            for m in 0..2 {
                let t = s[k] - m as f64;
                phi[k][m] = self.pf.value(t);
                let mut acc = 1.0;
                for a in 0..=p {
                    pows[k][m][a] = acc;
                    acc *= t;
                }
            }
        }
        out.element = e;
        out.dofs = self.element_dofs(e);
        out.values.clear();
        for c in 0..(1usize << D) {
            let m = corner_offset::<D>(c);
            let weight: f64 = (0..D).map(|k| phi[k][m[k] as usize]).product();
            for alpha in self.dofs.monomials() {
                let mono: f64 = (0..D).map(|k| pows[k][m[k] as usize][alpha[k] as usize]).product();
                out.values.push(weight * mono);
            }
        }
        Ok(())
    }

    /// All derivatives `∂^β ψ` with `|β| ≤ order` of the basis functions nonzero at `x`.
    pub fn eval_basis_derivatives(&self, x: &[f64; D], order: usize) -> Result<BasisDerivatives<D>> {
        if order > self.pf.max_derivative() {
            return Err(Error::DerivativeOrder {
                order,
                max: self.pf.max_derivative(),
            });
        }
        let (e, s) = self.local_coordinates(x)?;
        let p = self.degree as usize;
        let betas = graded_multi_indices::<D>(order as u32);
        let stride_g = p + 1;
        let stride_m = (order + 1) * stride_g;
        let mut factors: [Vec<f64>; D] = core::array::from_fn(|_| Vec::new());
        for k in 0..D {
            axis_factors(&self.pf, s[k], order, p, &mut factors[k]);
        }
        let sigma = self.sigma();
        let mut values = Vec::with_capacity((self.dofs.per_node() << D) * betas.len());
        for c in 0..(1usize << D) {
            let m = corner_offset::<D>(c);
            for alpha in self.dofs.monomials() {
                for beta in &betas {
                    let mut v = 1.0;
                    for k in 0..D {
                        v *= factors[k][m[k] as usize * stride_m + beta[k] as usize * stride_g + alpha[k] as usize];
                    }
                    values.push(v / powi(sigma, degree(beta)));
                }
            }
        }
        Ok(BasisDerivatives {
            element: e,
            dofs: self.element_dofs(e),
            betas,
            values,
        })
    }

    /// Coefficients representing `p` exactly when `deg p ≤ P`:
    /// `c_{j,α} = σ^{|α|} ∂^α p(x_j) / α!`.
    pub fn polynomial_coefficients(&self, p: &Polynomial<D>) -> Vec<f64> {
        let sigma = self.sigma();
        let grid = self.cls.grid();
        let derivs: Vec<Polynomial<D>> = self.dofs.monomials().iter().map(|a| p.derivative(a)).collect();
        let mut out = vec![0.0; self.dofs.len()];
        for (j, node) in self.dofs.nodes().iter().enumerate() {
            let xj = grid.node(node);
            for (a, alpha) in self.dofs.monomials().iter().enumerate() {
                let fact: f64 = alpha.iter().map(|&e| factorial(e)).product();
                out[self.dofs.dof(j, a)] = powi(sigma, degree(alpha)) * derivs[a].evaluate(&xj) / fact;
            }
        }
        out
    }
}

//! Small multivariate polynomials, used to build exactly representable fields.

use alloc::vec::Vec;

use crate::math::{degree, powi, MultiIndex};

/// `Σ c_j x^{α_j}` in `D` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<const D: usize> {
    terms: Vec<(f64, MultiIndex<D>)>,
}

impl<const D: usize> Polynomial<D> {
    pub fn new(terms: Vec<(f64, MultiIndex<D>)>) -> Self {
        Self { terms }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(alloc::vec![(c, [0; D])])
    }

    pub fn monomial(alpha: MultiIndex<D>) -> Self {
        Self::new(alloc::vec![(1.0, alpha)])
    }

    pub fn terms(&self) -> &[(f64, MultiIndex<D>)] {
        &self.terms
    }

    /// Total degree (0 for the zero polynomial).
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, a)| degree(a)).max().unwrap_or(0)
    }

    pub fn evaluate(&self, x: &[f64; D]) -> f64 {
        self.terms
            .iter()
            .map(|(c, a)| c * (0..D).map(|k| powi(x[k], a[k])).product::<f64>())
            .sum()
    }

    /// `∂^β p`.
    pub fn derivative(&self, beta: &MultiIndex<D>) -> Self {
        let mut terms = Vec::new();
        for (c, a) in &self.terms {
            let mut coeff = *c;
            let mut exps = *a;
            for k in 0..D {
                if beta[k] > exps[k] {
                    coeff = 0.0;
                    break;
                }
                for j in 0..beta[k] {
                    coeff *= (exps[k] - j) as f64;
                }
                exps[k] -= beta[k];
            }
            if coeff != 0.0 {
                terms.push((coeff, exps));
            }
        }
        Self { terms }
    }
}

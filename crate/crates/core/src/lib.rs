//! Smooth partition-of-unity finite element (PUFEM) spaces on Cartesian grids.
//!
//! The crate turns particle fields (weighted Dirac deltas) into globally
//! `C^∞` fields by a stabilized fictitious-domain L² projection, and provides
//! the pieces needed to study that regularization numerically:
//!
//! * [`mollifier`]: Friedrichs' mollifier, its derivatives and the tabulated
//!   one-dimensional partition function.
//! * [`grid`]: Cartesian grid bookkeeping and cut/interior element classification.
//! * [`mesh`]: simplicial meshes, uniform refinement, quadrature rules and particle fields.
//! * [`space`]: DOF enumeration and basis evaluation for the PUFEM space.
//! * [`assembly`]: reference integrals, mass matrix, ghost-penalty type stabilization and
//!   particle right-hand sides.
//! * [`solver`]: Jacobi-preconditioned CG and Lanczos condition estimates.
//! * [`fields`]: smoothed fields, error norms, moments and Biot–Savart summation.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is disabled.
//! The `parallel` feature distributes the heavy loops with rayon; results do not
//! depend on the thread count.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod assembly;
mod error;
pub mod fields;
pub mod grid;
pub(crate) mod math;
pub mod mesh;
pub mod mollifier;
pub(crate) mod par;
pub mod polynomial;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;

pub use error::{Error, Result};
pub use math::{binomial, graded_multi_indices, MultiIndex};

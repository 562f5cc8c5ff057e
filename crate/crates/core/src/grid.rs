//! Cartesian grids, domains, and fictitious-domain element classification.
//!
//! Node `i ∈ ℤ^D` sits at `origin + σ i`; element `i` is the cube
//! `[node(i), node(i) + σ]`. The patch of node `i` is the open `2σ`-cube centered
//! at it. Elements that meet the domain in positive measure are *active*;
//! active elements fully inside the (closed) domain are *interior*, the others
//! *cut*.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, floor};
use crate::mesh::SimplicialMesh;
use crate::{Error, Result};

pub type NodeIndex<const D: usize> = [i64; D];

/// Default number of sample points per axis used by [`classify_elements`].
pub const DEFAULT_SAMPLES_PER_AXIS: usize = 4;
/// Default bound on the number of steps from a cut to an interior element.
pub const DEFAULT_MAX_CHAIN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianGrid<const D: usize> {
    sigma: f64,
    origin: [f64; D],
}

impl<const D: usize> CartesianGrid<D> {
    pub fn new(sigma: f64, origin: [f64; D]) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter("grid spacing must be positive and finite"));
        }
        if D != 2 && D != 3 {
            return Err(Error::UnsupportedDimension(D));
        }
        Ok(Self { sigma, origin })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn origin(&self) -> [f64; D] {
        self.origin
    }

    pub fn node(&self, i: &NodeIndex<D>) -> [f64; D] {
        core::array::from_fn(|k| self.origin[k] + self.sigma * i[k] as f64)
    }

    /// Element whose half-open cell `[node, node + σ)` contains `x`.
    pub fn element_of(&self, x: &[f64; D]) -> NodeIndex<D> {
        core::array::from_fn(|k| floor((x[k] - self.origin[k]) / self.sigma) as i64)
    }

    /// Lower and upper corners of element `i`.
    pub fn element_bounds(&self, i: &NodeIndex<D>) -> ([f64; D], [f64; D]) {
        let lo = self.node(i);
        let hi = core::array::from_fn(|k| lo[k] + self.sigma);
        (lo, hi)
    }
}

/// Offset of corner `c ∈ 0..2^D`; axis 0 is the most significant bit, so
/// corners come out in lexicographic order.
#[inline]
pub fn corner_offset<const D: usize>(c: usize) -> [i64; D] {
    core::array::from_fn(|k| ((c >> (D - 1 - k)) & 1) as i64)
}

/// An open domain `Ω ⊂ ℝ^D`.
pub trait Domain<const D: usize>: Sync {
    /// Membership in the open set.
    fn contains(&self, x: &[f64; D]) -> bool;
    /// Membership in the closure.
    fn contains_closed(&self, x: &[f64; D]) -> bool;
    fn bounding_box(&self) -> ([f64; D], [f64; D]);
    /// Exact answer to "does the box meet `Ω` in positive measure", when cheap.
    fn overlaps_box(&self, _lo: &[f64; D], _hi: &[f64; D]) -> Option<bool> {
        None
    }
    fn measure(&self) -> Option<f64> {
        None
    }
}

/// Axis-aligned open box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain<const D: usize> {
    pub lo: [f64; D],
    pub hi: [f64; D],
}

impl<const D: usize> BoxDomain<D> {
    pub fn new(lo: [f64; D], hi: [f64; D]) -> Result<Self> {
        if (0..D).any(|k| !(hi[k] > lo[k])) {
            return Err(Error::InvalidParameter("box must have positive extent on every axis"));
        }
        Ok(Self { lo, hi })
    }

    /// The cube `(-1/2, 1/2)^D`.
    pub fn centered_unit_cube() -> Self {
        Self {
            lo: [-0.5; D],
            hi: [0.5; D],
        }
    }

    pub fn translated(&self, shift: &[f64; D]) -> Self {
        Self {
            lo: core::array::from_fn(|k| self.lo[k] + shift[k]),
            hi: core::array::from_fn(|k| self.hi[k] + shift[k]),
        }
    }

    fn tolerance(&self, k: usize) -> f64 {
        1e-12 * (self.hi[k] - self.lo[k])
    }
}

impl<const D: usize> Domain<D> for BoxDomain<D> {
    fn contains(&self, x: &[f64; D]) -> bool {
        (0..D).all(|k| x[k] > self.lo[k] && x[k] < self.hi[k])
    }

    fn contains_closed(&self, x: &[f64; D]) -> bool {
        (0..D).all(|k| {
            let tol = self.tolerance(k);
            x[k] >= self.lo[k] - tol && x[k] <= self.hi[k] + tol
        })
    }

    fn bounding_box(&self) -> ([f64; D], [f64; D]) {
        (self.lo, self.hi)
    }

    fn overlaps_box(&self, lo: &[f64; D], hi: &[f64; D]) -> Option<bool> {
        Some((0..D).all(|k| {
            let overlap = hi[k].min(self.hi[k]) - lo[k].max(self.lo[k]);
            overlap > self.tolerance(k)
        }))
    }

    fn measure(&self) -> Option<f64> {
        Some((0..D).map(|k| self.hi[k] - self.lo[k]).product())
    }
}

/// Open Euclidean ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallDomain<const D: usize> {
    pub center: [f64; D],
    pub radius: f64,
}

impl<const D: usize> BallDomain<D> {
    fn dist2(&self, x: &[f64; D]) -> f64 {
        (0..D).map(|k| (x[k] - self.center[k]) * (x[k] - self.center[k])).sum()
    }
}

impl<const D: usize> Domain<D> for BallDomain<D> {
    fn contains(&self, x: &[f64; D]) -> bool {
        self.dist2(x) < self.radius * self.radius
    }

    fn contains_closed(&self, x: &[f64; D]) -> bool {
        self.dist2(x) <= self.radius * self.radius * (1.0 + 1e-12)
    }

    fn bounding_box(&self) -> ([f64; D], [f64; D]) {
        (
            core::array::from_fn(|k| self.center[k] - self.radius),
            core::array::from_fn(|k| self.center[k] + self.radius),
        )
    }
}

/// A domain together with points (typically quadrature nodes of a mesh of the
/// domain) whose elements must be active.
pub struct DomainGeometry<'a, const D: usize> {
    pub domain: &'a dyn Domain<D>,
    pub anchors: Vec<[f64; D]>,
}

impl<'a, const D: usize> DomainGeometry<'a, D> {
    pub fn new(domain: &'a dyn Domain<D>) -> Self {
        Self {
            domain,
            anchors: Vec::new(),
        }
    }

    pub fn with_anchors(domain: &'a dyn Domain<D>, anchors: Vec<[f64; D]>) -> Self {
        Self { domain, anchors }
    }

    /// Anchors at the cell centroids of `mesh`, i.e. the midpoint-rule nodes.
    pub fn with_mesh(domain: &'a dyn Domain<D>, mesh: &SimplicialMesh<D>) -> Self {
        let anchors = (0..mesh.num_cells()).map(|c| mesh.centroid(c)).collect();
        Self { domain, anchors }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementClass {
    Outside,
    Cut,
    Interior,
}

const NO_CHAIN: u32 = u32::MAX;

/// Element classes over a dense block of element indices covering the domain.
#[derive(Debug, Clone)]
pub struct GridClassification<const D: usize> {
    grid: CartesianGrid<D>,
    lower: [i64; D],
    shape: [usize; D],
    classes: Vec<ElementClass>,
    chain: Vec<u32>,
    active: Vec<usize>,
}

/// Classifies all elements of `grid` against `geom`.
///
/// An element is active if the domain reports a positive-measure overlap (or,
/// without an exact test, one of `samples_per_axis^D` cell-centered sample
/// points is inside), or if it contains an anchor. An active element is interior
/// when all its corners and sample points lie in the closed domain.
pub fn classify_elements<const D: usize>(
    grid: &CartesianGrid<D>,
    geom: &DomainGeometry<'_, D>,
    samples_per_axis: usize,
) -> Result<GridClassification<D>> {
    if samples_per_axis < 2 {
        return Err(Error::InvalidParameter("at least two samples per axis are required"));
    }
    let (bb_lo, bb_hi) = geom.domain.bounding_box();
    let lo_idx = grid.element_of(&bb_lo);
    let hi_idx = grid.element_of(&bb_hi);
    let lower: [i64; D] = core::array::from_fn(|k| lo_idx[k] - 1);
    let shape: [usize; D] = core::array::from_fn(|k| (hi_idx[k] + 1 - lower[k] + 1) as usize);
    let total: usize = shape.iter().product();

    let samples_total = samples_per_axis.pow(D as u32);
    let mut classes = vec![ElementClass::Outside; total];
    let mut sample = [0.0; D];
    for (lin, class) in classes.iter_mut().enumerate() {
        let idx = multi_from_linear(&lower, &shape, lin);
        let (lo, hi) = grid.element_bounds(&idx);
        let mut any_in = false;
        let mut all_in = true;
        for s in 0..samples_total {
            let mut rest = s;
            for k in (0..D).rev() {
                let j = rest % samples_per_axis;
                rest /= samples_per_axis;
                sample[k] = lo[k] + grid.sigma() * (j as f64 + 0.5) / samples_per_axis as f64;
            }
            any_in |= geom.domain.contains(&sample);
            all_in &= geom.domain.contains_closed(&sample);
        }
        let active = geom.domain.overlaps_box(&lo, &hi).unwrap_or(any_in);
        if active {
            for c in 0..(1usize << D) {
                let m = corner_offset::<D>(c);
                let corner = core::array::from_fn(|k| if m[k] == 0 { lo[k] } else { hi[k] });
                all_in &= geom.domain.contains_closed(&corner);
            }
            *class = if all_in { ElementClass::Interior } else { ElementClass::Cut };
        }
    }
    for anchor in &geom.anchors {
        let idx = grid.element_of(anchor);
        let lin = linear_from_multi(&lower, &shape, &idx)
            .ok_or(Error::InvalidParameter("anchor lies outside the domain bounding box"))?;
        if classes[lin] == ElementClass::Outside {
            classes[lin] = ElementClass::Cut;
        }
    }
    let active: Vec<usize> = (0..total).filter(|&l| classes[l] != ElementClass::Outside).collect();
    if active.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    Ok(GridClassification {
        grid: *grid,
        lower,
        shape,
        classes,
        chain: vec![NO_CHAIN; total],
        active,
    })
}

fn multi_from_linear<const D: usize>(lower: &[i64; D], shape: &[usize; D], lin: usize) -> [i64; D] {
    let mut idx = [0i64; D];
    let mut rest = lin;
    for k in (0..D).rev() {
        idx[k] = lower[k] + (rest % shape[k]) as i64;
        rest /= shape[k];
    }
    idx
}

fn linear_from_multi<const D: usize>(lower: &[i64; D], shape: &[usize; D], idx: &[i64; D]) -> Option<usize> {
    let mut lin = 0usize;
    for k in 0..D {
        let off = idx[k] - lower[k];
        if off < 0 || off >= shape[k] as i64 {
            return None;
        }
        lin = lin * shape[k] + off as usize;
    }
    Some(lin)
}

impl<const D: usize> GridClassification<D> {
    pub fn grid(&self) -> &CartesianGrid<D> {
        &self.grid
    }

    /// Lowest element multi-index of the classified block.
    pub fn lower(&self) -> [i64; D] {
        self.lower
    }

    pub fn shape(&self) -> [usize; D] {
        self.shape
    }

    /// Number of elements in the classified block (all classes).
    pub fn num_elements(&self) -> usize {
        self.classes.len()
    }

    pub fn element_index(&self, linear: usize) -> NodeIndex<D> {
        multi_from_linear(&self.lower, &self.shape, linear)
    }

    pub fn linear_index(&self, element: &NodeIndex<D>) -> Option<usize> {
        linear_from_multi(&self.lower, &self.shape, element)
    }

    pub fn class(&self, linear: usize) -> ElementClass {
        self.classes[linear]
    }

    pub fn class_of(&self, element: &NodeIndex<D>) -> ElementClass {
        self.linear_index(element)
            .map_or(ElementClass::Outside, |l| self.classes[l])
    }

    pub fn is_active(&self, element: &NodeIndex<D>) -> bool {
        self.class_of(element) != ElementClass::Outside
    }

    /// Linear indices of all active elements, ascending.
    pub fn active_elements(&self) -> &[usize] {
        &self.active
    }

    pub fn cut_elements(&self) -> Vec<usize> {
        self.filter(ElementClass::Cut)
    }

    pub fn interior_elements(&self) -> Vec<usize> {
        self.filter(ElementClass::Interior)
    }

    fn filter(&self, class: ElementClass) -> Vec<usize> {
        self.active.iter().copied().filter(|&l| self.classes[l] == class).collect()
    }

    /// Steps from element `linear` to the nearest interior element, once the
    /// chain condition has been verified.
    pub fn chain_length(&self, linear: usize) -> Option<usize> {
        match self.chain[linear] {
            NO_CHAIN => None,
            d => Some(d as usize),
        }
    }

    /// The `2^D` nodes of an element, in lexicographic order.
    pub fn incident_nodes(&self, element: &NodeIndex<D>) -> Vec<NodeIndex<D>> {
        (0..(1usize << D))
            .map(|c| {
                let m = corner_offset::<D>(c);
                core::array::from_fn(|k| element[k] + m[k])
            })
            .collect()
    }

    /// Active elements having `node` as a corner, as linear indices.
    pub fn incident_elements(&self, node: &NodeIndex<D>) -> Vec<usize> {
        (0..(1usize << D))
            .filter_map(|c| {
                let m = corner_offset::<D>(c);
                let e: NodeIndex<D> = core::array::from_fn(|k| node[k] - m[k]);
                self.linear_index(&e)
                    .filter(|&l| self.classes[l] != ElementClass::Outside)
            })
            .collect()
    }

    /// Active element whose closure contains `x`, preferring the half-open cell.
    pub fn locate(&self, x: &[f64; D]) -> Option<usize> {
        let base = self.grid.element_of(x);
        if let Some(l) = self.linear_index(&base) {
            if self.classes[l] != ElementClass::Outside {
                return Some(l);
            }
        }
        // x may sit on a lower face of `base`; try the neighbors sharing that face.
        for c in 1..(1usize << D) {
            let m = corner_offset::<D>(c);
            let mut candidate = base;
            let mut on_faces = true;
            for k in 0..D {
                if m[k] == 1 {
                    let face = self.grid.origin[k] + self.grid.sigma * base[k] as f64;
                    if abs(x[k] - face) > 1e-12 * self.grid.sigma {
                        on_faces = false;
                        break;
                    }
                    candidate[k] -= 1;
                }
            }
            if on_faces {
                if let Some(l) = self.linear_index(&candidate) {
                    if self.classes[l] != ElementClass::Outside {
                        return Some(l);
                    }
                }
            }
        }
        None
    }

    /// Reclassifies an interior element as cut (the element then carries
    /// stabilization). Chain lengths must be re-verified afterwards.
    pub fn demote_to_cut(&mut self, linear: usize) {
        if self.classes[linear] == ElementClass::Interior {
            self.classes[linear] = ElementClass::Cut;
            self.chain.iter_mut().for_each(|c| *c = NO_CHAIN);
        }
    }

    /// Breadth-first search over node-sharing neighbors from the interior
    /// elements through cut elements. Records the distances and returns the
    /// longest one.
    pub fn verify_chain_condition(&mut self, max_chain: usize) -> Result<usize> {
        let total = self.classes.len();
        let mut dist = vec![NO_CHAIN; total];
        let mut queue = VecDeque::new();
        for &l in &self.active {
            if self.classes[l] == ElementClass::Interior {
                dist[l] = 0;
                queue.push_back(l);
            }
        }
        let neighbor_count = 3usize.pow(D as u32);
        while let Some(l) = queue.pop_front() {
            let idx = self.element_index(l);
            for n in 0..neighbor_count {
                let mut rest = n;
                let mut nb = idx;
                for k in (0..D).rev() {
                    nb[k] += (rest % 3) as i64 - 1;
                    rest /= 3;
                }
                if let Some(m) = self.linear_index(&nb) {
                    if self.classes[m] == ElementClass::Cut && dist[m] == NO_CHAIN {
                        dist[m] = dist[l] + 1;
                        queue.push_back(m);
                    }
                }
            }
        }
        let mut longest = 0usize;
        for &l in &self.active {
            if dist[l] == NO_CHAIN {
                return Err(Error::ChainUnreachable { element: l });
            }
            longest = longest.max(dist[l] as usize);
        }
        self.chain = dist;
        if longest > max_chain {
            return Err(Error::ChainTooLong {
                length: longest,
                max: max_chain,
            });
        }
        Ok(longest)
    }
}

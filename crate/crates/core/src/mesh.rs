//! Simplicial meshes, uniform red refinement, and the quadrature rules and
//! particle fields built on them.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, factorial, sqrt};
use crate::quadrature::{reference_simplex_rule, simplex_points_per_axis};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialMesh<const D: usize> {
    vertices: Vec<[f64; D]>,
    /// Flattened cells, `D + 1` vertex indices each.
    cells: Vec<usize>,
    level: u32,
}

fn signed_volume<const D: usize>(p: &[[f64; D]]) -> f64 {
    match D {
        1 => p[1][0] - p[0][0],
        2 => {
            let (a, b) = ([p[1][0] - p[0][0], p[1][1] - p[0][1]], [p[2][0] - p[0][0], p[2][1] - p[0][1]]);
            0.5 * (a[0] * b[1] - a[1] * b[0])
        }
        3 => {
            let e = |i: usize| [p[i][0] - p[0][0], p[i][1] - p[0][1], p[i][2] - p[0][2]];
            let (a, b, c) = (e(1), e(2), e(3));
            let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                + a[2] * (b[0] * c[1] - b[1] * c[0]);
            det / 6.0
        }
        _ => f64::NAN,
    }
}

impl<const D: usize> SimplicialMesh<D> {
    /// Validates indices and cell orientation.
    pub fn new(vertices: Vec<[f64; D]>, cells: Vec<usize>, level: u32) -> Result<Self> {
        if D != 2 && D != 3 {
            return Err(Error::UnsupportedDimension(D));
        }
        if cells.len() % (D + 1) != 0 {
            return Err(Error::DimensionMismatch {
                expected: D + 1,
                found: cells.len() % (D + 1),
            });
        }
        if let Some(&bad) = cells.iter().find(|&&v| v >= vertices.len()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: vertices.len(),
            });
        }
        let mesh = Self {
            vertices,
            cells,
            level,
        };
        for c in 0..mesh.num_cells() {
            let v = mesh.signed_volume(c);
            if !(v > 0.0) {
                return Err(Error::InvertedCell { cell: c, volume: v });
            }
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[[f64; D]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c * (D + 1)..(c + 1) * (D + 1)]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / (D + 1)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    fn cell_points(&self, c: usize) -> [[f64; D]; 4] {
        let mut p = [[0.0; D]; 4];
        for (slot, &v) in p.iter_mut().zip(self.cell(c)) {
            *slot = self.vertices[v];
        }
        p
    }

    pub fn signed_volume(&self, c: usize) -> f64 {
        signed_volume(&self.cell_points(c)[..D + 1])
    }

    pub fn volume(&self, c: usize) -> f64 {
        abs(self.signed_volume(c))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.volume(c)).sum()
    }

    pub fn centroid(&self, c: usize) -> [f64; D] {
        let p = self.cell_points(c);
        core::array::from_fn(|k| p[..D + 1].iter().map(|q| q[k]).sum::<f64>() / (D + 1) as f64)
    }

    /// Longest edge over all cells.
    pub fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for c in 0..self.num_cells() {
            let cell = self.cell(c);
            for i in 0..=D {
                for j in i + 1..=D {
                    let (a, b) = (self.vertices[cell[i]], self.vertices[cell[j]]);
                    let d2: f64 = (0..D).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum();
                    h = h.max(sqrt(d2));
                }
            }
        }
        h
    }

    /// Red refinement: triangles split into 4 via edge midpoints; tetrahedra into
    /// 4 corner tetrahedra plus 4 around the shortest diagonal of the inner
    /// octahedron. Children are oriented positively.
    pub fn refine_uniform(&self) -> Self {
        let mut vertices = self.vertices.clone();
        let mut midpoints: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<[f64; D]>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                vertices.push(core::array::from_fn(|k| 0.5 * (p[k] + q[k])));
                vertices.len() - 1
            })
        };
        let mut cells = Vec::with_capacity(self.cells.len() * (1 << D));
        for c in 0..self.num_cells() {
            let v = self.cell(c);
            if D == 2 {
                let (a, b, cc) = (v[0], v[1], v[2]);
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, cc, &mut vertices);
                let ca = midpoint(cc, a, &mut vertices);
                for child in [[a, ab, ca], [ab, b, bc], [ca, bc, cc], [ab, bc, ca]] {
                    push_oriented(&vertices, &mut cells, &child);
                }
            } else {
                let x = [v[0], v[1], v[2], v[3]];
                let mut m = [[0usize; 4]; 4];
                for i in 0..4 {
                    for j in i + 1..4 {
                        m[i][j] = midpoint(x[i], x[j], &mut vertices);
                        m[j][i] = m[i][j];
                    }
                }
                let corners = [
                    [x[0], m[0][1], m[0][2], m[0][3]],
                    [m[0][1], x[1], m[1][2], m[1][3]],
                    [m[0][2], m[1][2], x[2], m[2][3]],
                    [m[0][3], m[1][3], m[2][3], x[3]],
                ];
                for child in &corners {
                    push_oriented(&vertices, &mut cells, child);
                }
                // Inner octahedron: diagonal plus its equator cycle.
                let options = [
                    ((m[0][1], m[2][3]), [m[0][2], m[0][3], m[1][3], m[1][2]]),
                    ((m[0][2], m[1][3]), [m[0][1], m[0][3], m[2][3], m[1][2]]),
                    ((m[0][3], m[1][2]), [m[0][1], m[0][2], m[2][3], m[1][3]]),
                ];
                let len2 = |(a, b): (usize, usize), vs: &Vec<[f64; D]>| -> f64 {
                    (0..D).map(|k| (vs[a][k] - vs[b][k]) * (vs[a][k] - vs[b][k])).sum()
                };
                let mut best = 0;
                for o in 1..3 {
                    if len2(options[o].0, &vertices) < len2(options[best].0, &vertices) * (1.0 - 1e-12) {
                        best = o;
                    }
                }
                let ((p, q), ring) = options[best];
                for i in 0..4 {
                    push_oriented(&vertices, &mut cells, &[p, q, ring[i], ring[(i + 1) % 4]]);
                }
            }
        }
        Self {
            vertices,
            cells,
            level: self.level + 1,
        }
    }

    pub fn refine_to(&self, level: u32) -> Self {
        let mut mesh = self.clone();
        while mesh.level < level {
            mesh = mesh.refine_uniform();
        }
        mesh
    }

    /// One node per cell at its centroid, weight = cell volume.
    pub fn midpoint_rule(&self) -> QuadratureRule<D> {
        let n = self.num_cells();
        QuadratureRule {
            nodes: (0..n).map(|c| self.centroid(c)).collect(),
            weights: (0..n).map(|c| self.volume(c)).collect(),
            exactness_degree: 1,
        }
    }

    /// Collapsed Gauss rule on every cell, exact for polynomials of total degree `degree`.
    pub fn gauss_rule(&self, degree: usize) -> Result<QuadratureRule<D>> {
        let (ref_nodes, ref_weights) = reference_simplex_rule::<D>(simplex_points_per_axis(D, degree))?;
        let scale = factorial(D as u32);
        let mut nodes = Vec::with_capacity(self.num_cells() * ref_nodes.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        for c in 0..self.num_cells() {
            let p = self.cell_points(c);
            let vol = self.volume(c);
            for (r, w) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(core::array::from_fn(|k| {
                    p[0][k] + (0..D).map(|j| r[j] * (p[j + 1][k] - p[0][k])).sum::<f64>()
                }));
                weights.push(w * scale * vol);
            }
        }
        Ok(QuadratureRule {
            nodes,
            weights,
            exactness_degree: degree as u32,
        })
    }
}

fn push_oriented<const D: usize>(vertices: &[[f64; D]], cells: &mut Vec<usize>, child: &[usize]) {
    let mut pts = [[0.0; D]; 4];
    for (slot, &v) in pts.iter_mut().zip(child) {
        *slot = vertices[v];
    }
    let start = cells.len();
    cells.extend_from_slice(child);
    if signed_volume(&pts[..D + 1]) < 0.0 {
        cells.swap(start, start + 1);
    }
}

/// The cube `(-1/2, 1/2)^D`: 4 triangles around the center in 2D, 24 tetrahedra
/// (center, face center, face edge) in 3D.
pub fn unit_cube_mesh<const D: usize>() -> Result<SimplicialMesh<D>> {
    let mut vertices: Vec<[f64; D]> = Vec::new();
    let mut cells = Vec::new();
    match D {
        2 => {
            let square = [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]];
            for p in square {
                vertices.push(core::array::from_fn(|k| p[k]));
            }
            vertices.push([0.0; D]);
            for i in 0..4 {
                push_oriented(&vertices, &mut cells, &[4, i, (i + 1) % 4]);
            }
        }
        3 => {
            for c in 0..8usize {
                vertices.push(core::array::from_fn(|k| if (c >> k) & 1 == 1 { 0.5 } else { -0.5 }));
            }
            let center = vertices.len();
            vertices.push([0.0; D]);
            for axis in 0..3 {
                for side in 0..2usize {
                    let mut f = [0.0; D];
                    f[axis] = if side == 1 { 0.5 } else { -0.5 };
                    let face_center = vertices.len();
                    vertices.push(f);
                    // Face corners in cyclic order over the two free axes.
                    let (u, w) = ((axis + 1) % 3, (axis + 2) % 3);
                    let ring = [(0, 0), (1, 0), (1, 1), (0, 1)].map(|(a, b)| {
                        (side << axis) | (a << u) | (b << w)
                    });
                    for i in 0..4 {
                        push_oriented(&vertices, &mut cells, &[center, face_center, ring[i], ring[(i + 1) % 4]]);
                    }
                }
            }
        }
        d => return Err(Error::UnsupportedDimension(d)),
    }
    SimplicialMesh::new(vertices, cells, 0)
}

/// Nodes and positive weights; exact for polynomials up to `exactness_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<const D: usize> {
    pub nodes: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    pub exactness_degree: u32,
}

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate<F: Fn(&[f64; D]) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// Weighted point masses `Σ Γ_i δ(x - x_i)` with `components` values per particle.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleField<const D: usize> {
    pub positions: Vec<[f64; D]>,
    /// Flattened circulations, `components` per particle.
    pub circulations: Vec<f64>,
    pub components: usize,
}

impl<const D: usize> ParticleField<D> {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn circulation(&self, i: usize) -> &[f64] {
        &self.circulations[i * self.components..(i + 1) * self.components]
    }

    /// `Σ_i Γ_i`, per component.
    pub fn total_circulation(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.components];
        for i in 0..self.len() {
            for (t, g) in total.iter_mut().zip(self.circulation(i)) {
                *t += g;
            }
        }
        total
    }
}

/// `Γ_i = w_i u(x_i)` at the nodes of `rule`; `u` writes `components` values.
pub fn sample_particles<const D: usize, F>(rule: &QuadratureRule<D>, components: usize, u: F) -> ParticleField<D>
where
    F: Fn(&[f64; D], &mut [f64]),
{
    let mut circulations = vec![0.0; rule.len() * components];
    for (i, (x, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let out = &mut circulations[i * components..(i + 1) * components];
        u(x, out);
        out.iter_mut().for_each(|g| *g *= w);
    }
    ParticleField {
        positions: rule.nodes.clone(),
        circulations,
        components,
    }
}

/// Scalar convenience form of [`sample_particles`].
pub fn sample_scalar<const D: usize, F: Fn(&[f64; D]) -> f64>(rule: &QuadratureRule<D>, u: F) -> ParticleField<D> {
    sample_particles(rule, 1, |x, out| out[0] = u(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_meshes() {
        let m3 = unit_cube_mesh::<3>().unwrap();
        assert_eq!(m3.num_cells(), 24);
        for c in 0..24 {
            assert!((m3.volume(c) - 1.0 / 24.0).abs() < 1e-15);
        }
        assert!((m3.max_edge_length() - 1.0).abs() < 1e-15);
        let m2 = unit_cube_mesh::<2>().unwrap();
        assert_eq!(m2.num_cells(), 4);
        assert!((m2.total_volume() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn refinement_preserves_volume_and_orientation() {
        let m = unit_cube_mesh::<3>().unwrap().refine_to(2);
        assert_eq!(m.num_cells(), 24 * 64);
        assert_eq!(m.level(), 2);
        assert!((m.total_volume() - 1.0).abs() < 1e-12);
        assert!((0..m.num_cells()).all(|c| m.signed_volume(c) > 0.0));
        // The inner-octahedron diagonal makes level 1 longer than 1/2; from
        // there on the mesh size halves exactly.
        let h1 = unit_cube_mesh::<3>().unwrap().refine_uniform().max_edge_length();
        assert!((h1 - 5f64.sqrt() / 4.0).abs() < 1e-12);
        assert!((m.max_edge_length() - h1 / 2.0).abs() < 1e-12);
        let m2 = unit_cube_mesh::<2>().unwrap().refine_to(3);
        assert_eq!(m2.num_cells(), 4 * 64);
        assert!((m2.total_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shared_midpoints_are_deduplicated() {
        let m = unit_cube_mesh::<3>().unwrap().refine_uniform();
        // Euler characteristic of a ball triangulation: V - E + F - T = 1.
        let mut edges = alloc::collections::BTreeSet::new();
        let mut faces = alloc::collections::BTreeSet::new();
        for c in 0..m.num_cells() {
            let mut v: Vec<usize> = m.cell(c).to_vec();
            v.sort_unstable();
            for i in 0..4 {
                for j in i + 1..4 {
                    edges.insert((v[i], v[j]));
                }
                let mut f = v.clone();
                f.remove(i);
                faces.insert(f);
            }
        }
        let chi = m.vertices().len() as i64 - edges.len() as i64 + faces.len() as i64 - m.num_cells() as i64;
        assert_eq!(chi, 1);
    }

    #[test]
    fn midpoint_rule_on_reference_simplex() {
        let m = SimplicialMesh::<3>::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![0, 1, 2, 3],
            0,
        )
        .unwrap();
        let r = m.midpoint_rule();
        assert_eq!(r.integrate(|_| 1.0), 1.0 / 6.0);
        assert!((r.integrate(|x| x[0] + x[1] + x[2]) - 0.125).abs() < 1e-16);
    }

    #[test]
    fn gauss_rule_degree() {
        let m = unit_cube_mesh::<3>().unwrap();
        let r = m.gauss_rule(4).unwrap();
        assert!((r.total_weight() - 1.0).abs() < 1e-14);
        // ∫ x⁴ over (-1/2,1/2)^3 = 1/80.
        assert!((r.integrate(|x| x[0].powi(4)) - 1.0 / 80.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_meshes_are_rejected() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            SimplicialMesh::<2>::new(v.clone(), vec![0, 2, 1], 0),
            Err(Error::InvertedCell { .. })
        ));
        assert!(matches!(
            SimplicialMesh::<2>::new(v, vec![0, 1, 3], 0),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn particle_sampling() {
        let rule = unit_cube_mesh::<2>().unwrap().refine_to(2).midpoint_rule();
        let p = sample_scalar(&rule, |_| 1.0);
        assert!((p.total_circulation()[0] - 1.0).abs() < 1e-14);
        let z = sample_particles(&rule, 2, |_, out| out.fill(0.0));
        assert!(z.circulations.iter().all(|&g| g == 0.0));
    }
}

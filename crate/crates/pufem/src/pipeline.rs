//! Per-level discretization: mesh, particles, grid classification and the
//! stabilized projection.

use std::sync::Arc;

use anyhow::anyhow;
use pufem_core::assembly::{
    assemble_mass, assemble_rhs, assemble_stabilization, precompute_reference_tables, system, ReferenceIntegralTable,
    SystemBundle,
};
use pufem_core::grid::{
    classify_elements, BoxDomain, CartesianGrid, DomainGeometry, DEFAULT_MAX_CHAIN, DEFAULT_SAMPLES_PER_AXIS,
};
use pufem_core::mesh::{ParticleField, QuadratureRule, SimplicialMesh};
use pufem_core::mollifier::{Mollifier, PartitionFunction};
use pufem_core::quadrature::composite_gauss_legendre;
use pufem_core::solver::{solve_pcg, SolveReport};
use pufem_core::space::PufemSpace;

use crate::config::ExperimentConfig;

/// Level-independent data shared by every level of a run.
pub struct Toolkit<const D: usize> {
    pub partition: Arc<PartitionFunction>,
    pub table: ReferenceIntegralTable<D>,
}

impl<const D: usize> Toolkit<D> {
    pub fn new(cfg: &ExperimentConfig) -> anyhow::Result<Self> {
        let partition = Arc::new(PartitionFunction::build(cfg.table_resolution, Mollifier::new()?)?);
        let table = precompute_reference_tables::<D>(&partition, cfg.degree, cfg.reference_order)?;
        Ok(Self { partition, table })
    }
}

/// Refines the cube mesh level by level, keeping the finest mesh built so far.
pub struct MeshLadder<const D: usize> {
    mesh: SimplicialMesh<D>,
}

impl<const D: usize> MeshLadder<D> {
    pub fn new() -> anyhow::Result<Self> {
        Ok(Self {
            mesh: pufem_core::mesh::unit_cube_mesh::<D>()?,
        })
    }

    pub fn at(&mut self, level: u32) -> SimplicialMesh<D> {
        if self.mesh.level() > level {
            self.mesh = pufem_core::mesh::unit_cube_mesh::<D>().expect("cube mesh").refine_to(level);
        } else {
            self.mesh = self.mesh.refine_to(level);
        }
        self.mesh.clone()
    }
}

/// The PUFEM space of one grid placement together with its chain length.
pub struct GridSpace<const D: usize> {
    pub space: PufemSpace<D>,
    pub chain: usize,
    pub cut_elements: usize,
}

/// Classifies the grid `σ Z^D + origin` against the centered unit cube, with
/// the centroids of `mesh` (when given) as anchors.
pub fn grid_space<const D: usize>(
    toolkit: &Toolkit<D>,
    degree: u32,
    sigma: f64,
    origin: [f64; D],
    mesh: Option<&SimplicialMesh<D>>,
) -> anyhow::Result<GridSpace<D>> {
    let domain = BoxDomain::<D>::centered_unit_cube();
    let grid = CartesianGrid::new(sigma, origin)?;
    let geom = match mesh {
        Some(m) => DomainGeometry::with_mesh(&domain, m),
        None => DomainGeometry::new(&domain),
    };
    let mut cls = classify_elements(&grid, &geom, DEFAULT_SAMPLES_PER_AXIS)?;
    let chain = cls
        .verify_chain_condition(DEFAULT_MAX_CHAIN)
        .map_err(|e| anyhow!("chain condition: {e}"))?;
    let cut_elements = cls.cut_elements().len();
    let space = PufemSpace::new(cls, toolkit.partition.clone(), degree)?;
    Ok(GridSpace {
        space,
        chain,
        cut_elements,
    })
}

/// Mass and stabilization of `space` against the particle rule; right-hand
/// sides from `particles` (none when `particles` is `None`).
pub fn assemble<const D: usize>(
    toolkit: &Toolkit<D>,
    space: &PufemSpace<D>,
    rule: &QuadratureRule<D>,
    particles: Option<&ParticleField<D>>,
    epsilon: f64,
) -> anyhow::Result<SystemBundle> {
    let mass = assemble_mass(space, &toolkit.table, rule)?;
    let stab = assemble_stabilization(space, &toolkit.table)?;
    let rhs = match particles {
        Some(p) => assemble_rhs(space, p)?,
        None => Vec::new(),
    };
    Ok(system(mass, stab, epsilon, rhs)?)
}

/// Solves `(A_h + ε J) c = b` for every right-hand side.
pub fn solve_all(bundle: &SystemBundle, tolerance: f64, max_iterations: usize) -> anyhow::Result<Vec<SolveReport>> {
    bundle
        .rhs
        .iter()
        .map(|b| solve_pcg(bundle, b, tolerance, max_iterations).map_err(Into::into))
        .collect()
}

/// Tensor-product composite Gauss–Legendre rule on the centered unit cube
/// with `panels` panels of `order` nodes per axis.
pub fn product_gauss_rule<const D: usize>(panels: usize, order: usize) -> QuadratureRule<D> {
    let (x, w) = composite_gauss_legendre(order, panels, -0.5, 0.5);
    let n = x.len();
    let total = n.pow(D as u32);
    let mut nodes = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for lin in 0..total {
        let mut rest = lin;
        let mut p = [0.0; D];
        let mut wt = 1.0;
        for k in (0..D).rev() {
            let i = rest % n;
            rest /= n;
            p[k] = x[i];
            wt *= w[i];
        }
        nodes.push(p);
        weights.push(wt);
    }
    QuadratureRule {
        nodes,
        weights,
        exactness_degree: (2 * order - 1) as u32,
    }
}

/// Short status of a batch of solves.
pub fn solve_status(reports: &[SolveReport]) -> &'static str {
    if reports.iter().any(|r| r.breakdown) {
        "breakdown"
    } else if reports.iter().all(|r| r.converged) {
        "ok"
    } else {
        "not-converged"
    }
}

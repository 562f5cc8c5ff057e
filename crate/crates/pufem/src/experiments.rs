//! Convergence, velocity, conditioning and boundary-position studies.
//!
//! Each study returns a [`CsvTable`] plus per-level timings; the timings are
//! written to a sidecar file so that the main CSV stays byte-reproducible.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use pufem_core::fields::{biot_savart_sum, polar_box_rule, sample_field, particle_moment, PolarResolution, SmoothedField, VorticitySources};
use pufem_core::graded_multi_indices;
use pufem_core::grid::BoxDomain;
use pufem_core::mesh::{sample_particles, sample_scalar, ParticleField, QuadratureRule};
use pufem_core::solver::{estimate_condition_with, SpectrumStatus};
use pufem_core::sparse::SymmetricSparseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig};
use crate::flows::{PrescribedFlow, SwirlFlow};
use crate::io::CsvTable;
use crate::pipeline::{assemble, grid_space, product_gauss_rule, solve_all, solve_status, MeshLadder, Toolkit};

/// A finished study: the result table and wall-clock seconds per labelled step.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: CsvTable,
    pub timings: Vec<(String, f64)>,
}

impl Outcome {
    fn new(cfg: &ExperimentConfig, columns: &[&str]) -> anyhow::Result<Self> {
        let mut table = CsvTable::new(columns.iter().copied());
        table.meta("tool", concat!("pufem ", env!("CARGO_PKG_VERSION")));
        table.meta("experiment", cfg.experiment);
        table.meta("config", serde_json::to_string(cfg)?);
        Ok(Self {
            table,
            timings: Vec::new(),
        })
    }

    fn timing_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["step", "seconds"]);
        for (label, secs) in &self.timings {
            t.push(vec![label.clone(), format!("{secs:.3}")]);
        }
        t
    }
}

/// Shortest round-trip form, in scientific notation away from unit scale.
/// NaN becomes an empty cell.
pub fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v != 0.0 && v.is_finite() && !(1e-3..1e6).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// `log(e₀/e₁) / log(h₀/h₁)` between two successive rows.
pub fn empirical_order(e0: f64, e1: f64, h0: f64, h1: f64) -> f64 {
    (e0 / e1).ln() / (h0 / h1).ln()
}

/// Empirical orders of `errors` against `widths`, NaN where undefined.
pub fn orders(errors: &[f64], widths: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; errors.len()];
    for i in 1..errors.len() {
        out[i] = empirical_order(errors[i - 1], errors[i], widths[i - 1], widths[i]);
    }
    out
}

/// Runs the configured study on a thread pool of the configured size and
/// writes `<stem>.csv` and `<stem>.runtime.csv` into the output directory.
pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<(Outcome, PathBuf)> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let outcome = pool.install(|| dispatch(cfg))?;
    let path = cfg.output.join(format!("{}.csv", cfg.experiment.file_stem()));
    outcome.table.write_file(&path)?;
    let sidecar = cfg.output.join(format!("{}.runtime.csv", cfg.experiment.file_stem()));
    outcome.timing_table().write_file(&sidecar)?;
    Ok((outcome, path))
}

/// Runs the configured study in the current thread pool without writing files.
pub fn dispatch(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    cfg.validate()?;
    match (cfg.experiment, cfg.dim) {
        (Experiment::CosineS1 | Experiment::CosineS2, 2) => run_cosine::<2>(cfg),
        (Experiment::CosineS1 | Experiment::CosineS2, _) => run_cosine::<3>(cfg),
        (Experiment::Velocity, _) => run_velocity(cfg, &SwirlFlow),
        (Experiment::Condition, 2) => run_condition::<2>(cfg),
        (Experiment::Condition, _) => run_condition::<3>(cfg),
        (Experiment::OffsetSweep, 2) => run_offset_sweep::<2>(cfg, &random_offsets(cfg, cfg.levels.first)),
        (Experiment::OffsetSweep, _) => run_offset_sweep::<3>(cfg, &random_offsets(cfg, cfg.levels.first)),
    }
}

/// `u(x) = cos(4π x₁)`.
pub fn cosine<const D: usize>(x: &[f64; D]) -> f64 {
    (4.0 * PI * x[0]).cos()
}

/// Largest `|a_h(u_σ, x^α) - Σ Γ_i x_i^α|` over `|α| ≤ P` and components,
/// relative to `Σ |Γ_i|`.
pub fn moment_defect<const D: usize>(
    field: &SmoothedField<'_, D>,
    mass: &SymmetricSparseMatrix,
    particles: &ParticleField<D>,
) -> f64 {
    let scale: f64 = particles.circulations.iter().map(|g| g.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for alpha in graded_multi_indices::<D>(field.space().degree()) {
        let field_m = field.discrete_moment(mass, &alpha);
        let particle_m = particle_moment(particles, &alpha);
        for (a, b) in field_m.iter().zip(&particle_m) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    worst
}

const COSINE_COLUMNS: [&str; 14] = [
    "level",
    "h",
    "sigma",
    "particles",
    "dofs",
    "cut_elements",
    "chain",
    "iterations",
    "relative_residual",
    "status",
    "l2_error",
    "order",
    "moment_defect",
    "message",
];

/// Projection of particles sampling `cos(4π x₁)` at every level.
pub fn run_cosine<const D: usize>(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let mut out = Outcome::new(cfg, &COSINE_COLUMNS)?;
    if cfg.levels.is_empty() {
        return Ok(out);
    }
    let toolkit = Toolkit::<D>::new(cfg)?;
    let mut ladder = MeshLadder::<D>::new()?;
    let mut errors = Vec::new();
    let mut widths = Vec::new();
    let mut pending = Vec::new();
    for level in cfg.levels.levels() {
        let start = Instant::now();
        let h = ExperimentConfig::mesh_width(level);
        let sigma = cfg.sigma(level);
        let mesh = ladder.at(level);
        let rule = mesh.midpoint_rule();
        let particles = sample_scalar(&rule, cosine::<D>);
        let mut row = vec![
            level.to_string(),
            fmt(h),
            fmt(sigma),
            particles.len().to_string(),
        ];
        let result = (|| -> anyhow::Result<Vec<String>> {
            let gs = grid_space(&toolkit, cfg.degree, sigma, cfg.origin::<D>(), Some(&mesh))?;
            let bundle = assemble(&toolkit, &gs.space, &rule, Some(&particles), cfg.epsilon)?;
            let reports = solve_all(&bundle, cfg.tolerance, cfg.max_iterations)?;
            let report = &reports[0];
            let field = SmoothedField::new(&gs.space, vec![report.coefficients.clone()])?;
            let error_rule = mesh.gauss_rule(cfg.error_rule_degree)?;
            let l2 = field.l2_error(|x, o| o[0] = cosine(x), &error_rule)?;
            let defect = moment_defect(&field, &bundle.mass, &particles);
            Ok(vec![
                gs.space.dofs().len().to_string(),
                gs.cut_elements.to_string(),
                gs.chain.to_string(),
                report.iterations.to_string(),
                fmt(report.relative_residual),
                solve_status(&reports).to_string(),
                fmt(l2),
                fmt(defect),
            ])
        })();
        match result {
            Ok(mut cols) => {
                let l2: f64 = cols[6].parse()?;
                errors.push(l2);
                widths.push(h);
                let defect = cols.pop().unwrap_or_default();
                row.append(&mut cols);
                pending.push((row, Some(errors.len() - 1), defect, String::new()));
            }
            Err(e) => {
                row.extend(std::iter::repeat(String::new()).take(5));
                row.push("failed".to_string());
                row.push(String::new());
                pending.push((row, None, String::new(), format!("{e:#}")));
            }
        }
        out.timings.push((format!("level {level}"), start.elapsed().as_secs_f64()));
    }
    let ords = orders(&errors, &widths);
    for (mut row, idx, defect, msg) in pending {
        row.push(idx.map_or(String::new(), |i| fmt(ords[i])));
        row.push(defect);
        row.push(msg);
        out.table.push(row);
    }
    Ok(out)
}

/// Composite Gauss nodes on the cube at which velocity errors are measured.
pub fn velocity_error_rule(cfg: &ExperimentConfig) -> QuadratureRule<3> {
    product_gauss_rule::<3>(cfg.velocity.error_panels, cfg.velocity.error_order)
}

const VELOCITY_COLUMNS: [&str; 13] = [
    "level",
    "h",
    "sigma",
    "particles",
    "dofs",
    "iterations",
    "status",
    "vorticity_l2",
    "vorticity_order",
    "velocity_l2",
    "velocity_order",
    "skipped",
    "message",
];

/// Velocity of the smoothed vorticity at the nodes of `rule`, each by a polar
/// quadrature of the Biot–Savart integral centered on the node.
pub fn smoothed_velocity(
    field: &SmoothedField<'_, 3>,
    points: &[[f64; 3]],
    res: &PolarResolution,
    eta: f64,
) -> anyhow::Result<(Vec<[f64; 3]>, usize)> {
    let domain = BoxDomain::<3>::centered_unit_cube();
    let per_point: Vec<anyhow::Result<([f64; 3], usize)>> = points
        .par_iter()
        .map(|x| {
            let rule = polar_box_rule(x, &domain, res)?;
            let vorticity = sample_field(field, &rule.nodes)?;
            let sources = VorticitySources {
                points: &rule.nodes,
                weights: &rule.weights,
                vorticity: &vorticity,
            };
            let v = biot_savart_sum(&[*x], &sources, eta)?;
            Ok((v.velocity[0], v.skipped))
        })
        .collect();
    let mut velocity = Vec::with_capacity(points.len());
    let mut skipped = 0;
    for r in per_point {
        let (u, s) = r?;
        velocity.push(u);
        skipped += s;
    }
    Ok((velocity, skipped))
}

/// Smoothed vorticity of `flow` and its Biot–Savart velocity at every level.
pub fn run_velocity(cfg: &ExperimentConfig, flow: &dyn PrescribedFlow) -> anyhow::Result<Outcome> {
    let mut out = Outcome::new(cfg, &VELOCITY_COLUMNS)?;
    if cfg.levels.is_empty() {
        return Ok(out);
    }
    let toolkit = Toolkit::<3>::new(cfg)?;
    let mut ladder = MeshLadder::<3>::new()?;
    let eval_rule = velocity_error_rule(cfg);
    let exact_velocity: Vec<[f64; 3]> = eval_rule.nodes.iter().map(|x| flow.velocity(x)).collect();
    let mut rows = Vec::new();
    let (mut vort, mut vel, mut widths) = (Vec::new(), Vec::new(), Vec::new());
    for level in cfg.levels.levels() {
        let start = Instant::now();
        let h = ExperimentConfig::mesh_width(level);
        let sigma = cfg.sigma(level);
        let mesh = ladder.at(level);
        let rule = mesh.midpoint_rule();
        let particles = sample_particles(&rule, 3, |x, o| o.copy_from_slice(&flow.vorticity(x)));
        let result = (|| -> anyhow::Result<(Vec<String>, f64, f64)> {
            let gs = grid_space(&toolkit, cfg.degree, sigma, cfg.origin::<3>(), Some(&mesh))?;
            let bundle = assemble(&toolkit, &gs.space, &rule, Some(&particles), cfg.epsilon)?;
            let reports = solve_all(&bundle, cfg.tolerance, cfg.max_iterations)?;
            let field = SmoothedField::new(&gs.space, reports.iter().map(|r| r.coefficients.clone()).collect())?;
            let error_rule = mesh.gauss_rule(cfg.error_rule_degree)?;
            let vorticity_l2 = field.l2_error(|x, o| o.copy_from_slice(&flow.vorticity(x)), &error_rule)?;
            let res = PolarResolution {
                polar: cfg.velocity.polar,
                azimuthal: cfg.velocity.azimuthal,
                panel_length: cfg.velocity.radial_panel * sigma,
                panel_order: cfg.velocity.radial_order,
            };
            let (velocity, skipped) =
                smoothed_velocity(&field, &eval_rule.nodes, &res, cfg.exclusion_factor * sigma)?;
            let mut sq = 0.0;
            for ((u, e), w) in velocity.iter().zip(&exact_velocity).zip(&eval_rule.weights) {
                sq += w * (0..3).map(|k| (u[k] - e[k]).powi(2)).sum::<f64>();
            }
            let iterations: usize = reports.iter().map(|r| r.iterations).max().unwrap_or(0);
            Ok((
                vec![
                    gs.space.dofs().len().to_string(),
                    iterations.to_string(),
                    solve_status(&reports).to_string(),
                    skipped.to_string(),
                ],
                vorticity_l2,
                sq.sqrt(),
            ))
        })();
        let head = vec![level.to_string(), fmt(h), fmt(sigma), particles.len().to_string()];
        match result {
            Ok((cols, wl2, ul2)) => {
                vort.push(wl2);
                vel.push(ul2);
                widths.push(h);
                rows.push((head, Some((cols, vort.len() - 1)), String::new()));
            }
            Err(e) => rows.push((head, None, format!("{e:#}"))),
        }
        out.timings.push((format!("level {level}"), start.elapsed().as_secs_f64()));
    }
    let vort_orders = orders(&vort, &widths);
    let vel_orders = orders(&vel, &widths);
    for (mut row, data, msg) in rows {
        match data {
            Some((cols, i)) => {
                row.extend(cols[..3].iter().cloned());
                row.extend([fmt(vort[i]), fmt(vort_orders[i]), fmt(vel[i]), fmt(vel_orders[i])]);
                row.push(cols[3].clone());
            }
            None => {
                row.extend([String::new(), String::new(), "failed".to_string()]);
                row.extend(std::iter::repeat(String::new()).take(5));
            }
        }
        row.push(msg);
        out.table.push(row);
    }
    Ok(out)
}

const CONDITION_COLUMNS: [&str; 14] = [
    "level",
    "h",
    "sigma",
    "dofs",
    "cut_elements",
    "epsilon",
    "lambda_min",
    "lambda_max",
    "condition",
    "status",
    "lanczos_steps",
    "converged",
    "min_diagonal",
    "message",
];

fn status_name(s: SpectrumStatus) -> &'static str {
    match s {
        SpectrumStatus::PositiveDefinite => "positive-definite",
        SpectrumStatus::Indefinite => "indefinite",
        SpectrumStatus::Singular => "singular",
    }
}

/// Lanczos estimates of `cond(D^{-1}(A_h + εJ))` over the configured ε list.
pub fn run_condition<const D: usize>(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let mut out = Outcome::new(cfg, &CONDITION_COLUMNS)?;
    if cfg.levels.is_empty() {
        return Ok(out);
    }
    let toolkit = Toolkit::<D>::new(cfg)?;
    let mut ladder = MeshLadder::<D>::new()?;
    for level in cfg.levels.levels() {
        let start = Instant::now();
        let h = ExperimentConfig::mesh_width(level);
        let sigma = cfg.sigma(level);
        let mesh = ladder.at(level);
        let rule = mesh.midpoint_rule();
        let head = vec![level.to_string(), fmt(h), fmt(sigma)];
        let built = grid_space(&toolkit, cfg.degree, sigma, cfg.origin::<D>(), Some(&mesh))
            .and_then(|gs| Ok((assemble(&toolkit, &gs.space, &rule, None, 0.0)?, gs)));
        match built {
            Ok((bundle, gs)) => {
                for &eps in &cfg.epsilons {
                    let op = bundle.with_epsilon(eps)?;
                    let est = estimate_condition_with(&op, cfg.lanczos_steps, cfg.seed);
                    let min_diag = op.diagonal_min();
                    let mut row = head.clone();
                    row.extend([
                        gs.space.dofs().len().to_string(),
                        gs.cut_elements.to_string(),
                        fmt(eps),
                        fmt(est.lambda_min),
                        fmt(est.lambda_max),
                        fmt(est.condition),
                        status_name(est.status).to_string(),
                        est.steps.to_string(),
                        est.converged.to_string(),
                        fmt(min_diag),
                        String::new(),
                    ]);
                    out.table.push(row);
                }
            }
            Err(e) => {
                for &eps in &cfg.epsilons {
                    let mut row = head.clone();
                    row.extend([String::new(), String::new(), fmt(eps)]);
                    row.extend(std::iter::repeat(String::new()).take(3));
                    row.push("failed".to_string());
                    row.extend(std::iter::repeat(String::new()).take(3));
                    row.push(format!("{e:#}"));
                    out.table.push(row);
                }
            }
        }
        out.timings.push((format!("level {level}"), start.elapsed().as_secs_f64()));
    }
    Ok(out)
}

trait MinDiagonal {
    fn diagonal_min(&self) -> f64;
}

impl<T: pufem_core::sparse::LinearOperator> MinDiagonal for T {
    fn diagonal_min(&self) -> f64 {
        self.diagonal().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// The zero offset followed by `offset_samples` uniform draws from `[0, σ)^d`.
pub fn random_offsets(cfg: &ExperimentConfig, level: u32) -> Vec<Vec<f64>> {
    let sigma = cfg.sigma(level);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = vec![vec![0.0; cfg.dim]];
    for _ in 0..cfg.offset_samples {
        out.push((0..cfg.dim).map(|_| rng.gen_range(0.0..sigma)).collect());
    }
    out
}

const SWEEP_COLUMNS: [&str; 15] = [
    "level",
    "sigma",
    "index",
    "dx",
    "dy",
    "dz",
    "epsilon",
    "dofs",
    "cut_elements",
    "chain",
    "lambda_min",
    "lambda_max",
    "condition",
    "status",
    "message",
];

/// Spectral bounds of the scaled system for each grid offset, at every level.
pub fn run_offset_sweep<const D: usize>(cfg: &ExperimentConfig, offsets: &[Vec<f64>]) -> anyhow::Result<Outcome> {
    let mut out = Outcome::new(cfg, &SWEEP_COLUMNS)?;
    if cfg.levels.is_empty() {
        return Ok(out);
    }
    let toolkit = Toolkit::<D>::new(cfg)?;
    let mut ladder = MeshLadder::<D>::new()?;
    for level in cfg.levels.levels() {
        let start = Instant::now();
        let sigma = cfg.sigma(level);
        let mesh = ladder.at(level);
        let rule = mesh.midpoint_rule();
        for (index, offset) in offsets.iter().enumerate() {
            let origin: [f64; D] = std::array::from_fn(|k| offset.get(k).copied().unwrap_or(0.0));
            let mut row = vec![level.to_string(), fmt(sigma), index.to_string()];
            row.extend((0..3).map(|k| if k < D { fmt(origin[k]) } else { String::new() }));
            row.push(fmt(cfg.epsilon));
            let result = grid_space(&toolkit, cfg.degree, sigma, origin, Some(&mesh)).and_then(|gs| {
                let bundle = assemble(&toolkit, &gs.space, &rule, None, cfg.epsilon)?;
                let est = estimate_condition_with(&bundle, cfg.lanczos_steps, cfg.seed);
                Ok((gs, est))
            });
            match result {
                Ok((gs, est)) => row.extend([
                    gs.space.dofs().len().to_string(),
                    gs.cut_elements.to_string(),
                    gs.chain.to_string(),
                    fmt(est.lambda_min),
                    fmt(est.lambda_max),
                    fmt(est.condition),
                    status_name(est.status).to_string(),
                    String::new(),
                ]),
                Err(e) => {
                    row.extend(std::iter::repeat(String::new()).take(6));
                    row.push("failed".to_string());
                    row.push(format!("{e:#}"));
                }
            }
            out.table.push(row);
        }
        out.timings.push((format!("level {level}"), start.elapsed().as_secs_f64()));
    }
    Ok(out)
}

/// Writes the tabulated partition function as CSV.
pub fn write_phi_table(resolution: usize, path: &std::path::Path) -> anyhow::Result<()> {
    let pf = pufem_core::mollifier::PartitionFunction::build(resolution, pufem_core::mollifier::Mollifier::new()?)?;
    crate::io::phi_table(&pf)
        .write_file(path)
        .with_context(|| format!("writing {}", path.display()))
}

use pufem::config::{Experiment, ExperimentConfig, LevelRange};
use pufem::experiments::{run, run_cosine, run_velocity};
use pufem::flows::ZeroFlow;
use pufem::pipeline::{assemble, grid_space, product_gauss_rule, Toolkit};
use pufem_core::solver::{estimate_condition_with, SpectrumStatus};

fn cosine_2d(levels: LevelRange, offset: Vec<f64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(Experiment::CosineS2);
    cfg.dim = 2;
    cfg.levels = levels;
    cfg.offset = offset;
    cfg
}

#[test]
fn repeated_runs_write_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = cosine_2d(LevelRange::new(0, 2), vec![0.01, -0.02]);
    cfg.threads = Some(1);
    cfg.output = dir.path().to_path_buf();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let (_, path) = run(&cfg).unwrap();
        outputs.push(std::fs::read(path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn shifting_the_grid_by_a_whole_cell_changes_nothing() {
    let level = 2;
    let base = cosine_2d(LevelRange::new(level, level), vec![0.013, 0.007]);
    let sigma = base.sigma(level);
    let shifted = cosine_2d(LevelRange::new(level, level), vec![0.013 + sigma, 0.007 - sigma]);
    let a = run_cosine::<2>(&base).unwrap().table;
    let b = run_cosine::<2>(&shifted).unwrap().table;
    for column in ["dofs", "cut_elements"] {
        assert_eq!(a.get(0, column), b.get(0, column));
    }
    let (ea, eb) = (a.column_f64("l2_error")[0], b.column_f64("l2_error")[0]);
    assert!((ea - eb).abs() <= 1e-9 * ea, "{ea} vs {eb}");
}

#[test]
fn zero_vorticity_gives_zero_velocity() {
    let mut cfg = ExperimentConfig::defaults(Experiment::Velocity);
    cfg.levels = LevelRange::new(0, 0);
    cfg.velocity.polar = 4;
    cfg.velocity.azimuthal = 8;
    let table = run_velocity(&cfg, &ZeroFlow).unwrap().table;
    assert_eq!(table.get(0, "status"), Some("ok"));
    assert_eq!(table.get(0, "iterations"), Some("0"));
    assert_eq!(table.column_f64("vorticity_l2")[0], 0.0);
    assert_eq!(table.column_f64("velocity_l2")[0], 0.0);
}

#[test]
fn empty_level_ranges_give_empty_tables() {
    for experiment in [Experiment::CosineS2, Experiment::Velocity, Experiment::Condition] {
        let mut cfg = ExperimentConfig::defaults(experiment);
        cfg.levels = LevelRange::new(2, 1);
        let outcome = pufem::experiments::dispatch(&cfg).unwrap();
        assert!(outcome.table.rows.is_empty());
        assert!(outcome.table.metadata.iter().any(|(k, _)| k == "config"));
    }
}

#[test]
fn thin_slivers_collapse_the_unstabilized_spectrum() {
    let cfg = ExperimentConfig::defaults(Experiment::Condition);
    let toolkit = Toolkit::<2>::new(&cfg).unwrap();
    let rule = product_gauss_rule::<2>(64, 8);
    let mut unstabilized = Vec::new();
    for shift in [0.06, 0.02, 0.005] {
        let gs = grid_space(&toolkit, 1, 0.25, [shift, shift], None).unwrap();
        let bundle = assemble(&toolkit, &gs.space, &rule, None, 0.0).unwrap();
        let bare = estimate_condition_with(&bundle, 200, 1);
        let stabilized = estimate_condition_with(&bundle.with_epsilon(1e-3).unwrap(), 200, 1);
        assert_eq!(stabilized.status, SpectrumStatus::PositiveDefinite);
        assert!(stabilized.lambda_min > 0.02, "{shift}: {}", stabilized.lambda_min);
        assert!(stabilized.condition < 200.0, "{shift}: {}", stabilized.condition);
        let floor = if bare.status == SpectrumStatus::PositiveDefinite { bare.lambda_min } else { 0.0 };
        assert!(floor < 1e-2 * stabilized.lambda_min, "{shift}: {floor}");
        unstabilized.push(floor);
    }
    assert!(unstabilized.windows(2).all(|w| w[1] < w[0]), "{unstabilized:?}");
}

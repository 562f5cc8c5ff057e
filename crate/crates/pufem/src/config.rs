//! Experiment configuration: JSON file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CosineS1,
    CosineS2,
    Velocity,
    Condition,
    OffsetSweep,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::CosineS1,
        Experiment::CosineS2,
        Experiment::Velocity,
        Experiment::Condition,
        Experiment::OffsetSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::CosineS1 => "cosine-s1",
            Experiment::CosineS2 => "cosine-s2",
            Experiment::Velocity => "velocity",
            Experiment::Condition => "condition",
            Experiment::OffsetSweep => "offset-sweep",
        }
    }

    /// Stem of the CSV written for this experiment.
    pub fn file_stem(self) -> &'static str {
        match self {
            Experiment::CosineS1 => "cosine_s1",
            Experiment::CosineS2 => "cosine_s2",
            Experiment::Velocity => "velocity",
            Experiment::Condition => "condition",
            Experiment::OffsetSweep => "offset_sweep",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| anyhow!("unknown experiment `{s}`"))
    }
}

/// Inclusive range of refinement levels written `a..b`. `b < a` is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LevelRange {
    pub first: u32,
    pub last: u32,
}

impl LevelRange {
    pub fn new(first: u32, last: u32) -> Self {
        Self { first, last }
    }

    pub fn levels(&self) -> impl Iterator<Item = u32> {
        self.first..=self.last
    }

    pub fn is_empty(&self) -> bool {
        self.last < self.first
    }
}

impl fmt::Display for LevelRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

impl FromStr for LevelRange {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let (a, b) = match s.split_once("..") {
            Some((a, b)) => (a, b),
            None => (s, s),
        };
        let parse = |t: &str| t.trim().parse::<u32>().with_context(|| format!("bad level `{t}` in `{s}`"));
        Ok(Self::new(parse(a)?, parse(b)?))
    }
}

impl TryFrom<String> for LevelRange {
    type Error = anyhow::Error;

    fn try_from(s: String) -> anyhow::Result<Self> {
        s.parse()
    }
}

impl From<LevelRange> for String {
    fn from(r: LevelRange) -> Self {
        r.to_string()
    }
}

/// Fully resolved parameters of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dim: usize,
    pub degree: u32,
    pub levels: LevelRange,
    /// Coupling exponent: `σ = C h^{1/s}`.
    pub s: u32,
    #[serde(rename = "C")]
    pub c: f64,
    pub epsilon: f64,
    /// Stabilization parameters of the condition study.
    pub epsilons: Vec<f64>,
    /// Absolute shift of the grid origin; empty means no shift.
    pub offset: Vec<f64>,
    /// Random offsets drawn by the offset sweep.
    pub offset_samples: usize,
    pub seed: u64,
    pub output: PathBuf,
    /// Worker threads; `None` lets rayon decide.
    pub threads: Option<usize>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub table_resolution: usize,
    pub reference_order: usize,
    /// Gauss exactness degree of the error rule on each particle cell.
    pub error_rule_degree: usize,
    pub lanczos_steps: usize,
    /// Biot–Savart exclusion radius as a multiple of `σ`.
    pub exclusion_factor: f64,
    pub velocity: VelocityResolution,
}

/// Discretization of the velocity evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VelocityResolution {
    /// Gauss panels per axis of the product rule on which velocity errors are measured.
    pub error_panels: usize,
    pub error_order: usize,
    pub polar: usize,
    pub azimuthal: usize,
    /// Radial panel length as a multiple of `σ`.
    pub radial_panel: f64,
    pub radial_order: usize,
}

impl Default for VelocityResolution {
    fn default() -> Self {
        Self {
            error_panels: 3,
            error_order: 4,
            polar: 24,
            azimuthal: 48,
            radial_panel: 0.5,
            radial_order: 6,
        }
    }
}

impl ExperimentConfig {
    /// Desk-scale defaults of each experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut cfg = Self {
            experiment,
            dim: 3,
            degree: 1,
            levels: LevelRange::new(0, 4),
            s: 2,
            c: 0.375,
            epsilon: pufem_core::assembly::DEFAULT_EPSILON,
            epsilons: vec![0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            offset: Vec::new(),
            offset_samples: 10,
            seed: 2024,
            output: PathBuf::from("results"),
            threads: None,
            tolerance: pufem_core::solver::DEFAULT_TOLERANCE,
            max_iterations: pufem_core::solver::DEFAULT_MAX_ITERATIONS,
            table_resolution: pufem_core::mollifier::DEFAULT_TABLE_RESOLUTION,
            reference_order: pufem_core::assembly::DEFAULT_REFERENCE_ORDER,
            error_rule_degree: 4,
            lanczos_steps: pufem_core::solver::DEFAULT_LANCZOS_STEPS,
            exclusion_factor: pufem_core::fields::DEFAULT_EXCLUSION_FACTOR,
            velocity: VelocityResolution::default(),
        };
        match experiment {
            Experiment::CosineS1 => {
                cfg.s = 1;
                cfg.c = 1.0;
            }
            Experiment::CosineS2 => {}
            Experiment::Velocity => cfg.levels = LevelRange::new(1, 3),
            Experiment::Condition => {
                cfg.c = 0.25;
                cfg.levels = LevelRange::new(1, 3);
            }
            Experiment::OffsetSweep => {
                cfg.levels = LevelRange::new(3, 3);
            }
        }
        cfg
    }

    /// `h = 2^{-l}`.
    pub fn mesh_width(level: u32) -> f64 {
        0.5f64.powi(level as i32)
    }

    /// `σ = C h^{1/s}`.
    pub fn sigma(&self, level: u32) -> f64 {
        self.c * Self::mesh_width(level).powf(1.0 / self.s as f64)
    }

    /// The grid origin shift padded to the dimension.
    pub fn origin<const D: usize>(&self) -> [f64; D] {
        std::array::from_fn(|k| self.offset.get(k).copied().unwrap_or(0.0))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.dim != 2 && self.dim != 3 {
            bail!("dim must be 2 or 3, got {}", self.dim);
        }
        if self.s != 1 && self.s != 2 {
            bail!("s must be 1 or 2, got {}", self.s);
        }
        if !(self.c > 0.0) {
            bail!("C must be positive");
        }
        if !(self.epsilon >= 0.0) || self.epsilons.iter().any(|e| !(*e >= 0.0)) {
            bail!("stabilization parameters must be non-negative");
        }
        if self.experiment == Experiment::Condition && self.epsilons.is_empty() {
            bail!("the condition study needs at least one epsilon");
        }
        if self.offset.len() > self.dim {
            bail!("offset has {} components for dimension {}", self.offset.len(), self.dim);
        }
        if self.experiment == Experiment::Velocity && self.dim != 3 {
            bail!("the velocity study is three-dimensional");
        }
        if self.threads == Some(0) {
            bail!("thread count must be positive");
        }
        Ok(())
    }
}

/// Optional fields of a configuration file; anything missing keeps the
/// experiment default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<Experiment>,
    pub dim: Option<usize>,
    pub degree: Option<u32>,
    pub levels: Option<LevelRange>,
    pub s: Option<u32>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub epsilon: Option<f64>,
    pub epsilons: Option<Vec<f64>>,
    pub offset: Option<Vec<f64>>,
    pub offset_samples: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub table_resolution: Option<usize>,
    pub reference_order: Option<usize>,
    pub error_rule_degree: Option<usize>,
    pub lanczos_steps: Option<usize>,
    pub exclusion_factor: Option<f64>,
    pub velocity: Option<VelocityResolution>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Resolves against the defaults of `experiment` (or the file's own experiment).
    pub fn resolve(self, experiment: Option<Experiment>) -> anyhow::Result<ExperimentConfig> {
        let experiment = experiment
            .or(self.experiment)
            .ok_or_else(|| anyhow!("no experiment given in the config or on the command line"))?;
        let mut cfg = ExperimentConfig::defaults(experiment);
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        take!(
            dim,
            degree,
            levels,
            s,
            c,
            epsilon,
            epsilons,
            offset,
            offset_samples,
            seed,
            output,
            tolerance,
            max_iterations,
            table_resolution,
            reference_order,
            error_rule_degree,
            lanczos_steps,
            exclusion_factor,
            velocity
        );
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        Ok(cfg)
    }
}

/// Parses `dx,dy(,dz)`.
pub fn parse_offset(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad offset component `{t}`")))
        .collect()
}

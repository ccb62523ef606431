//! Resolved run settings: defaults, then `--config`, then flags.

use std::path::{Path, PathBuf};

use afssen::experiment::{ExperimentConfig, DEFAULT_VARIANCE_TARGET};
use afssen::solver::WeightMode;
use afssen::{Grid, KernelFamily, KernelSpec, LSpec, NoiseMode, ScenarioSpec, SolverConfig};
use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Rough,
    Smooth,
}

/// Everything a command can read. Written verbatim to `resolved-config.json`;
/// passing that file back through `--config` reproduces the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub command: String,
    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub beta_star: Option<PathBuf>,
    pub out: PathBuf,

    pub kernel: KernelFamily,
    pub rho: f64,
    pub variance_target: f64,
    pub lspec: LSpec,

    pub lambda_k: Option<f64>,
    pub lambda_h: Option<f64>,
    pub solver: SolverConfig,
    pub folds: usize,
    pub weight_mode: WeightMode,
    pub seed: u64,

    pub scenario: Preset,
    pub n: Option<usize>,
    pub i: Option<usize>,
    pub i0: Option<usize>,
    pub m: Option<usize>,
    pub noise_mode: Option<NoiseMode>,
    pub replications: usize,
    /// Write per-replication wall-clock times to `timings.json`.
    pub timings: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            command: String::new(),
            x: None,
            y: None,
            weights: None,
            truth: None,
            beta_star: None,
            out: PathBuf::from("."),
            kernel: KernelFamily::Exponential,
            rho: 0.5,
            variance_target: DEFAULT_VARIANCE_TARGET,
            lspec: LSpec::Identity,
            lambda_k: None,
            lambda_h: None,
            solver: SolverConfig::default(),
            folds: 10,
            weight_mode: WeightMode::default(),
            seed: 0,
            scenario: Preset::Rough,
            n: None,
            i: None,
            i0: None,
            m: None,
            noise_mode: None,
            replications: 1,
            timings: false,
        }
    }
}

/// Flags shared by every command. Unset flags leave the config value alone.
#[derive(Clone, Debug, Default, Args)]
pub struct Flags {
    /// Design matrix, N × I CSV.
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Responses, N × m CSV (grid values).
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Adaptive weights, one per predictor; `inf` excludes a predictor.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// truth.json as written by `simulate`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// True coefficient functions, I × m CSV.
    #[arg(long)]
    pub beta_star: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Estimation kernel.
    #[arg(long, value_parser = parse_family)]
    pub kernel: Option<KernelFamily>,
    /// Kernel range parameter.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Fraction of kernel variance the truncated basis must explain.
    #[arg(long)]
    pub variance_target: Option<f64>,

    #[arg(long)]
    pub lambda_k: Option<f64>,
    #[arg(long)]
    pub lambda_h: Option<f64>,
    /// λ_K values searched by `path`, `cv` and `experiment`.
    #[arg(long, value_delimiter = ',')]
    pub lambda_k_grid: Option<Vec<f64>>,
    /// Number of λ_H values on the path.
    #[arg(long)]
    pub n_lambda_h: Option<usize>,
    /// Ratio of the smallest to the largest λ_H.
    #[arg(long)]
    pub r_lambda: Option<f64>,
    /// Stop a path once more than this many predictors are active.
    #[arg(long)]
    pub kill_switch: Option<usize>,
    /// Convergence tolerance on the sweep increment.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, value_enum)]
    pub weight_mode: Option<WeightModeArg>,
    #[arg(long)]
    pub seed: Option<u64>,

    /// Simulation preset.
    #[arg(long, value_enum)]
    pub scenario: Option<Preset>,
    /// Observations (overrides the preset).
    #[arg(long)]
    pub n: Option<usize>,
    /// Predictors (overrides the preset).
    #[arg(long)]
    pub i: Option<usize>,
    /// Significant predictors (overrides the preset).
    #[arg(long)]
    pub i0: Option<usize>,
    /// Grid size (overrides the preset).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_enum)]
    pub noise_mode: Option<NoiseModeArg>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// `experiment`: also write timings.json (not reproducible).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WeightModeArg {
    NonadaptiveH,
    NonadaptiveK,
    Unit,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NoiseModeArg {
    Gaussian,
    BoundedSubgaussian,
}

fn parse_family(s: &str) -> std::result::Result<KernelFamily, String> {
    s.parse::<KernelFamily>().map_err(|e| e.to_string())
}

impl Settings {
    pub fn resolve(command: &str, config: Option<&Path>, flags: &Flags) -> Result<Self> {
        let mut s = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
            }
            None => Settings::default(),
        };
        s.command = command.to_string();
        let f = flags.clone();
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = f.$field { s.$field = Some(v); } )* };
        }
        take!(x, y, weights, truth, beta_star, lambda_k, lambda_h, n, i, i0, m);
        if let Some(v) = f.out {
            s.out = v;
        }
        if let Some(v) = f.kernel {
            s.kernel = v;
        }
        if let Some(v) = f.rho {
            s.rho = v;
        }
        if let Some(v) = f.variance_target {
            s.variance_target = v;
        }
        if let Some(v) = f.lambda_k_grid {
            s.solver.lambda_k_grid = v;
        }
        if let Some(v) = f.n_lambda_h {
            s.solver.n_lambda_h = v;
        }
        if let Some(v) = f.r_lambda {
            s.solver.r_lambda = v;
        }
        if let Some(v) = f.kill_switch {
            s.solver.kill_switch = Some(v);
        }
        if let Some(v) = f.threshold {
            s.solver.threshold = v;
        }
        if let Some(v) = f.max_iter {
            s.solver.max_iter = v;
        }
        if let Some(v) = f.folds {
            s.folds = v;
        }
        if let Some(v) = f.weight_mode {
            s.weight_mode = match v {
                WeightModeArg::NonadaptiveH => WeightMode::NonadaptiveH,
                WeightModeArg::NonadaptiveK => WeightMode::NonadaptiveK,
                WeightModeArg::Unit => WeightMode::Unit,
            };
        }
        if let Some(v) = f.seed {
            s.seed = v;
        }
        if let Some(v) = f.scenario {
            s.scenario = v;
        }
        if let Some(v) = f.noise_mode {
            s.noise_mode = Some(match v {
                NoiseModeArg::Gaussian => NoiseMode::Gaussian,
                NoiseModeArg::BoundedSubgaussian => NoiseMode::BoundedSubgaussian,
            });
        }
        if let Some(v) = f.replications {
            s.replications = v;
        }
        if f.timings {
            s.timings = true;
        }
        s.solver.validate()?;
        Ok(s)
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        Ok(KernelSpec::new(self.kernel, self.rho)?)
    }

    pub fn scenario_spec(&self) -> Result<ScenarioSpec> {
        let base = match self.scenario {
            Preset::Rough => ScenarioSpec::rough(self.seed),
            Preset::Smooth => ScenarioSpec::smooth(self.seed),
        };
        let mut spec = base.clone().with_size(
            self.n.unwrap_or(base.n),
            self.i.unwrap_or(base.i),
            self.i0.unwrap_or(base.i0),
        );
        if let Some(m) = self.m {
            spec.grid = Grid::new(m)?;
        }
        if let Some(mode) = self.noise_mode {
            spec.noise_mode = mode;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            scenario: self.scenario_spec()?,
            estimation_kernel: self.kernel_spec()?,
            lspec: self.lspec.clone(),
            variance_target: self.variance_target,
            solver: self.solver.clone(),
            folds: self.folds,
            weight_mode: self.weight_mode,
            replications: self.replications,
            seed: self.seed,
        })
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        match path {
            Some(p) => Ok(p),
            None => bail!("`{}` needs --{flag}", self.command),
        }
    }
}

//! Replicated simulation runs: generate, fit with cross-validation, score
//! against the truth.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AfssenError, Result};
use crate::evalcv::{evaluate, Metrics};
use crate::kernels::{build_basis, KernelFamily, KernelSpec, LSpec};
use crate::oracle::{oracle_distance, oracle_estimate};
use crate::simulate::{generate, ScenarioSpec};
use crate::solver::{fit_afssen, CoefSet, CoordData, SolverConfig, WeightMode};

pub const DEFAULT_VARIANCE_TARGET: f64 = 0.99;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    pub estimation_kernel: KernelSpec,
    pub lspec: LSpec,
    pub variance_target: f64,
    pub solver: SolverConfig,
    pub folds: usize,
    pub weight_mode: WeightMode,
    pub replications: usize,
    /// Replication `r` (1-based) uses scenario seed `seed + r`; folds use the same seed.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioSpec::rough(0),
            estimation_kernel: KernelSpec {
                family: KernelFamily::Exponential,
                rho: 0.5,
                sigma2: 1.0,
            },
            lspec: LSpec::Identity,
            variance_target: DEFAULT_VARIANCE_TARGET,
            solver: SolverConfig::default(),
            folds: 10,
            weight_mode: WeightMode::default(),
            replications: 1,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.estimation_kernel.validate()?;
        self.solver.validate()?;
        if self.replications == 0 {
            return Err(AfssenError::InvalidParameter("replications must be positive".into()));
        }
        if self.folds < 2 || self.folds > self.scenario.n {
            return Err(AfssenError::InvalidParameter(format!(
                "fold count must lie in [2, N = {}], got {}",
                self.scenario.n, self.folds
            )));
        }
        Ok(())
    }

    /// The solver configuration with the kill switch defaulted to `2·I₀`.
    pub fn resolved_solver(&self) -> SolverConfig {
        let mut cfg = self.solver.clone();
        if cfg.kill_switch.is_none() && self.scenario.i0 > 0 {
            cfg.kill_switch = Some(2 * self.scenario.i0);
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub replication: usize,
    pub seed: u64,
    pub metrics: Option<Metrics>,
    pub lambda_k: Option<f64>,
    pub lambda_h: Option<f64>,
    pub active: Vec<usize>,
    pub stage1_active: Vec<usize>,
    pub stage1_empty: bool,
    /// Distances to the fixed-support estimate at the selected `λ_K`.
    pub oracle_h: Option<f64>,
    pub oracle_k: Option<f64>,
    pub support_mismatch: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// Sample statistics; `sd` uses the `n − 1` divisor and is 0 for a single value.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        Some(Self {
            mean,
            sd,
            median,
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub successes: usize,
    pub failures: usize,
    pub pred_error: Option<Summary>,
    pub deriv_error: Option<Summary>,
    pub tp: Option<Summary>,
    pub fp: Option<Summary>,
    pub oracle_h: Option<Summary>,
    pub oracle_k: Option<Summary>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub basis_size: usize,
    pub replications: Vec<Replication>,
    pub aggregates: Aggregates,
    /// Wall-clock seconds per replication. Kept out of the serialized report
    /// so that report bytes depend only on the configuration.
    #[serde(skip)]
    pub seconds: Vec<f64>,
}

impl ExperimentReport {
    /// One line per replication, with a header.
    pub fn replication_csv(&self) -> String {
        let mut out = String::from(
            "replication,seed,pred_error,deriv_error,tp,fp,lambda_k,lambda_h,oracle_h,oracle_k,support_mismatch,stage1_empty,error\n",
        );
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.replications {
            let m = r.metrics.as_ref();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.replication,
                r.seed,
                opt(m.map(|m| m.pred_error)),
                opt(m.map(|m| m.deriv_error)),
                m.map(|m| m.tp.to_string()).unwrap_or_default(),
                m.map(|m| m.fp.to_string()).unwrap_or_default(),
                opt(r.lambda_k),
                opt(r.lambda_h),
                opt(r.oracle_h),
                opt(r.oracle_k),
                r.support_mismatch.map(|b| b.to_string()).unwrap_or_default(),
                r.stage1_empty,
                r.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
            ));
        }
        out
    }
}

fn aggregate(reps: &[Replication]) -> Aggregates {
    let ok: Vec<&Metrics> = reps.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let pick = |f: &dyn Fn(&Metrics) -> f64| Summary::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
    let dist = |f: &dyn Fn(&Replication) -> Option<f64>| {
        Summary::of(&reps.iter().filter_map(f).collect::<Vec<_>>())
    };
    Aggregates {
        successes: ok.len(),
        failures: reps.len() - ok.len(),
        pred_error: pick(&|m| m.pred_error),
        deriv_error: pick(&|m| m.deriv_error),
        tp: pick(&|m| m.tp as f64),
        fp: pick(&|m| m.fp as f64),
        oracle_h: dist(&|r| r.oracle_h),
        oracle_k: dist(&|r| r.oracle_k),
    }
}

fn replicate(config: &ExperimentConfig, solver: &SolverConfig, r: usize) -> Replication {
    let seed = config.seed.wrapping_add(r as u64);
    let mut rep = Replication {
        replication: r,
        seed,
        metrics: None,
        lambda_k: None,
        lambda_h: None,
        active: Vec::new(),
        stage1_active: Vec::new(),
        stage1_empty: false,
        oracle_h: None,
        oracle_k: None,
        support_mismatch: None,
        error: None,
    };
    if let Err(e) = run_one(config, solver, seed, &mut rep) {
        log::warn!("replication {r} failed: {e}");
        rep.error = Some(e.to_string());
    }
    rep
}

fn run_one(config: &ExperimentConfig, solver: &SolverConfig, seed: u64, rep: &mut Replication) -> Result<()> {
    let scenario = ScenarioSpec {
        seed,
        ..config.scenario.clone()
    };
    let data = generate(&scenario)?;
    let truth = data.truth.as_ref().ok_or(AfssenError::MissingTruth)?;
    let basis = build_basis(&config.estimation_kernel, &config.lspec, data.grid, config.variance_target)?;
    let coords = CoordData::from_dataset(&data, &basis)?;
    let truth_coefs = CoefSet::from_functions(&truth.beta_star, &basis)?;
    let res = fit_afssen(&coords, &basis, solver, config.weight_mode, config.folds, seed)?;
    let sel = res.selected();
    rep.lambda_k = Some(sel.lambda_k);
    rep.lambda_h = Some(sel.lambda_h);
    rep.active = sel.fit.coefs.active_vec();
    rep.stage1_active = res.stage1.fit.coefs.active_vec();
    rep.stage1_empty = res.stage1_empty;
    if !truth.support.is_empty() {
        let oracle = oracle_estimate(&coords, &truth.support, &basis, sel.lambda_k)?;
        let d = oracle_distance(&sel.fit.coefs, &oracle, &basis)?;
        rep.oracle_h = Some(d.h);
        rep.oracle_k = Some(d.k);
        rep.support_mismatch = Some(d.support_mismatch);
    }
    rep.metrics = Some(evaluate(
        &sel.fit.coefs,
        Some((&truth_coefs, &truth.support)),
        &data.x,
        &basis,
    )?);
    Ok(())
}

/// Runs replications `1..=R` concurrently and aggregates the successes.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let basis = build_basis(
        &config.estimation_kernel,
        &config.lspec,
        config.scenario.grid,
        config.variance_target,
    )?;
    let solver = config.resolved_solver();
    let timed: Vec<(Replication, f64)> = (1..=config.replications)
        .into_par_iter()
        .map(|r| {
            let start = Instant::now();
            let rep = replicate(config, &solver, r);
            (rep, start.elapsed().as_secs_f64())
        })
        .collect();
    let (replications, seconds): (Vec<_>, Vec<_>) = timed.into_iter().unzip();
    Ok(ExperimentReport {
        config: config.clone(),
        basis_size: basis.len(),
        aggregates: aggregate(&replications),
        replications,
        seconds,
    })
}

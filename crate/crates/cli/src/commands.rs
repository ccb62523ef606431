use std::path::Path;

use afssen::evalcv::{evaluate, CVResult, Metrics};
use afssen::experiment::run_experiment;
use afssen::fnspace::reconstruct_rows;
use afssen::io::{load_matrix, load_vector, read_json, store_matrix, write_json};
use afssen::kernels::build_basis;
use afssen::oracle::diagnose;
use afssen::simulate::generate;
use afssen::solver::adaptive::select_and_refit;
use afssen::solver::{fit, fit_afssen, fit_path, FitResult, PenaltyConfig, WeightMode};
use afssen::{CoefSet, CoordData, Dataset, Grid, KernelBasis, ScenarioSpec, SolverConfig};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::settings::Settings;

/// Contents of `truth.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct TruthFile {
    /// Zero-based indices of the significant predictors.
    pub support: Vec<usize>,
    #[serde(default)]
    pub scenario: Option<ScenarioSpec>,
}

#[derive(Serialize)]
struct FitSummary<'a> {
    lambda_k: f64,
    lambda_h: f64,
    basis_size: usize,
    active: Vec<usize>,
    objective: f64,
    iterations: usize,
    converged: bool,
    killed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<&'a [f64]>,
}

struct Problem {
    data: Dataset,
    coords: CoordData,
    basis: KernelBasis,
    truth: Option<TruthFile>,
    beta_star: Option<CoefSet>,
}

fn load_problem(s: &Settings) -> Result<Problem> {
    let x = load_matrix(s.require(&s.x, "x")?)?;
    let y = load_matrix(s.require(&s.y, "y")?)?;
    let grid = Grid::new(y.ncols()).context("response grid")?;
    let data = Dataset::new(grid, x, y, None)?;
    let basis = build_basis(&s.kernel_spec()?, &s.lspec, grid, s.variance_target)?;
    let coords = CoordData::from_dataset(&data, &basis)?;
    let truth = match &s.truth {
        Some(p) => Some(read_json::<TruthFile>(p)?),
        None => None,
    };
    let beta_star = match &s.beta_star {
        Some(p) => {
            let b = load_matrix(p)?;
            if b.nrows() != data.predictors() {
                bail!("beta_star has {} rows, the design has {} columns", b.nrows(), data.predictors());
            }
            Some(CoefSet::from_functions(&b, &basis)?)
        }
        None => None,
    };
    Ok(Problem {
        data,
        coords,
        basis,
        truth,
        beta_star,
    })
}

fn weights(s: &Settings, predictors: usize) -> Result<Option<Vec<f64>>> {
    let Some(path) = &s.weights else {
        return Ok(None);
    };
    let w = load_vector(path)?;
    if w.len() != predictors {
        bail!("{} weights for {predictors} predictors", w.len());
    }
    Ok(Some(w))
}

/// Kill switch defaults to twice the true support size when the truth is known.
fn solver_config(s: &Settings, truth: Option<&TruthFile>) -> SolverConfig {
    let mut cfg = s.solver.clone();
    if cfg.kill_switch.is_none() {
        if let Some(t) = truth.filter(|t| !t.support.is_empty()) {
            cfg.kill_switch = Some(2 * t.support.len());
        }
    }
    cfg
}

fn write_fit(out: &Path, p: &Problem, lambda_k: f64, lambda_h: f64, res: &FitResult, w: Option<&[f64]>) -> Result<()> {
    store_matrix(&out.join("beta_hat.csv"), &reconstruct_rows(res.coefs.matrix(), &p.basis)?)?;
    write_json(
        &out.join("fit.json"),
        &FitSummary {
            lambda_k,
            lambda_h,
            basis_size: p.basis.len(),
            active: res.coefs.active_vec(),
            objective: res.objective,
            iterations: res.iterations,
            converged: res.converged,
            killed: res.killed,
            weights: w,
        },
    )?;
    write_metrics(out, p, &res.coefs)
}

fn write_metrics(out: &Path, p: &Problem, coefs: &CoefSet) -> Result<()> {
    if let (Some(truth), Some(beta)) = (&p.truth, &p.beta_star) {
        let m: Metrics = evaluate(coefs, Some((beta, &truth.support)), &p.data.x, &p.basis)?;
        write_json(&out.join("metrics.json"), &m)?;
    }
    Ok(())
}

pub fn simulate(s: &Settings) -> Result<()> {
    let spec = s.scenario_spec()?;
    let data = generate(&spec)?;
    let truth = data.truth.as_ref().expect("simulated data carry the truth");
    store_matrix(&s.out.join("x.csv"), &data.x)?;
    store_matrix(&s.out.join("y.csv"), &data.y)?;
    store_matrix(&s.out.join("beta_star.csv"), &truth.beta_star)?;
    write_json(
        &s.out.join("truth.json"),
        &TruthFile {
            support: truth.support.clone(),
            scenario: Some(spec),
        },
    )?;
    Ok(())
}

pub fn fit_cmd(s: &Settings) -> Result<()> {
    let p = load_problem(s)?;
    let (Some(lambda_k), Some(lambda_h)) = (s.lambda_k, s.lambda_h) else {
        bail!("`fit` needs --lambda-k and --lambda-h");
    };
    let w = weights(s, p.data.predictors())?;
    let pen = PenaltyConfig {
        lambda_k,
        lambda_h,
        weights: w.clone().unwrap_or_else(|| vec![1.0; p.data.predictors()]),
    };
    let cfg = solver_config(s, p.truth.as_ref());
    let res = fit(&p.coords, &p.basis, &pen, &cfg, None)?;
    write_fit(&s.out, &p, lambda_k, lambda_h, &res, w.as_deref())
}

pub fn path(s: &Settings) -> Result<()> {
    let p = load_problem(s)?;
    let w = weights(s, p.data.predictors())?;
    let mut cfg = solver_config(s, p.truth.as_ref());
    if let Some(lk) = s.lambda_k {
        cfg.lambda_k_grid = vec![lk];
    }
    let unit = vec![1.0; p.data.predictors()];
    let res = fit_path(&p.coords, &p.basis, w.as_deref().unwrap_or(&unit), &cfg)?;
    write_json(&s.out.join("path.json"), &res.summaries())?;
    // the last point reached on the first λ_K path
    if let Some(pt) = res.paths.first().and_then(|lk| lk.points.last().map(|pt| (lk.lambda_k, pt))) {
        write_fit(&s.out, &p, pt.0, pt.1.lambda_h, &pt.1.fit, w.as_deref())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CvReport<'a> {
    weight_mode: Option<WeightMode>,
    stage1: &'a CVResult,
    stage2: Option<&'a CVResult>,
    stage2_weights: Option<&'a [f64]>,
    stage1_empty: bool,
    selected_lambda_k: f64,
    selected_lambda_h: f64,
}

pub fn cv(s: &Settings) -> Result<()> {
    let p = load_problem(s)?;
    let cfg = solver_config(s, p.truth.as_ref());
    if let Some(w) = weights(s, p.data.predictors())? {
        // fixed weights: one cross-validated stage
        let sel = select_and_refit(&p.coords, &p.basis, &w, &cfg, s.folds, s.seed)?;
        write_json(
            &s.out.join("cv.json"),
            &CvReport {
                weight_mode: None,
                stage1: &sel.cv,
                stage2: None,
                stage2_weights: None,
                stage1_empty: false,
                selected_lambda_k: sel.lambda_k,
                selected_lambda_h: sel.lambda_h,
            },
        )?;
        return write_fit(&s.out, &p, sel.lambda_k, sel.lambda_h, &sel.fit, Some(&w));
    }
    let res = fit_afssen(&p.coords, &p.basis, &cfg, s.weight_mode, s.folds, s.seed)?;
    let sel = res.selected();
    write_json(
        &s.out.join("cv.json"),
        &CvReport {
            weight_mode: Some(s.weight_mode),
            stage1: &res.stage1.cv,
            stage2: res.stage2.as_ref().map(|r| &r.cv),
            stage2_weights: res.stage2.as_ref().map(|_| res.weights.as_slice()),
            stage1_empty: res.stage1_empty,
            selected_lambda_k: sel.lambda_k,
            selected_lambda_h: sel.lambda_h,
        },
    )?;
    write_fit(&s.out, &p, sel.lambda_k, sel.lambda_h, &sel.fit, None)
}

pub fn diagnose_cmd(s: &Settings) -> Result<()> {
    let x = load_matrix(s.require(&s.x, "x")?)?;
    let truth: TruthFile = read_json(s.require(&s.truth, "truth")?)?;
    let beta = match &s.beta_star {
        Some(path) => Some(load_matrix(path)?),
        None => None,
    };
    let m = match (&beta, s.m, &truth.scenario) {
        (Some(b), _, _) => b.ncols(),
        (None, Some(m), _) => m,
        (None, None, Some(sc)) => sc.grid.m(),
        (None, None, None) => 50,
    };
    let basis = build_basis(&s.kernel_spec()?, &s.lspec, Grid::new(m)?, s.variance_target)?;
    let beta_star = match beta {
        Some(b) => {
            if b.nrows() != x.ncols() {
                bail!("beta_star has {} rows, the design has {} columns", b.nrows(), x.ncols());
            }
            Some(CoefSet::from_functions(&b, &basis)?)
        }
        None => None,
    };
    let d = diagnose(&x, &truth.support, beta_star.as_ref(), &basis)?;
    write_json(&s.out.join("diagnostics.json"), &d)?;
    Ok(())
}

#[derive(Serialize)]
struct Timings {
    seconds: Vec<f64>,
    total: f64,
}

pub fn experiment(s: &Settings) -> Result<()> {
    let cfg = s.experiment_config()?;
    let report = run_experiment(&cfg)?;
    write_json(&s.out.join("report.json"), &report)?;
    std::fs::write(s.out.join("replications.csv"), report.replication_csv())?;
    if s.timings {
        write_json(
            &s.out.join("timings.json"),
            &Timings {
                total: report.seconds.iter().sum(),
                seconds: report.seconds.clone(),
            },
        )?;
    }
    let a = &report.aggregates;
    log::info!(
        "{} replications ({} failed); mean tp {:?}, mean fp {:?}",
        a.successes + a.failures,
        a.failures,
        a.tp.as_ref().map(|t| t.mean),
        a.fp.as_ref().map(|t| t.mean)
    );
    Ok(())
}

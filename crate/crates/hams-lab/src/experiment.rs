//! Experiment orchestration: dataset simulation, optional whitening,
//! step-size tuning, parallel repetitions on per-repetition streams, and
//! artifact emission (chain CSVs, per-coordinate ESS table, summary JSON).

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

use hams_core::diagnostics::{
    density_bin_error_with_truth, density_bin_truth, ess_bartlett, rmse_over_reps, temperatures,
    ChainRecord,
};
use hams_core::hams::PhaseState;
use hams_core::precondition::{whiten, whitener_from_precision, Whitener};
use hams_core::rng::{RngStream, DATA_STREAM};
use hams_core::targets::{
    dataset_to_csv, simulate_cox, simulate_sv, CoxModel, DoubleWellTarget, GaussianTarget,
    PreconditionedModel, SvModel, TargetModel,
};

use crate::config::{Epsilon, RunConfig, TargetSpec, WriteChains};
use crate::sampler::{autotune_chain, build_kernel};

/// Fixed parameters of the latent-variable experiments.
pub const SV_BETA: f64 = 0.65;
pub const SV_SIGMA: f64 = 0.15;
pub const SV_VARPHI: f64 = 0.98;
pub const COX_SIGMA2: f64 = 1.91;
pub const COX_BETA: f64 = 1.0 / 33.0;

pub fn cox_mu() -> f64 {
    (126.0f64).ln() - 0.955
}

/// Bartlett cutoff for the windowed estimator.
pub const ESS_CUTOFF: usize = 3000;

/// Per-repetition results retained after the chain itself is dropped.
#[derive(Debug, Clone)]
pub struct RepStats {
    /// The repetition's (possibly tuned) step size.
    pub epsilon: f64,
    pub acceptance: f64,
    /// Windowed ESS per coordinate.
    pub ess1: Vec<f64>,
    /// Per-coordinate chain mean (for the across-repetition estimator).
    pub chain_mean: Vec<f64>,
    /// Per-coordinate sum of squared deviations from the chain mean.
    pub chain_m2: Vec<f64>,
    pub t_c1: Option<f64>,
    pub t_c2: Option<f64>,
    pub t_k: Option<f64>,
    pub density_error: Option<f64>,
}

impl RepStats {
    pub fn min_ess1(&self) -> f64 {
        self.ess1.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub sampler: String,
    pub target: String,
    pub epsilon: f64,
    pub acceptance: f64,
    pub ess1_min: f64,
    pub ess1_med: f64,
    pub ess1_max: f64,
    pub ess2_min: Option<f64>,
    pub time_seconds: f64,
    pub t_c1: Option<f64>,
    pub t_c2: Option<f64>,
    pub t_k: Option<f64>,
    pub density_error: Option<f64>,
    pub rmse_t_c1: Option<f64>,
    pub rmse_t_c2: Option<f64>,
    pub rmse_t_k: Option<f64>,
    pub rmse_density: Option<f64>,
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub summary: Summary,
    pub reps: Vec<RepStats>,
}

enum BuiltTarget {
    DoubleWell(DoubleWellTarget),
    Gaussian(GaussianTarget),
    Sv(Box<SvModel>),
    Cox(Box<CoxModel>),
}

impl BuiltTarget {
    fn model(&self) -> &dyn TargetModel {
        match self {
            BuiltTarget::DoubleWell(t) => t,
            BuiltTarget::Gaussian(t) => t,
            BuiltTarget::Sv(t) => t.as_ref(),
            BuiltTarget::Cox(t) => t.as_ref(),
        }
    }

    fn preconditionable(&self) -> Option<&dyn PreconditionedModel> {
        match self {
            BuiltTarget::Sv(t) => Some(t.as_ref()),
            BuiltTarget::Cox(t) => Some(t.as_ref()),
            _ => None,
        }
    }
}

fn build_target(config: &RunConfig, out_dataset: &mut Option<String>) -> Result<BuiltTarget> {
    Ok(match config.target {
        TargetSpec::DoubleWell { temperature } => {
            BuiltTarget::DoubleWell(DoubleWellTarget::new(temperature)?)
        }
        TargetSpec::Gaussian { gamma, dim } => {
            BuiltTarget::Gaussian(GaussianTarget::new(gamma, dim)?)
        }
        TargetSpec::Sv { t_len } => {
            let mut rng = RngStream::new(config.seed, DATA_STREAM);
            let (x_true, y) = simulate_sv(t_len, SV_BETA, SV_SIGMA, SV_VARPHI, &mut rng)?;
            *out_dataset = Some(dataset_to_csv(&x_true, &y));
            BuiltTarget::Sv(Box::new(SvModel::new(SV_BETA, SV_SIGMA, SV_VARPHI, y)?))
        }
        TargetSpec::Cox { m } => {
            let mut rng = RngStream::new(config.seed, DATA_STREAM);
            let (x_true, y) = simulate_cox(m, COX_SIGMA2, COX_BETA, cox_mu(), &mut rng)?;
            *out_dataset = Some(dataset_to_csv(&x_true, &y));
            BuiltTarget::Cox(Box::new(CoxModel::new(m, COX_SIGMA2, COX_BETA, cox_mu(), y)?))
        }
    })
}

fn initial_phase(config: &RunConfig, dim: usize, rng: &mut RngStream) -> Result<PhaseState> {
    let (x, u): (Vec<f64>, Vec<f64>) = match config.target {
        // Position and momentum start uniform on [-1, 1].
        TargetSpec::DoubleWell { .. } => (
            (0..dim).map(|_| 2.0 * rng.uniform() - 1.0).collect(),
            (0..dim).map(|_| 2.0 * rng.uniform() - 1.0).collect(),
        ),
        TargetSpec::Gaussian { gamma, .. } => (
            (0..dim).map(|_| rng.normal() / gamma.sqrt()).collect(),
            (0..dim).map(|_| rng.normal()).collect(),
        ),
        // Latent variables start standard normal.
        _ => (
            (0..dim).map(|_| rng.normal()).collect(),
            (0..dim).map(|_| rng.normal()).collect(),
        ),
    };
    Ok(PhaseState::new(x, u)?)
}

struct RepOutput {
    stats: RepStats,
    chain_csv: Option<String>,
}

#[allow(clippy::too_many_arguments)]
fn run_rep(
    config: &RunConfig,
    model: &dyn TargetModel,
    whitener: Option<&Whitener>,
    density_truth: Option<&[f64; 16]>,
    rep: usize,
    record_momenta: bool,
    keep_chain: bool,
) -> Result<RepOutput> {
    let dim = model.dim();
    let mut rng = RngStream::new(config.seed, rep as u64);
    let phase = initial_phase(config, dim, &mut rng)?;
    // Chains run in whitened coordinates when a whitener is present.
    let phase = match whitener {
        Some(w) => PhaseState::new(w.to_whitened(&phase.x), phase.u)?,
        None => phase,
    };
    // With a fixed step size the burn-in is plain; in auto mode the burn-in
    // doubles as the adaptation window and the step size freezes at its end.
    let (epsilon, kernel, mut state) = match config.epsilon {
        Epsilon::Fixed(e) => {
            let kernel = build_kernel(config.sampler, e, config.eta, config.precondition)?;
            let mut state = kernel.init_state(model, phase)?;
            for _ in 0..config.n_burn {
                kernel.step(model, &mut state, &mut rng)?;
            }
            (e, kernel, state)
        }
        Epsilon::Auto => {
            let tuned = autotune_chain(
                config.sampler,
                config.eta,
                config.precondition,
                model,
                phase,
                0.7,
                config.n_burn.max(2000),
                &mut rng,
            )?;
            (tuned.epsilon, tuned.kernel, tuned.state)
        }
    };

    let mut record = ChainRecord::with_capacity(config.n_draws);
    if !record_momenta {
        record.momenta = None;
    }
    let mut accepted_count = 0usize;
    for _ in 0..config.n_draws {
        let (accepted, delta_g) = kernel.step(model, &mut state, &mut rng)?;
        accepted_count += usize::from(accepted);
        let phase = state.phase();
        let x = match whitener {
            Some(w) => w.from_whitened(&phase.x),
            None => phase.x.clone(),
        };
        record.draws.push(x);
        if let Some(us) = record.momenta.as_mut() {
            us.push(phase.u.clone());
        }
        record.accepted.push(accepted);
        record.delta_g.push(delta_g);
    }

    let n = config.n_draws as f64;
    let mut ess1 = Vec::with_capacity(dim);
    let mut chain_mean = Vec::with_capacity(dim);
    let mut chain_m2 = Vec::with_capacity(dim);
    let mut series = vec![0.0; config.n_draws];
    for j in 0..dim {
        for (i, row) in record.draws.iter().enumerate() {
            series[i] = row[j];
        }
        if config.compute_ess {
            ess1.push(ess_bartlett(&series, ESS_CUTOFF.min(config.n_draws - 1))?);
        } else {
            ess1.push(f64::NAN);
        }
        let mean = series.iter().sum::<f64>() / n;
        chain_mean.push(mean);
        chain_m2.push(series.iter().map(|v| (v - mean) * (v - mean)).sum());
    }

    let (mut t_c1, mut t_c2, mut t_k, mut density_error) = (None, None, None, None);
    if matches!(config.target, TargetSpec::DoubleWell { .. }) {
        let xs: Vec<f64> = record.draws.iter().map(|r| r[0]).collect();
        let us: Vec<f64> = record.momenta.as_ref().map_or_else(Vec::new, |m| {
            m.iter().map(|r| r[0]).collect()
        });
        let (c1, c2, k) = temperatures(&xs, &us, model)?;
        t_c1 = Some(c1);
        t_c2 = Some(c2);
        t_k = Some(k);
        if let Some(truth) = density_truth {
            density_error = Some(density_bin_error_with_truth(&xs, truth));
        }
    }

    Ok(RepOutput {
        stats: RepStats {
            epsilon,
            acceptance: accepted_count as f64 / n,
            ess1,
            chain_mean,
            chain_m2,
            t_c1,
            t_c2,
            t_k,
            density_error,
        },
        chain_csv: keep_chain.then(|| record.to_csv()),
    })
}

fn median(sorted: &mut [f64]) -> f64 {
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Across-repetition ESS per coordinate, from the per-repetition means and
/// within-chain sums of squares.
pub fn ess2_per_coordinate(reps: &[RepStats], n_draws: usize) -> Option<Vec<f64>> {
    let m = reps.len();
    if m < 2 {
        return None;
    }
    let dim = reps[0].chain_mean.len();
    let nf = n_draws as f64;
    let mf = m as f64;
    let mut out = Vec::with_capacity(dim);
    for j in 0..dim {
        let grand = reps.iter().map(|r| r.chain_mean[j]).sum::<f64>() / mf;
        let w = reps.iter().map(|r| r.chain_m2[j]).sum::<f64>() / (mf * (nf - 1.0));
        let b = nf
            * reps
                .iter()
                .map(|r| (r.chain_mean[j] - grand).powi(2))
                .sum::<f64>()
            / (mf - 1.0);
        out.push(if b < 1e-300 { f64::INFINITY } else { nf * w / b });
    }
    Some(out)
}

/// Runs one experiment: simulate (or build) the target, optionally whiten,
/// resolve the step size, execute the repetitions in a parallel pool (each
/// owning stream id = repetition index), and aggregate.
///
/// Artifacts under `out_dir` (when set): `summary.json`, `dataset.csv` for
/// simulated targets, `ess_per_coordinate.csv`, and `chain_rNNN.csv`
/// according to the `write_chains` policy.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let start = Instant::now();
    let mut dataset_csv = None;
    let target = build_target(config, &mut dataset_csv)?;
    let model = target.model();

    let whitener = if config.precondition {
        let pre = target
            .preconditionable()
            .context("target has no preconditioner")?;
        Some(whitener_from_precision(&pre.approx_precision())?)
    } else {
        None
    };

    // A boxed whitened view keeps one code path for both cases.
    let whitened_model;
    let run_model: &dyn TargetModel = match &whitener {
        Some(w) => {
            whitened_model = whiten(model, w);
            &whitened_model
        }
        None => model,
    };

    let record_momenta = matches!(config.target, TargetSpec::DoubleWell { .. });
    let density_truth = record_momenta.then(|| density_bin_truth(model));

    let outputs: Vec<Result<RepOutput>> = (0..config.n_reps)
        .into_par_iter()
        .map(|rep| {
            let keep_chain = config.out_dir.is_some()
                && match config.write_chains {
                    WriteChains::All => true,
                    WriteChains::First => rep == 0,
                    WriteChains::None => false,
                };
            run_rep(
                config,
                run_model,
                whitener.as_ref(),
                density_truth.as_ref(),
                rep,
                record_momenta,
                keep_chain,
            )
        })
        .collect();

    let mut reps = Vec::with_capacity(config.n_reps);
    let mut chains = Vec::new();
    for (rep, out) in outputs.into_iter().enumerate() {
        let out = out.with_context(|| format!("repetition {rep}"))?;
        if let Some(csv) = out.chain_csv {
            chains.push((rep, csv));
        }
        reps.push(out.stats);
    }

    // Aggregation, single-threaded after the join.
    let mf = reps.len() as f64;
    let epsilon = reps.iter().map(|r| r.epsilon).sum::<f64>() / mf;
    let acceptance = reps.iter().map(|r| r.acceptance).sum::<f64>() / mf;
    let mut mins = Vec::new();
    let mut meds = Vec::new();
    let mut maxs = Vec::new();
    for r in &reps {
        let mut e = r.ess1.clone();
        e.sort_by(f64::total_cmp);
        mins.push(e[0]);
        maxs.push(*e.last().unwrap());
        meds.push(median(&mut e));
    }
    let ess2 = ess2_per_coordinate(&reps, config.n_draws);
    let ess2_min = ess2
        .as_ref()
        .map(|v| v.iter().copied().fold(f64::INFINITY, f64::min));

    let mean_of = |f: &dyn Fn(&RepStats) -> Option<f64>| -> Option<f64> {
        let vals: Vec<f64> = reps.iter().filter_map(f).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let rmse_of = |f: &dyn Fn(&RepStats) -> Option<f64>, truth: f64| -> Option<f64> {
        let vals: Vec<f64> = reps.iter().filter_map(f).collect();
        (!vals.is_empty()).then(|| rmse_over_reps(&vals, truth))
    };

    let temperature_truth = match config.target {
        TargetSpec::DoubleWell { temperature } => temperature,
        _ => 1.0,
    };
    let summary = Summary {
        sampler: config.sampler.name(),
        target: config.target.name().to_string(),
        epsilon,
        acceptance,
        ess1_min: mins.iter().sum::<f64>() / mf,
        ess1_med: meds.iter().sum::<f64>() / mf,
        ess1_max: maxs.iter().sum::<f64>() / mf,
        ess2_min,
        time_seconds: start.elapsed().as_secs_f64(),
        t_c1: mean_of(&|r| r.t_c1),
        t_c2: mean_of(&|r| r.t_c2),
        t_k: mean_of(&|r| r.t_k),
        density_error: mean_of(&|r| r.density_error),
        rmse_t_c1: rmse_of(&|r| r.t_c1, temperature_truth),
        rmse_t_c2: rmse_of(&|r| r.t_c2, temperature_truth),
        rmse_t_k: rmse_of(&|r| r.t_k, temperature_truth),
        rmse_density: {
            let vals: Vec<f64> = reps.iter().filter_map(|r| r.density_error).collect();
            (!vals.is_empty())
                .then(|| (vals.iter().map(|e| e * e).sum::<f64>() / vals.len() as f64).sqrt())
        },
    };

    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
        if let Some(csv) = &dataset_csv {
            std::fs::write(dir.join("dataset.csv"), csv)?;
        }
        for (rep, csv) in &chains {
            std::fs::write(dir.join(format!("chain_r{rep:03}.csv")), csv)?;
        }
        let mut table = String::from("coordinate,ess1_mean,ess2\n");
        let dim = reps[0].ess1.len();
        for j in 0..dim {
            let e1 = reps.iter().map(|r| r.ess1[j]).sum::<f64>() / mf;
            let e2 = ess2.as_ref().map_or(f64::NAN, |v| v[j]);
            table.push_str(&format!("{},{},{}\n", j + 1, e1, e2));
        }
        std::fs::write(dir.join("ess_per_coordinate.csv"), table)?;
    }

    Ok(ExperimentResult { summary, reps })
}

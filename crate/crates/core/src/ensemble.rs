//! Reproducible ensembles of independent urn paths.
//!
//! Paths are simulated on a rayon pool of the requested size, collected in
//! path-index order and then aggregated sequentially, so every output is a
//! function of the config alone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};
use crate::urn::{run_path_with, PathTrace, UrnError};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Urn(#[from] UrnError),
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("no aggregate for n={n}, c={c}, alpha={alpha}")]
    Unconfigured { n: u64, c: f64, alpha: f64 },
    #[error("checkpoint {0} not recorded")]
    MissingCheckpoint(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub c: f64,
    pub alpha: f64,
    /// Cross-path mean of `(c + D_n)^-alpha`.
    pub mean: f64,
}

/// Cross-path aggregates at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub n: u64,
    pub count: u64,
    pub mean_z: f64,
    pub var_z: f64,
    /// Equal-width histogram of `Z_n` on `[0, 1]`, as probability masses.
    pub histogram: Vec<f64>,
    pub mean_d: f64,
    pub var_d: f64,
    pub mean_a: f64,
    pub mean_m: f64,
    pub var_m: f64,
    pub moments: Vec<MomentEstimate>,
    /// Mean of `n * sum_{n <= k < N} (Q^X_k)^2`.
    pub mean_tail_sq_qx: f64,
    /// Mean of `n * sum_{n <= k < N} (Q^Y_k)^2`.
    pub mean_tail_sq_qy: f64,
    pub mean_sqrtk_abs_da: f64,
    pub mean_k2_q4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub num_paths: u64,
    pub n_steps: u64,
    pub master_seed: u64,
    pub hist_bins: usize,
    pub checkpoints: Vec<CheckpointSummary>,
    /// `Z_N` of every path, by path index.
    pub final_z: Vec<f64>,
    /// Largest per-step `|Z_n - Z_0 - A_n - M_n|` seen on any path.
    pub max_identity_residual: f64,
}

impl EnsembleSummary {
    pub fn at(&self, n: u64) -> Result<&CheckpointSummary, EnsembleError> {
        self.checkpoints
            .iter()
            .find(|c| c.n == n)
            .ok_or(EnsembleError::MissingCheckpoint(n))
    }

    pub fn last(&self) -> &CheckpointSummary {
        self.checkpoints.last().expect("summary has a final checkpoint")
    }
}

/// Cross-path mean of `(c + D_n)^-alpha`; `(n, c, alpha)` must have been
/// aggregated.
pub fn estimate_moment(
    summary: &EnsembleSummary,
    n: u64,
    c: f64,
    alpha: f64,
) -> Result<f64, EnsembleError> {
    summary
        .checkpoints
        .iter()
        .find(|cp| cp.n == n)
        .and_then(|cp| cp.moments.iter().find(|m| m.c == c && m.alpha == alpha))
        .map(|m| m.mean)
        .ok_or(EnsembleError::Unconfigured { n, c, alpha })
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub config: ExperimentConfig,
    pub traces: Vec<PathTrace>,
    pub summary: EnsembleSummary,
}

/// Number of workers used when none is requested.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Simulates every path of `cfg` on `workers` threads.
pub fn run_ensemble(cfg: &ExperimentConfig, workers: usize) -> Result<Ensemble, EnsembleError> {
    cfg.validate()?;
    let law = cfg.law().map_err(ConfigError::from)?;
    let schedule = cfg.checkpoint_schedule();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    let traces = pool.install(|| {
        (0..cfg.num_paths)
            .into_par_iter()
            .map(|i| run_path_with(cfg, &law, &schedule, i))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let summary = summarize(cfg, &traces);
    Ok(Ensemble {
        config: cfg.clone(),
        traces,
        summary,
    })
}

fn mean_var(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = if n > 1 {
        xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    (mean, var)
}

pub fn histogram(values: impl Iterator<Item = f64>, bins: usize) -> Vec<f64> {
    let mut counts = vec![0u64; bins];
    let mut total = 0u64;
    for z in values {
        let idx = ((z * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        counts[idx] += 1;
        total += 1;
    }
    counts
        .into_iter()
        .map(|c| c as f64 / total.max(1) as f64)
        .collect()
}

/// Aggregates traces that all share the checkpoint schedule of `cfg`.
pub fn summarize(cfg: &ExperimentConfig, traces: &[PathTrace]) -> EnsembleSummary {
    let schedule = cfg.checkpoint_schedule();
    let mut checkpoints = Vec::with_capacity(schedule.len());
    for (ci, &n) in schedule.iter().enumerate() {
        let cps = traces.iter().map(move |t| (&t.checkpoints[ci], t.last()));
        let (mean_z, var_z) = mean_var(cps.clone().map(|(c, _)| c.z));
        let (mean_d, var_d) = mean_var(cps.clone().map(|(c, _)| c.d));
        let (mean_a, _) = mean_var(cps.clone().map(|(c, _)| c.a));
        let (mean_m, var_m) = mean_var(cps.clone().map(|(c, _)| c.m));
        let moments = cfg
            .moments
            .iter()
            .map(|&(c, alpha)| MomentEstimate {
                c,
                alpha,
                mean: mean_var(cps.clone().map(|(cp, _)| (c + cp.d).powf(-alpha))).0,
            })
            .collect();
        let nf = n as f64;
        let (mean_tail_sq_qx, _) =
            mean_var(cps.clone().map(|(c, f)| nf * (f.prefix_sq_qx - c.prefix_sq_qx)));
        let (mean_tail_sq_qy, _) =
            mean_var(cps.clone().map(|(c, f)| nf * (f.prefix_sq_qy - c.prefix_sq_qy)));
        let (mean_sqrtk_abs_da, _) = mean_var(cps.clone().map(|(c, _)| c.prefix_sqrtk_abs_da));
        let (mean_k2_q4, _) = mean_var(cps.clone().map(|(c, _)| c.prefix_k2_q4));
        checkpoints.push(CheckpointSummary {
            n,
            count: traces.len() as u64,
            mean_z,
            var_z,
            histogram: histogram(cps.map(|(c, _)| c.z), cfg.hist_bins),
            mean_d,
            var_d,
            mean_a,
            mean_m,
            var_m,
            moments,
            mean_tail_sq_qx,
            mean_tail_sq_qy,
            mean_sqrtk_abs_da,
            mean_k2_q4,
        });
    }
    EnsembleSummary {
        num_paths: traces.len() as u64,
        n_steps: cfg.n_steps,
        master_seed: cfg.master_seed,
        hist_bins: cfg.hist_bins,
        checkpoints,
        final_z: traces.iter().map(|t| t.final_z).collect(),
        max_identity_residual: traces
            .iter()
            .map(|t| t.max_identity_residual)
            .fold(0.0, f64::max),
    }
}

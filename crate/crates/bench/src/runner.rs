//! Seeded, progressively validated experiment runs.

use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use rayon::prelude::*;

use crate::algorithms::{run_seed, SeedRun};
use crate::config::{Algorithm, DataSource, ExperimentConfig};
use crate::dataset::{load_stream, Stream};

/// Outcome of one seed.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub result: std::result::Result<SeedSummary, String>,
}

#[derive(Debug, Clone)]
pub struct SeedSummary {
    /// Progressive validation loss on the second half of the stream.
    pub report_loss: f64,
    /// Progressive validation loss on the first half, used for tuning.
    pub tune_loss: f64,
    pub total_loss: f64,
    pub regret: Option<f64>,
    /// `(baseline − method) / baseline` on this seed, when a baseline ran.
    pub relative_decrease: Option<f64>,
    pub queries_per_round: f64,
    pub run: SeedRun,
}

/// Aggregate over seeds for one algorithm.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub seeds: Vec<SeedOutcome>,
    /// Mean and sample standard deviation of the surviving seeds' report loss.
    pub mean_loss: f64,
    pub std_loss: f64,
    pub baseline: Option<(Algorithm, f64)>,
    pub relative_decrease: Option<f64>,
    pub queries_per_round: f64,
    pub failed: bool,
    pub wall_time: Duration,
}

impl RunReport {
    pub fn survivors(&self) -> impl Iterator<Item = (u64, &SeedSummary)> {
        self.seeds
            .iter()
            .filter_map(|o| o.result.as_ref().ok().map(|s| (o.seed, s)))
    }

    pub fn surviving_count(&self) -> usize {
        self.survivors().count()
    }

    pub fn errors(&self) -> impl Iterator<Item = (u64, &str)> {
        self.seeds
            .iter()
            .filter_map(|o| o.result.as_ref().err().map(|e| (o.seed, e.as_str())))
    }
}

/// All reports of one config: the method first, then its baseline if any.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub reports: Vec<RunReport>,
}

impl ExperimentOutput {
    pub fn method(&self) -> &RunReport {
        &self.reports[0]
    }

    pub fn baseline(&self) -> Option<&RunReport> {
        self.reports.get(1)
    }
}

/// Mean of `v[start..end]`.
fn window_mean(v: &[f64], start: usize, end: usize) -> f64 {
    if end <= start {
        return f64::NAN;
    }
    v[start..end].iter().sum::<f64>() / (end - start) as f64
}

/// Mean and sample standard deviation; a single value has deviation 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn stream_is_shared(cfg: &ExperimentConfig) -> bool {
    match &cfg.dataset.source {
        DataSource::Csv { .. } => true,
        DataSource::Synthetic { stream_seed, .. } => stream_seed.is_some(),
    }
}

fn summarize(run: SeedRun) -> Result<SeedSummary> {
    run.check_versions()?;
    let t = run.losses.len();
    let half = t / 2;
    let total: f64 = run.losses.iter().sum();
    Ok(SeedSummary {
        report_loss: window_mean(&run.losses, half, t),
        tune_loss: window_mean(&run.losses, 0, half.max(1)),
        total_loss: total,
        regret: run.comparator.as_ref().map(|c| total - c.total),
        relative_decrease: None,
        queries_per_round: run.queries as f64 / t as f64,
        run,
    })
}

/// Runs `algorithm` for every seed of `cfg`. Seeds run in parallel; the
/// result is independent of their execution order.
pub fn run_algorithm(cfg: &ExperimentConfig, algorithm: Algorithm) -> Result<RunReport> {
    let started = Instant::now();
    let shared = if stream_is_shared(cfg) {
        Some(load_stream(&cfg.dataset, cfg.horizon, 0).context("loading dataset")?)
    } else {
        None
    };
    let one = |seed: u64| -> Result<SeedSummary> {
        let owned;
        let stream: &Stream = match &shared {
            Some(s) => s,
            None => {
                owned = load_stream(&cfg.dataset, cfg.horizon, seed)?;
                &owned
            }
        };
        summarize(run_seed(cfg, algorithm, stream, seed)?)
    };
    let seeds: Vec<SeedOutcome> = cfg
        .seeds
        .par_iter()
        .map(|&seed| SeedOutcome {
            seed,
            result: one(seed).map_err(|e| format!("{e:#}")),
        })
        .collect();
    for o in &seeds {
        if let Err(e) = &o.result {
            log::error!("{algorithm} seed {} failed: {e}", o.seed);
        }
    }
    let losses: Vec<f64> = seeds
        .iter()
        .filter_map(|o| o.result.as_ref().ok().map(|s| s.report_loss))
        .collect();
    let (mean_loss, std_loss) = mean_std(&losses);
    let qpr: Vec<f64> = seeds
        .iter()
        .filter_map(|o| o.result.as_ref().ok().map(|s| s.queries_per_round))
        .collect();
    let horizon = seeds
        .iter()
        .find_map(|o| o.result.as_ref().ok().map(|s| s.run.losses.len()))
        .unwrap_or(cfg.horizon.unwrap_or(0));
    Ok(RunReport {
        dataset: cfg.label().to_owned(),
        algorithm,
        horizon,
        failed: 2 * losses.len() < seeds.len(),
        seeds,
        mean_loss,
        std_loss,
        baseline: None,
        relative_decrease: None,
        queries_per_round: mean_std(&qpr).0,
        wall_time: started.elapsed(),
    })
}

/// Runs the configured algorithm and, if `compare_with` is set, its baseline
/// on the same streams and seeds.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut method = run_algorithm(cfg, cfg.algorithm)?;
    let mut reports = Vec::new();
    if let Some(base) = cfg.compare_with {
        let baseline = run_algorithm(&cfg.baseline_config(), base)?;
        method.baseline = Some((base, baseline.mean_loss));
        method.relative_decrease = Some((baseline.mean_loss - method.mean_loss) / baseline.mean_loss);
        for (m, b) in method.seeds.iter_mut().zip(&baseline.seeds) {
            if let (Ok(m), Ok(b)) = (m.result.as_mut(), b.result.as_ref()) {
                m.relative_decrease = Some((b.report_loss - m.report_loss) / b.report_loss);
            }
        }
        reports.push(method);
        reports.push(baseline);
    } else {
        reports.push(method);
    }
    Ok(ExperimentOutput { reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert!(mean_std(&[]).0.is_nan());
    }

    #[test]
    fn windows() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(window_mean(&v, 2, 4), 3.5);
        assert_eq!(window_mean(&v, 0, 2), 1.5);
    }
}

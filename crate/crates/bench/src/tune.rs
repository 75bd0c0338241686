//! Grid search over `(lr, c, N, δ)` scored by first-half progressive
//! validation loss.

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, NChoice};
use crate::runner::{mean_std, run_algorithm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TunePoint {
    pub lr: f64,
    pub c: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub delta: f64,
    /// Mean first-half loss over the tuning seeds; NaN if every seed failed.
    pub score: f64,
}

/// `points` values log-spaced over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|k| lo * (hi / lo).powf(k as f64 / (points - 1) as f64))
            .collect(),
    }
}

fn current_n(cfg: &ExperimentConfig) -> usize {
    if cfg.algorithm.is_supervised() {
        cfg.boost.n
    } else {
        match cfg.sfw.n {
            NChoice::Fixed(n) => n,
            NChoice::Policy(_) => 0,
        }
    }
}

/// Applies one grid point to a copy of `cfg`.
pub fn with_point(cfg: &ExperimentConfig, lr: f64, c: f64, n: usize, delta: f64) -> ExperimentConfig {
    let mut cfg = cfg.clone();
    cfg.learner.lr = lr;
    cfg.learner.c = c;
    cfg.boost.delta = delta;
    if n > 0 {
        cfg.boost.n = n;
        cfg.sfw.n = NChoice::Fixed(n);
    }
    cfg.compare_with = None;
    cfg.baseline_learner = None;
    cfg.report.regret = false;
    if !cfg.tune.seeds.is_empty() {
        cfg.seeds = cfg.tune.seeds.clone();
    }
    cfg
}

/// Scores every grid point, best first (ties keep grid order).
pub fn tune(cfg: &ExperimentConfig) -> Result<Vec<TunePoint>> {
    cfg.validate()?;
    let t = &cfg.tune;
    let lrs = log_grid(t.lr_range[0], t.lr_range[1], t.lr_points);
    let ns = if t.n.is_empty() { vec![current_n(cfg)] } else { t.n.clone() };
    let deltas = if t.delta.is_empty() { vec![cfg.boost.delta] } else { t.delta.clone() };
    let mut grid = Vec::new();
    for &lr in &lrs {
        for &c in &t.c {
            for &n in &ns {
                for &delta in &deltas {
                    grid.push((lr, c, n, delta));
                }
            }
        }
    }
    if grid.is_empty() {
        bail!("empty tuning grid");
    }
    let mut scored: Vec<TunePoint> = grid
        .par_iter()
        .map(|&(lr, c, n, delta)| {
            let point = with_point(cfg, lr, c, n, delta);
            let score = run_algorithm(&point, point.algorithm)
                .map(|r| {
                    let tune: Vec<f64> = r.survivors().map(|(_, s)| s.tune_loss).collect();
                    if r.failed { f64::NAN } else { mean_std(&tune).0 }
                })
                .unwrap_or(f64::NAN);
            TunePoint { lr, c, n, delta, score }
        })
        .collect();
    scored.sort_by(|a, b| {
        (a.score.is_nan(), a.score)
            .partial_cmp(&(b.score.is_nan(), b.score))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(scored)
}

pub fn to_csv(points: &[TunePoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(p)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

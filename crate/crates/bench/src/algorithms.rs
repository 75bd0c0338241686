//! One seed of one algorithm over a prepared stream.
//!
//! Every driver tags each prediction with the version of the state that made
//! it (rounds consumed so far); the runner checks the tag equals the round
//! index, so no example is scored by a state that has already seen it.

use anyhow::{ensure, Context, Result};
use fwboost::boosting::{Booster, BoosterParams, LearningRate, LinearWeakLearner, UpdateRule, WeakLearner};
use fwboost::geometry::DecisionSet;
use fwboost::losses::{fkm_estimate, noisy_estimate_bound, sphere_sample, EstimateStats, NoisyBanditOracle};
use fwboost::olo::OloKind;
use fwboost::sfw::{bandit_parameters, choose_n, LedgerSource, NoisyGradientOracle, ProjectionFreeOco, SfwMode, SfwParams};
use fwboost::{seeded_rng, Point};

use crate::comparator::{best_fixed_point, best_linear_policy, Comparator};
use crate::config::{
    Algorithm, DeltaChoice, ExperimentConfig, LearnerUpdate, NChoice, NPolicy, NfkmMode, OloName, SetConfig,
};
use crate::dataset::Stream;

/// Everything recorded while running one seed.
#[derive(Debug, Clone, Default)]
pub struct SeedRun {
    /// True loss of each round's prediction.
    pub losses: Vec<f64>,
    /// Feedback observed for each round's prediction (noisy in bandit modes).
    pub feedback: Vec<f64>,
    /// State version that produced each prediction.
    pub versions: Vec<u64>,
    pub queries: u64,
    pub estimates: EstimateStats,
    pub comparator: Option<Comparator>,
    /// Learners per round (1 for single-model baselines).
    pub n: usize,
}

impl SeedRun {
    /// Checks progressive validation: prediction `t` came from version `t`.
    pub fn check_versions(&self) -> Result<()> {
        for (t, &v) in self.versions.iter().enumerate() {
            ensure!(
                v == t as u64,
                "progressive validation violated: round {} was predicted by state version {v}",
                t + 1
            );
        }
        ensure!(self.versions.len() == self.losses.len(), "missing version tags");
        Ok(())
    }
}

/// Hyperparameters shared by the supervised drivers.
struct Scales {
    /// Loss bound `M` over the label set, maximized over the stream.
    m: f64,
    /// Gradient bound `L`, maximized over the stream.
    l: f64,
    /// Smoothness `β`, maximized over the stream.
    beta: f64,
}

fn scales(stream: &Stream, set: &DecisionSet) -> Result<Scales> {
    let mut s = Scales { m: 0.0, l: 0.0, beta: 0.0 };
    for t in 0..stream.len() {
        let c = stream.loss(t, set)?.constants();
        s.m = s.m.max(c.bound);
        s.l = s.l.max(c.lipschitz);
        s.beta = s.beta.max(c.smoothness);
    }
    Ok(s)
}

/// The decision set of the OCO drivers: `[set]` if configured, else the label set.
pub fn oco_set(cfg: &ExperimentConfig, stream: &Stream) -> Result<DecisionSet> {
    Ok(match &cfg.set {
        None => stream.label_set.clone(),
        Some(SetConfig::Ball { dim, radius }) => DecisionSet::ball(Point::zeros(*dim), *radius)?,
        Some(SetConfig::Box { dim, lo, hi }) => DecisionSet::cube(*dim, *lo, *hi)?,
    })
}

pub fn run_seed(cfg: &ExperimentConfig, algorithm: Algorithm, stream: &Stream, seed: u64) -> Result<SeedRun> {
    ensure!(!stream.is_empty(), "empty stream");
    let mut run = match algorithm {
        Algorithm::BoostBandit => boost(cfg, stream, seed, true)?,
        Algorithm::BoostFullInfo => boost(cfg, stream, seed, false)?,
        Algorithm::NfkmBaseline => nfkm(cfg, stream, seed)?,
        Algorithm::OgdBaseline => ogd(cfg, stream)?,
        Algorithm::ConstantBaseline => constant(cfg, stream)?,
        Algorithm::SfwStochastic => sfw(cfg, stream, seed, false)?,
        Algorithm::SfwBandit => sfw(cfg, stream, seed, true)?,
    };
    if cfg.report.regret {
        run.comparator = if algorithm.is_supervised() {
            best_linear_policy(stream, &stream.label_set)?.map(|(_, c)| c)
        } else {
            Some(best_fixed_point(stream, &oco_set(cfg, stream)?)?.1)
        };
    }
    Ok(run)
}

fn learner(
    cfg: &ExperimentConfig,
    input_dim: usize,
    set: &DecisionSet,
    sigma: f64,
    gradient_cap: f64,
    delta: f64,
    seed: u64,
) -> Result<LinearWeakLearner> {
    let rate = LearningRate {
        lr: cfg.learner.lr / sigma,
        decay: cfg.learner.c,
    };
    let rule = match cfg.learner.update {
        LearnerUpdate::Exact => UpdateRule::ExactGradient,
        LearnerUpdate::Fkm => UpdateRule::Fkm { delta },
    };
    Ok(LinearWeakLearner::new(input_dim, set.clone(), rate)?
        .with_rule(rule, seed)
        .with_weight_cap(cfg.learner.weight_cap)
        .with_gradient_cap(cfg.learner.gradient_cap.unwrap_or(gradient_cap)))
}

fn child(seed: u64, i: u64) -> u64 {
    seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ (i + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn boost(cfg: &ExperimentConfig, stream: &Stream, seed: u64, bandit: bool) -> Result<SeedRun> {
    let y_set = &stream.label_set;
    let s = scales(stream, y_set)?;
    let d = y_set.dim();
    let delta = bandit.then_some(cfg.boost.delta);
    let play = Booster::<LinearWeakLearner>::play_set_for(y_set, delta)?;
    let (sigma, cap) = match delta {
        Some(delta) => (
            noisy_estimate_bound(d, s.m, delta),
            10.0 * d as f64 * s.m / delta,
        ),
        None => (s.l.max(f64::MIN_POSITIVE), f64::INFINITY),
    };
    let learners = (0..cfg.boost.n)
        .map(|i| {
            learner(cfg, stream.feature_dim(), &play, sigma, cap, cfg.boost.delta, child(seed, i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut booster = Booster::new(
        learners,
        y_set.clone(),
        BoosterParams {
            gamma: cfg.boost.gamma,
            delta,
        },
    )?;
    let mut oracle = NoisyBanditOracle::new(stream.loss(0, y_set)?, cfg.noise_halfwidth, seed)?;
    let mut rng = seeded_rng(seed, 0x626f6f7374);
    let mut versions = Vec::with_capacity(stream.len());
    for (t, e) in stream.examples.iter().enumerate() {
        versions.push(booster.rounds());
        let loss = stream.loss(t, y_set)?;
        if bandit {
            oracle.replace_loss(loss)?;
            booster.boost_round(&e.features, &mut oracle, &mut rng)
        } else {
            booster.boost_round_full_info(&e.features, &loss)
        }
        .with_context(|| format!("round {}", t + 1))?;
    }
    let ledger = booster.ledger();
    if bandit {
        ensure!(oracle.query_count() == ledger.query_count, "oracle and ledger query counts differ");
    }
    Ok(SeedRun {
        losses: ledger.per_round_losses.clone(),
        feedback: ledger.per_round_feedback.clone(),
        versions,
        queries: ledger.query_count,
        estimates: *booster.estimates(),
        comparator: None,
        n: cfg.boost.n,
    })
}

/// A single linear model spending the boosting budget on `N` spherical
/// estimates per round.
fn nfkm(cfg: &ExperimentConfig, stream: &Stream, seed: u64) -> Result<SeedRun> {
    let y_set = &stream.label_set;
    let s = scales(stream, y_set)?;
    let d = y_set.dim();
    let n = cfg.boost.n;
    let delta = cfg.boost.delta;
    let play = Booster::<LinearWeakLearner>::play_set_for(y_set, Some(delta))?;
    let sigma = noisy_estimate_bound(d, s.m, delta);
    let mut model = learner(cfg, stream.feature_dim(), &play, sigma, 10.0 * d as f64 * s.m / delta, delta, child(seed, 0))?;
    let mut oracle = NoisyBanditOracle::new(stream.loss(0, y_set)?, cfg.noise_halfwidth, seed)?;
    let mut rng = seeded_rng(seed, 0x6e666b6d);
    let mut run = SeedRun {
        n,
        ..SeedRun::default()
    };
    let per_round_updates = match cfg.nfkm.mode {
        NfkmMode::Average => 1,
        NfkmMode::Sequential => n as u64,
    };
    for (t, e) in stream.examples.iter().enumerate() {
        let loss = stream.loss(t, y_set)?;
        let bound = noisy_estimate_bound(d, loss.constants().bound, delta);
        oracle.replace_loss(loss)?;
        run.versions.push(model.updates() / per_round_updates);
        let y = model.predict(&e.features)?;
        let mut estimate = |at: &Point, oracle: &mut NoisyBanditOracle, run: &mut SeedRun| -> Result<Point> {
            let v = sphere_sample(d, &mut rng);
            let g = fkm_estimate(oracle.noisy_eval(&(at + &v * delta))?, &v, delta);
            run.estimates.observe(&g, bound);
            Ok(g)
        };
        match cfg.nfkm.mode {
            NfkmMode::Average => {
                let mut sum = Point::zeros(d);
                for _ in 0..n {
                    sum += estimate(&y, &mut oracle, &mut run)?;
                }
                let mean = sum / n as f64;
                run.estimates.observe(&mean, bound);
                model.update(&e.features, &mean)?;
            }
            NfkmMode::Sequential => {
                let g = estimate(&y, &mut oracle, &mut run)?;
                model.update(&e.features, &g)?;
                for _ in 1..n {
                    let p = model.predict(&e.features)?;
                    let g = estimate(&p, &mut oracle, &mut run)?;
                    model.update(&e.features, &g)?;
                }
            }
        }
        run.feedback.push(oracle.noisy_eval(&y)?);
        run.losses.push(oracle.loss().eval(&y)?);
    }
    run.queries = oracle.query_count();
    Ok(run)
}

/// Full-information projected OGD on a single linear model.
fn ogd(cfg: &ExperimentConfig, stream: &Stream) -> Result<SeedRun> {
    let y_set = &stream.label_set;
    let s = scales(stream, y_set)?;
    let mut model = learner(cfg, stream.feature_dim(), y_set, s.l.max(f64::MIN_POSITIVE), f64::INFINITY, 1.0, 0)?;
    let mut run = SeedRun {
        n: 1,
        ..SeedRun::default()
    };
    for (t, e) in stream.examples.iter().enumerate() {
        let loss = stream.loss(t, y_set)?;
        run.versions.push(model.updates());
        let y = model.predict(&e.features)?;
        model.update(&e.features, &loss.grad(&y)?)?;
        let value = loss.eval(&y)?;
        run.losses.push(value);
        run.feedback.push(value);
        run.queries += 1;
    }
    Ok(run)
}

/// Predicts the configured constant (in original label units) every round.
fn constant(cfg: &ExperimentConfig, stream: &Stream) -> Result<SeedRun> {
    let y = Point::from_element(stream.label_dim(), cfg.constant.value) - &stream.label_shift;
    let mut run = SeedRun {
        n: 1,
        ..SeedRun::default()
    };
    for (t, e) in stream.examples.iter().enumerate() {
        run.versions.push(t as u64);
        let value = match stream.family {
            crate::dataset::LossFamily::Squared => (&y - &e.label).norm_squared(),
            crate::dataset::LossFamily::Linear => e.label.dot(&y),
        };
        run.losses.push(value);
        run.feedback.push(value);
        run.queries += 1;
    }
    Ok(run)
}

/// Learner count and mode for the projection-free drivers.
pub fn sfw_parameters(cfg: &ExperimentConfig, stream: &Stream, bandit: bool) -> Result<(usize, SfwMode, f64)> {
    let set = oco_set(cfg, stream)?;
    let s = scales(stream, &set)?;
    let horizon = stream.len() as u64;
    let (default_n, default_delta) = bandit_parameters(horizon);
    let delta = match cfg.sfw.delta {
        DeltaChoice::Fixed(d) => d,
        DeltaChoice::Auto(_) => default_delta,
    };
    let sigma = if bandit {
        noisy_estimate_bound(set.dim(), s.m, delta)
    } else {
        s.l + cfg.sfw.gradient_noise
    };
    let n = match cfg.sfw.n {
        NChoice::Fixed(n) => n,
        NChoice::Policy(NPolicy::Sqrt) => default_n,
        NChoice::Policy(NPolicy::Auto) if bandit => default_n,
        NChoice::Policy(NPolicy::Auto) if s.beta > 0.0 => choose_n(s.beta, set.diameter(), sigma, horizon)?,
        NChoice::Policy(NPolicy::Auto) => 1,
    }
    .min(cfg.sfw.n_cap)
    .max(1);
    let mode = if bandit {
        SfwMode::BanditFkm { delta }
    } else {
        SfwMode::StochasticGradient
    };
    Ok((n, mode, sigma.max(f64::MIN_POSITIVE)))
}

fn sfw(cfg: &ExperimentConfig, stream: &Stream, seed: u64, bandit: bool) -> Result<SeedRun> {
    let set = oco_set(cfg, stream)?;
    ensure!(
        set.dim() == stream.label_dim(),
        "decision set has dimension {} but losses have dimension {}",
        set.dim(),
        stream.label_dim()
    );
    let (n, mode, sigma) = sfw_parameters(cfg, stream, bandit)?;
    let olo = match cfg.olo.kind {
        OloName::Fpl => OloKind::Fpl {
            perturbation_scale: cfg.olo.scale,
        },
        OloName::Ogd => OloKind::Ogd {
            step_scale: cfg.olo.scale,
        },
    };
    let mut learner = ProjectionFreeOco::new(
        set.clone(),
        SfwParams {
            n,
            mode,
            olo,
            sigma,
            horizon: stream.len() as u64,
            seed,
            ledger: LedgerSource::Exact,
        },
    )?;
    let mut grads = NoisyGradientOracle::new(cfg.sfw.gradient_noise, seed)?;
    let mut oracle = NoisyBanditOracle::new(stream.loss(0, &set)?, cfg.noise_halfwidth, seed)?;
    let mut versions = Vec::with_capacity(stream.len());
    for t in 0..stream.len() {
        versions.push(learner.rounds());
        let loss = stream.loss(t, &set)?;
        if bandit {
            oracle.replace_loss(loss)?;
            learner.bandit_round(&mut oracle)
        } else {
            learner.round(|at| grads.query(&loss, at), &loss)
        }
        .with_context(|| format!("round {}", t + 1))?;
    }
    let ledger = learner.ledger();
    let issued = if bandit { oracle.query_count() } else { grads.query_count() };
    ensure!(issued == ledger.query_count, "oracle and ledger query counts differ");
    Ok(SeedRun {
        losses: ledger.per_round_losses.clone(),
        feedback: ledger.per_round_losses.clone(),
        versions,
        queries: ledger.query_count,
        estimates: *learner.estimates(),
        comparator: None,
        n,
    })
}

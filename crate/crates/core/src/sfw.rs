//! Projection-free online convex optimization.
//!
//! Each round runs an `N`-step Frank-Wolfe pass whose linear-minimization
//! steps are replaced by `N` online linear optimizers:
//!
//! ```text
//! x⁰ = 0
//! for i = 1..N:
//!     xⁱ = (1 − ηᵢ)·xⁱ⁻¹ + ηᵢ·Aᵢ.predict()        ηᵢ = 2/(i+1)
//!     gᵢ = oracle(xⁱ⁻¹)                           unbiased for ∇ℓₜ(xⁱ⁻¹)
//!     Aᵢ.update(gᵢ)
//! play xᴺ
//! ```
//!
//! Learner `i` only ever sees gradients taken at the iterate *before* its own
//! prediction is blended in, and its prediction is read before that gradient
//! is drawn. No projection is computed: every `xⁱ` for `i ≥ 1` is a convex
//! combination of learner outputs.
//!
//! In bandit mode the gradient oracle is replaced by the spherical estimate
//! `(d/δ)·ℓ̃ₜ(xⁱ⁻¹ + δv)·v` and the learners live on the shrunk set so that
//! every query stays feasible.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::geometry::DecisionSet;
use crate::losses::{
    fkm_estimate, noisy_estimate_bound, sphere_sample, ConvexLoss, EstimateStats, LossKind,
    NoisyBanditOracle,
};
use crate::olo::{OloKind, OloSpec, OloState, OnlineLinearOptimizer, RegretLedger};
use crate::trace::{CallKind, CallLog};
use crate::{check_dim, seeded_rng, Error, Point, Result, SeededRng};

/// Upper limit applied to automatically chosen learner counts.
pub const DEFAULT_N_CAP: usize = 10_000;

/// Frank-Wolfe step length `ηᵢ = 2/(i+1)` for 1-based `i`.
#[inline]
pub fn step_length(i: usize) -> f64 {
    2.0 / (i as f64 + 1.0)
}

/// Number of learners `round(βD√T/σ)`, at least 1.
pub fn choose_n(beta: f64, diameter: f64, sigma: f64, horizon: u64) -> Result<usize> {
    for (name, v) in [("beta", beta), ("diameter", diameter), ("sigma", sigma)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(name, format!("must be positive, got {v}")));
        }
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be positive"));
    }
    let n = (beta * diameter * (horizon as f64).sqrt() / sigma).round();
    Ok((n as usize).max(1))
}

/// Pure bandit defaults for horizon `T`: `N = ⌈√T⌉`, `δ = T^(-1/4)`.
pub fn bandit_parameters(horizon: u64) -> (usize, f64) {
    let t = horizon.max(1) as f64;
    ((t.sqrt().ceil() as usize).max(1), t.powf(-0.25))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SfwMode {
    /// Gradients come from an unbiased stochastic oracle.
    StochasticGradient,
    /// Gradients are spherical estimates from noisy loss values.
    BanditFkm { delta: f64 },
}

/// How the ledger learns each round's loss `ℓₜ(xₜ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LedgerSource {
    /// Exact evaluation (synthetic experiments). Not counted as a query.
    #[default]
    Exact,
    /// One extra noisy bandit query per round (bandit mode only).
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfwParams {
    pub n: usize,
    pub mode: SfwMode,
    pub olo: OloKind,
    /// Declared bound on gradient (estimate) norms fed to the learners.
    pub sigma: f64,
    pub horizon: u64,
    pub seed: u64,
    pub ledger: LedgerSource,
}

/// Seed for the `index`-th of several independent components.
pub(crate) fn child_seed(seed: u64, index: u64) -> u64 {
    seed ^ (index + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// State of the projection-free online learner.
#[derive(Debug, Clone)]
pub struct ProjectionFreeOco {
    learners: Vec<OloState>,
    set: DecisionSet,
    play_set: DecisionSet,
    mode: SfwMode,
    ledger_source: LedgerSource,
    round: u64,
    ledger: RegretLedger,
    estimates: EstimateStats,
    rng: SeededRng,
    calls: Option<CallLog>,
}

impl ProjectionFreeOco {
    pub fn new(set: DecisionSet, params: SfwParams) -> Result<Self> {
        if params.n == 0 {
            return Err(Error::invalid("n", "need at least one learner"));
        }
        let play_set = match params.mode {
            SfwMode::StochasticGradient => {
                if params.ledger == LedgerSource::Noisy {
                    return Err(Error::invalid("ledger", "noisy ledger requires bandit mode"));
                }
                set.clone()
            }
            SfwMode::BanditFkm { delta } => {
                let inner = set.shrink_for_queries(delta)?;
                // The first query of every round is taken around x⁰ = 0.
                if !inner.contains(&Point::zeros(set.dim())) {
                    return Err(Error::invalid(
                        "set",
                        "bandit mode queries around the origin, which must lie in the shrunk set",
                    ));
                }
                inner
            }
        };
        let spec = OloSpec {
            kind: params.olo,
            sigma: params.sigma,
            horizon: params.horizon,
        };
        let learners = (0..params.n)
            .map(|i| spec.build(&play_set, child_seed(params.seed, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            learners,
            set,
            play_set,
            mode: params.mode,
            ledger_source: params.ledger,
            round: 0,
            ledger: RegretLedger::new(),
            estimates: EstimateStats::default(),
            rng: seeded_rng(params.seed, 0x736677),
            calls: None,
        })
    }

    /// Starts recording the per-learner call order.
    pub fn record_calls(&mut self) {
        self.calls = Some(CallLog::default());
    }

    pub fn calls(&self) -> Option<&CallLog> {
        self.calls.as_ref()
    }

    pub fn n(&self) -> usize {
        self.learners.len()
    }

    pub fn set(&self) -> &DecisionSet {
        &self.set
    }

    /// The set the learners play on (shrunk in bandit mode).
    pub fn play_set(&self) -> &DecisionSet {
        &self.play_set
    }

    pub fn rounds(&self) -> u64 {
        self.round
    }

    pub fn ledger(&self) -> &RegretLedger {
        &self.ledger
    }

    pub fn estimates(&self) -> &EstimateStats {
        &self.estimates
    }

    pub fn mode(&self) -> SfwMode {
        self.mode
    }

    /// One round with a stochastic gradient oracle; `loss` is the round's
    /// true loss, used only for the ledger.
    pub fn round<F>(&mut self, mut grad_oracle: F, loss: &ConvexLoss) -> Result<Point>
    where
        F: FnMut(&Point) -> Result<Point>,
    {
        if self.mode != SfwMode::StochasticGradient {
            return Err(Error::Protocol("stochastic round on a bandit-mode learner".into()));
        }
        check_dim(self.set.dim(), loss.dim())?;
        self.round += 1;
        let x = frank_wolfe_pass(
            &mut self.learners,
            &mut self.calls,
            self.round,
            |_, at| grad_oracle(at),
        )?;
        self.ledger.query_count += self.learners.len() as u64;
        self.ledger.record(loss.eval(&x)?);
        Ok(x)
    }

    /// One round from noisy bandit feedback: exactly `N` queries (plus one
    /// when the ledger is fed from noisy feedback).
    pub fn bandit_round(&mut self, oracle: &mut NoisyBanditOracle) -> Result<Point> {
        let SfwMode::BanditFkm { delta } = self.mode else {
            return Err(Error::Protocol("bandit round on a stochastic-mode learner".into()));
        };
        let d = self.set.dim();
        check_dim(d, oracle.loss().dim())?;
        self.round += 1;
        let bound = noisy_estimate_bound(d, oracle.loss().constants().bound, delta);
        let rng = &mut self.rng;
        let estimates = &mut self.estimates;
        let x = frank_wolfe_pass(&mut self.learners, &mut self.calls, self.round, |_, at| {
            let v = sphere_sample(d, rng);
            let value = oracle.noisy_eval(&(at + &v * delta))?;
            let g = fkm_estimate(value, &v, delta);
            estimates.observe(&g, bound);
            Ok(g)
        })?;
        self.ledger.query_count += self.learners.len() as u64;
        let loss = match self.ledger_source {
            LedgerSource::Exact => oracle.loss().eval(&x)?,
            LedgerSource::Noisy => {
                self.ledger.query_count += 1;
                oracle.noisy_eval(&x)?
            }
        };
        self.ledger.record(loss);
        Ok(x)
    }
}

/// The shared `N`-step blend. `query(i, xⁱ⁻¹)` supplies learner `i`'s linear
/// loss; it is called only after learner `i`'s prediction has been read.
fn frank_wolfe_pass<Q>(
    learners: &mut [OloState],
    calls: &mut Option<CallLog>,
    round: u64,
    mut query: Q,
) -> Result<Point>
where
    Q: FnMut(usize, &Point) -> Result<Point>,
{
    let d = learners[0].set().dim();
    let mut prev = Point::zeros(d);
    for (i, learner) in learners.iter_mut().enumerate() {
        let p = learner.predict()?;
        if let Some(log) = calls.as_mut() {
            log.push(round, i, CallKind::Predict);
        }
        let eta = step_length(i + 1);
        let next = &prev * (1.0 - eta) + &p * eta;
        if i == 0 {
            debug_assert!(learner.set().contains(&next));
        }
        if let Some(log) = calls.as_mut() {
            log.push(round, i, CallKind::Feedback);
        }
        let g = query(i, &prev)?;
        check_dim(d, g.len())?;
        learner.update(&g)?;
        if let Some(log) = calls.as_mut() {
            log.push(round, i, CallKind::Update);
        }
        prev = next;
    }
    Ok(prev)
}

/// Unbiased gradient oracle: exact gradient plus noise drawn uniformly from
/// the ball of radius `noise_radius`.
#[derive(Debug, Clone)]
pub struct NoisyGradientOracle {
    noise_radius: f64,
    rng: SeededRng,
    queries: u64,
}

impl NoisyGradientOracle {
    pub fn new(noise_radius: f64, seed: u64) -> Result<Self> {
        if !(noise_radius.is_finite() && noise_radius >= 0.0) {
            return Err(Error::invalid(
                "noise_radius",
                format!("must be nonnegative, got {noise_radius}"),
            ));
        }
        Ok(Self {
            noise_radius,
            rng: seeded_rng(seed, 0x67726164),
            queries: 0,
        })
    }

    pub fn query(&mut self, loss: &ConvexLoss, at: &Point) -> Result<Point> {
        self.queries += 1;
        let g = loss.grad(at)?;
        if self.noise_radius == 0.0 {
            return Ok(g);
        }
        let d = g.len();
        let r = self.noise_radius * self.rng.random::<f64>().powf(1.0 / d as f64);
        Ok(g + sphere_sample(d, &mut self.rng) * r)
    }

    /// Norm bound of returned gradients for a loss with gradient bound `g`.
    pub fn sigma(&self, gradient_bound: f64) -> f64 {
        gradient_bound + self.noise_radius
    }

    pub fn query_count(&self) -> u64 {
        self.queries
    }
}

/// `Σₜ ℓₜ` for quadratic-family losses, kept as `xᵀAx + bᵀx + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticAggregate {
    a: DMatrix<f64>,
    b: Point,
    c: f64,
}

impl QuadraticAggregate {
    pub fn new(dim: usize) -> Self {
        Self {
            a: DMatrix::zeros(dim, dim),
            b: Point::zeros(dim),
            c: 0.0,
        }
    }

    pub fn add(&mut self, loss: &ConvexLoss) -> Result<()> {
        check_dim(self.b.len(), loss.dim())?;
        match loss.kind() {
            LossKind::SquaredDistance { target } => {
                for k in 0..target.len() {
                    self.a[(k, k)] += 1.0;
                }
                self.b -= target * 2.0;
                self.c += target.norm_squared();
            }
            LossKind::Linear { coefficients } => self.b += coefficients,
            LossKind::Quadratic { matrix, offset } => {
                let q_off = matrix * offset;
                self.a += matrix;
                self.b -= &q_off * 2.0;
                self.c += offset.dot(&q_off);
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &Point) -> f64 {
        x.dot(&(&self.a * x)) + self.b.dot(x) + self.c
    }

    /// Minimizes the aggregate over `set`: exact for purely linear totals,
    /// projected gradient descent with step `1/(2λ_max)` otherwise.
    pub fn minimize(&self, set: &DecisionSet) -> Result<(Point, f64)> {
        check_dim(set.dim(), self.b.len())?;
        let top = SymmetricEigen::new(self.a.clone()).eigenvalues.max();
        if top <= 1e-14 {
            let x = set.linear_minimize(&self.b)?;
            return Ok((x.clone(), self.eval(&x)));
        }
        let step = 1.0 / (2.0 * top);
        let mut x = set.center().clone();
        for _ in 0..200_000 {
            let grad = &self.a * &x * 2.0 + &self.b;
            let next = set.project(&(&x - grad * step))?;
            let moved = (&next - &x).norm();
            x = next;
            if moved <= 1e-13 * (1.0 + x.norm()) {
                break;
            }
        }
        let value = self.eval(&x);
        Ok((x, value))
    }
}

/// Best fixed point in hindsight for a sequence of quadratic-family losses.
pub fn best_fixed_point(losses: &[ConvexLoss], set: &DecisionSet) -> Result<(Point, f64)> {
    if losses.is_empty() {
        return Err(Error::invalid("losses", "need at least one loss"));
    }
    let mut total = QuadraticAggregate::new(set.dim());
    for loss in losses {
        total.add(loss)?;
    }
    total.minimize(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::olo::{offline_linear_optimum, regret};
    use nalgebra::dvector;

    #[test]
    fn choose_n_examples() {
        assert_eq!(choose_n(1.0, 1.0, 1.0, 100).unwrap(), 10);
        assert_eq!(choose_n(2.0, 1.0, 4.0, 64).unwrap(), 4);
        assert_eq!(choose_n(3.0, 1.0, 3.0, 1).unwrap(), 1);
        assert_eq!(choose_n(0.01, 1.0, 1.0, 4).unwrap(), 1);
        assert!(choose_n(0.0, 1.0, 1.0, 4).is_err());
        assert!(choose_n(1.0, 1.0, -1.0, 4).is_err());
        assert!(choose_n(1.0, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn bandit_defaults() {
        let (n, delta) = bandit_parameters(10_000);
        assert_eq!(n, 100);
        assert!((delta - 0.1).abs() < 1e-15);
        let (n, delta) = bandit_parameters(1000);
        assert_eq!(n, 32);
        assert!((delta - 1000f64.powf(-0.25)).abs() < 1e-15);
    }

    #[test]
    fn step_schedule() {
        assert_eq!(step_length(1), 1.0);
        for i in 1..100 {
            assert_eq!(step_length(i), 2.0 / (i as f64 + 1.0));
            assert!(step_length(i + 1) < step_length(i));
        }
    }

    fn params(n: usize, mode: SfwMode) -> SfwParams {
        SfwParams {
            n,
            mode,
            olo: OloKind::Fpl { perturbation_scale: None },
            sigma: 4.0,
            horizon: 100,
            seed: 1,
            ledger: LedgerSource::Exact,
        }
    }

    #[test]
    fn single_learner_plays_its_prediction() {
        let set = DecisionSet::unit_ball(2).unwrap();
        let loss = ConvexLoss::squared_distance(dvector![0.2, 0.1], &set).unwrap();
        let mut sfw = ProjectionFreeOco::new(set.clone(), params(1, SfwMode::StochasticGradient)).unwrap();
        let mut shadow = OloSpec {
            kind: OloKind::Fpl { perturbation_scale: None },
            sigma: 4.0,
            horizon: 100,
        }
        .build(&set, child_seed(1, 0))
        .unwrap();
        for _ in 0..20 {
            let x = sfw.round(|at| loss.grad(at), &loss).unwrap();
            let p = shadow.predict().unwrap();
            assert_eq!(x, p);
            shadow.update(&loss.grad(&Point::zeros(2)).unwrap()).unwrap();
        }
    }

    #[test]
    fn stochastic_rounds_are_feasible_and_counted() {
        let set = DecisionSet::hyperbox(dvector![1.0, 2.0], dvector![0.5, 0.25]).unwrap();
        let loss = ConvexLoss::squared_distance(dvector![1.2, 2.1], &set).unwrap();
        let mut sfw = ProjectionFreeOco::new(set.clone(), params(7, SfwMode::StochasticGradient)).unwrap();
        let mut oracle = NoisyGradientOracle::new(0.5, 3).unwrap();
        sfw.record_calls();
        for _ in 0..50 {
            let x = sfw.round(|at| oracle.query(&loss, at), &loss).unwrap();
            assert!(set.contains(&x));
        }
        assert_eq!(oracle.query_count(), 7 * 50);
        assert_eq!(sfw.ledger().query_count, 7 * 50);
        assert_eq!(sfw.ledger().rounds(), 50);
        sfw.calls().unwrap().check_predict_first().unwrap();
    }

    #[test]
    fn oracle_errors_propagate() {
        let set = DecisionSet::unit_ball(2).unwrap();
        let loss = ConvexLoss::squared_distance(Point::zeros(2), &set).unwrap();
        let mut sfw = ProjectionFreeOco::new(set, params(3, SfwMode::StochasticGradient)).unwrap();
        let err = sfw
            .round(|_| Err(Error::Oracle("unavailable".into())), &loss)
            .unwrap_err();
        assert_eq!(err, Error::Oracle("unavailable".into()));
        let mut wrong = ProjectionFreeOco::new(
            DecisionSet::unit_ball(2).unwrap(),
            params(3, SfwMode::StochasticGradient),
        )
        .unwrap();
        assert!(matches!(
            wrong.round(|_| Ok(dvector![1.0]), &loss),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_loss_bandit_estimates_vanish() {
        let set = DecisionSet::ball(Point::zeros(2), 4.0).unwrap();
        let zero = ConvexLoss::linear(Point::zeros(2), &set).unwrap();
        let mut oracle = NoisyBanditOracle::new(zero, 0.0, 0).unwrap();
        let mut sfw = ProjectionFreeOco::new(set.clone(), params(5, SfwMode::BanditFkm { delta: 3.0 })).unwrap();
        for _ in 0..10 {
            let x = sfw.bandit_round(&mut oracle).unwrap();
            assert!(set.contains(&x));
        }
        assert_eq!(sfw.estimates().max_norm, 0.0);
        assert_eq!(oracle.query_count(), 50);
    }

    #[test]
    fn bandit_mode_validates_geometry() {
        let set = DecisionSet::unit_ball(2).unwrap();
        assert!(ProjectionFreeOco::new(set, params(2, SfwMode::BanditFkm { delta: 1.0 })).is_err());
        let off_origin = DecisionSet::ball(dvector![5.0, 5.0], 1.0).unwrap();
        assert!(ProjectionFreeOco::new(off_origin, params(2, SfwMode::BanditFkm { delta: 0.1 })).is_err());
    }

    #[test]
    fn bandit_rounds_stay_feasible_within_budget() {
        let set = DecisionSet::unit_ball(3).unwrap();
        let horizon = 400;
        let (n, delta) = bandit_parameters(horizon);
        let loss = ConvexLoss::squared_distance(dvector![0.3, -0.2, 0.1], &set).unwrap();
        let m = loss.constants().bound;
        let mut oracle = NoisyBanditOracle::new(loss, 0.1, 8).unwrap();
        let mut sfw = ProjectionFreeOco::new(
            set.clone(),
            SfwParams {
                n,
                mode: SfwMode::BanditFkm { delta },
                olo: OloKind::Fpl { perturbation_scale: None },
                sigma: noisy_estimate_bound(3, m, delta),
                horizon,
                seed: 2,
                ledger: LedgerSource::Exact,
            },
        )
        .unwrap();
        sfw.record_calls();
        for _ in 0..horizon {
            let x = sfw.bandit_round(&mut oracle).unwrap();
            assert!(set.contains(&x));
        }
        assert_eq!(oracle.query_count(), n as u64 * horizon);
        assert_eq!(sfw.estimates().violations, 0);
        sfw.calls().unwrap().check_predict_first().unwrap();
    }

    #[test]
    fn mode_mismatch_is_a_protocol_error() {
        let set = DecisionSet::unit_ball(2).unwrap();
        let loss = ConvexLoss::squared_distance(Point::zeros(2), &set).unwrap();
        let mut oracle = NoisyBanditOracle::new(loss.clone(), 0.0, 0).unwrap();
        let mut stochastic = ProjectionFreeOco::new(set.clone(), params(2, SfwMode::StochasticGradient)).unwrap();
        assert!(matches!(stochastic.bandit_round(&mut oracle), Err(Error::Protocol(_))));
        let mut bandit = ProjectionFreeOco::new(set, params(2, SfwMode::BanditFkm { delta: 0.5 })).unwrap();
        assert!(matches!(bandit.round(|a| loss.grad(a), &loss), Err(Error::Protocol(_))));
    }

    #[test]
    fn converges_on_a_fixed_quadratic() {
        let set = DecisionSet::unit_ball(2).unwrap();
        let target = dvector![0.3, -0.2];
        let loss = ConvexLoss::squared_distance(target, &set).unwrap();
        let c = loss.constants();
        let horizon = 2000;
        let d = set.diameter();
        let n = choose_n(c.smoothness, d, c.lipschitz, horizon).unwrap();
        let mut sfw = ProjectionFreeOco::new(
            set,
            SfwParams {
                n,
                mode: SfwMode::StochasticGradient,
                olo: OloKind::Fpl { perturbation_scale: None },
                sigma: c.lipschitz,
                horizon,
                seed: 5,
                ledger: LedgerSource::Exact,
            },
        )
        .unwrap();
        for _ in 0..horizon {
            sfw.round(|at| loss.grad(at), &loss).unwrap();
        }
        let tail = &sfw.ledger().per_round_losses[(horizon as usize - 200)..];
        let avg = tail.iter().sum::<f64>() / 200.0;
        // Minimum value is 0 at the interior target.
        assert!(avg <= 0.05 * c.smoothness * d * d, "tail average {avg}");
    }

    #[test]
    fn regret_examples() {
        let mut ledger = RegretLedger::new();
        ledger.record(5.0);
        assert_eq!(regret(&ledger, 3.0), 2.0);
        let mut same = RegretLedger::new();
        same.record(1.5);
        same.record(2.5);
        assert_eq!(regret(&same, 4.0), 0.0);
    }

    #[test]
    fn quadratic_aggregate_matches_closed_forms() {
        let ball = DecisionSet::unit_ball(2).unwrap();
        let targets = [dvector![0.5, 0.5], dvector![1.5, 0.0], dvector![0.1, -0.9]];
        let losses: Vec<ConvexLoss> = targets
            .iter()
            .map(|t| ConvexLoss::squared_distance(t.clone(), &ball).unwrap())
            .collect();
        let (x, value) = best_fixed_point(&losses, &ball).unwrap();
        // Σ‖x − cₜ‖² is minimized over any convex set at Π(mean of cₜ).
        let mean = targets.iter().fold(Point::zeros(2), |acc, t| acc + t) / 3.0;
        let expected = ball.project(&mean).unwrap();
        assert!((&x - &expected).norm() < 1e-9);
        let direct: f64 = losses.iter().map(|l| l.eval(&x).unwrap()).sum();
        assert!((value - direct).abs() < 1e-9);

        let gs = [dvector![1.0, 2.0], dvector![-0.5, 0.25]];
        let linear: Vec<ConvexLoss> = gs
            .iter()
            .map(|g| ConvexLoss::linear(g.clone(), &ball).unwrap())
            .collect();
        let (xl, vl) = best_fixed_point(&linear, &ball).unwrap();
        let (xo, vo) = offline_linear_optimum(&gs, &ball).unwrap();
        assert!((&xl - &xo).norm() < 1e-12 && (vl - vo).abs() < 1e-12);
    }

    #[test]
    fn quadratic_aggregate_beats_sampled_points() {
        let mut rng = seeded_rng(17, 0);
        let rect = DecisionSet::hyperbox(Point::zeros(2), dvector![1.0, 0.5]).unwrap();
        let q = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 0.5]);
        let losses = vec![
            ConvexLoss::quadratic(q, dvector![2.0, 2.0], &rect).unwrap(),
            ConvexLoss::linear(dvector![-1.0, 3.0], &rect).unwrap(),
            ConvexLoss::squared_distance(dvector![0.9, -0.4], &rect).unwrap(),
        ];
        let (_, best) = best_fixed_point(&losses, &rect).unwrap();
        for _ in 0..5000 {
            let x = rect.sample(&mut rng);
            let total: f64 = losses.iter().map(|l| l.eval(&x).unwrap()).sum();
            assert!(best <= total + 1e-9);
        }
    }
}

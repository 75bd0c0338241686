//! Online gradient boosting from noisy bandit feedback.
//!
//! `N` weak learners are combined by the same Frank-Wolfe blend as
//! [`crate::sfw`], with examples:
//!
//! ```text
//! y⁰ = 0
//! for i = 1..N:
//!     yⁱ = (1 − ηᵢ)·yⁱ⁻¹ + (ηᵢ/γ)·Aᵢ.predict(xₜ)
//!     draw unit v
//!     gᵢ = (d/δ)·ℓ̃ₜ(yⁱ⁻¹ + δv)·v
//!     Aᵢ.update(xₜ, gᵢ)
//! output Π_Y(yᴺ), observe ℓ̃ₜ of it
//! ```
//!
//! A weak learner only has to handle linear losses `y ↦ g·y` with full
//! information about `g`; the booster turns that into a learner for convex
//! losses observed through noisy values alone. Learners play on `Y` shrunk by
//! `δ` so that every query `yⁱ⁻¹ + δv` lies in `Y`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::geometry::DecisionSet;
use crate::losses::{
    fkm_estimate, noisy_estimate_bound, sphere_sample, ConvexLoss, EstimateStats,
    NoisyBanditOracle,
};
use crate::olo::RegretLedger;
use crate::sfw::step_length;
use crate::trace::{CallKind, CallLog};
use crate::{check_dim, check_finite, seeded_rng, Error, Point, Result, SeededRng};

/// An online learner for linear losses over a label set.
///
/// Calls alternate strictly: `predict(x)` then `update(x, g)` with the
/// coefficients of the linear loss charged for that prediction.
pub trait WeakLearner {
    fn predict(&mut self, x: &Point) -> Result<Point>;
    fn update(&mut self, x: &Point, g: &Point) -> Result<()>;
    /// Number of updates consumed so far.
    fn updates(&self) -> u64;
}

/// Step size `lr · t^(-decay)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRate {
    pub lr: f64,
    pub decay: f64,
}

impl LearningRate {
    pub fn at(&self, t: u64) -> f64 {
        self.lr * (t.max(1) as f64).powf(-self.decay)
    }
}

/// How a [`LinearWeakLearner`] turns a linear loss into a parameter step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateRule {
    /// The exact parameter gradient `g xᵀ` of `g·(Wx)`.
    ExactGradient,
    /// A spherical one-point estimate of `g` around the prediction, with the
    /// given smoothing radius.
    Fkm { delta: f64 },
}

/// Linear model `x ↦ Π_Y(Wx)` trained by online gradient descent.
#[derive(Debug, Clone)]
pub struct LinearWeakLearner {
    weights: DMatrix<f64>,
    set: DecisionSet,
    rate: LearningRate,
    rule: UpdateRule,
    weight_cap: f64,
    grad_cap: f64,
    rng: SeededRng,
    updates: u64,
    pending: Option<Point>,
}

impl LinearWeakLearner {
    pub const DEFAULT_WEIGHT_CAP: f64 = 1e3;

    /// A zero-initialized learner mapping `input_dim` features into `set`.
    pub fn new(input_dim: usize, set: DecisionSet, rate: LearningRate) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input_dim", "must be positive"));
        }
        if !(rate.lr.is_finite() && rate.lr > 0.0 && rate.decay.is_finite() && rate.decay >= 0.0) {
            return Err(Error::invalid(
                "learning_rate",
                format!("need lr > 0 and decay ≥ 0, got {} and {}", rate.lr, rate.decay),
            ));
        }
        Ok(Self {
            weights: DMatrix::zeros(set.dim(), input_dim),
            set,
            rate,
            rule: UpdateRule::ExactGradient,
            weight_cap: Self::DEFAULT_WEIGHT_CAP,
            grad_cap: f64::INFINITY,
            rng: seeded_rng(0, 0x7765616b),
            updates: 0,
            pending: None,
        })
    }

    pub fn with_rule(mut self, rule: UpdateRule, seed: u64) -> Self {
        self.rule = rule;
        self.rng = seeded_rng(seed, 0x7765616b);
        self
    }

    /// Entries of `W` are clipped to `[-cap, cap]` after every step.
    pub fn with_weight_cap(mut self, cap: f64) -> Self {
        self.weight_cap = cap;
        self
    }

    /// Received coefficient vectors are rescaled to norm at most `cap`.
    pub fn with_gradient_cap(mut self, cap: f64) -> Self {
        self.grad_cap = cap;
        self
    }

    pub fn with_weights(mut self, weights: DMatrix<f64>) -> Result<Self> {
        if weights.shape() != self.weights.shape() {
            return Err(Error::invalid(
                "weights",
                format!("expected shape {:?}, got {:?}", self.weights.shape(), weights.shape()),
            ));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn set(&self) -> &DecisionSet {
        &self.set
    }

    /// `Π_Y(Wx)` without touching the alternation state.
    pub fn peek(&self, x: &Point) -> Result<Point> {
        check_dim(self.weights.ncols(), x.len())?;
        check_finite("x", x.as_slice())?;
        self.set.project(&(&self.weights * x))
    }
}

impl WeakLearner for LinearWeakLearner {
    fn predict(&mut self, x: &Point) -> Result<Point> {
        if self.pending.is_some() {
            return Err(Error::Protocol("weak learner predicted twice without an update".into()));
        }
        let y = self.peek(x)?;
        self.pending = Some(y.clone());
        Ok(y)
    }

    fn update(&mut self, x: &Point, g: &Point) -> Result<()> {
        check_dim(self.weights.ncols(), x.len())?;
        check_dim(self.weights.nrows(), g.len())?;
        check_finite("x", x.as_slice())?;
        check_finite("g", g.as_slice())?;
        let Some(prediction) = self.pending.take() else {
            return Err(Error::Protocol("weak learner updated without a prediction".into()));
        };
        let norm = g.norm();
        let mut g = if norm > self.grad_cap {
            g * (self.grad_cap / norm)
        } else {
            g.clone()
        };
        if let UpdateRule::Fkm { delta } = self.rule {
            let u = sphere_sample(g.len(), &mut self.rng);
            let value = g.dot(&(prediction + &u * delta));
            g = fkm_estimate(value, &u, delta);
        }
        self.updates += 1;
        let step = self.rate.at(self.updates);
        self.weights.ger(-step, &g, x, 1.0);
        let cap = self.weight_cap;
        self.weights.apply(|w| *w = w.clamp(-cap, cap));
        Ok(())
    }

    fn updates(&self) -> u64 {
        self.updates
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoosterParams {
    /// Weak learner advantage `γ ≥ 1`.
    pub gamma: f64,
    /// Smoothing radius for bandit rounds. `None` restricts the booster to
    /// full-information rounds on the whole set.
    pub delta: Option<f64>,
}

/// State of the online booster.
#[derive(Debug, Clone)]
pub struct Booster<L> {
    learners: Vec<L>,
    set: DecisionSet,
    play_set: DecisionSet,
    gamma: f64,
    delta: Option<f64>,
    round: u64,
    ledger: RegretLedger,
    estimates: EstimateStats,
    calls: Option<CallLog>,
}

impl<L: WeakLearner> Booster<L> {
    /// The set weak learners must predict in: `Y` shrunk for spherical
    /// queries of radius `delta`, or `Y` itself without one.
    pub fn play_set_for(set: &DecisionSet, delta: Option<f64>) -> Result<DecisionSet> {
        let origin = Point::zeros(set.dim());
        if !set.contains(&origin) {
            return Err(Error::invalid("set", "the label set must contain the origin"));
        }
        let inner = match delta {
            Some(delta) => set.shrink_for_queries(delta)?,
            None => set.clone(),
        };
        if !inner.contains(&origin) {
            return Err(Error::invalid("set", "the shrunk label set must contain the origin"));
        }
        Ok(inner)
    }

    pub fn new(learners: Vec<L>, set: DecisionSet, params: BoosterParams) -> Result<Self> {
        if learners.is_empty() {
            return Err(Error::invalid("n", "need at least one weak learner"));
        }
        if !(params.gamma.is_finite() && params.gamma >= 1.0) {
            return Err(Error::invalid("gamma", format!("must be at least 1, got {}", params.gamma)));
        }
        let play_set = Self::play_set_for(&set, params.delta)?;
        Ok(Self {
            learners,
            set,
            play_set,
            gamma: params.gamma,
            delta: params.delta,
            round: 0,
            ledger: RegretLedger::new(),
            estimates: EstimateStats::default(),
            calls: None,
        })
    }

    pub fn record_calls(&mut self) {
        self.calls = Some(CallLog::default());
    }

    pub fn calls(&self) -> Option<&CallLog> {
        self.calls.as_ref()
    }

    pub fn n(&self) -> usize {
        self.learners.len()
    }

    pub fn learners(&self) -> &[L] {
        &self.learners
    }

    pub fn set(&self) -> &DecisionSet {
        &self.set
    }

    pub fn play_set(&self) -> &DecisionSet {
        &self.play_set
    }

    /// Rounds (examples) consumed so far.
    pub fn rounds(&self) -> u64 {
        self.round
    }

    pub fn ledger(&self) -> &RegretLedger {
        &self.ledger
    }

    pub fn estimates(&self) -> &EstimateStats {
        &self.estimates
    }

    /// One round from noisy bandit feedback: `N` estimate queries plus one
    /// query at the output. Returns the output `yₜ`.
    pub fn boost_round<R: Rng + ?Sized>(
        &mut self,
        x: &Point,
        oracle: &mut NoisyBanditOracle,
        rng: &mut R,
    ) -> Result<Point> {
        let Some(delta) = self.delta else {
            return Err(Error::Protocol("bandit round on a full-information booster".into()));
        };
        let d = self.set.dim();
        check_dim(d, oracle.loss().dim())?;
        let bound = noisy_estimate_bound(d, oracle.loss().constants().bound, delta);
        let estimates = &mut self.estimates;
        let y = blend(
            &mut self.learners,
            &self.set,
            self.gamma,
            &mut self.calls,
            self.round + 1,
            x,
            |prev, log| {
                let v = sphere_sample(d, rng);
                log(CallKind::DrawDirection);
                let value = oracle.noisy_eval(&(prev + &v * delta))?;
                log(CallKind::Feedback);
                let g = fkm_estimate(value, &v, delta);
                estimates.observe(&g, bound);
                Ok(g)
            },
        )?;
        self.round += 1;
        let feedback = oracle.noisy_eval(&y)?;
        self.ledger.query_count += self.learners.len() as u64 + 1;
        self.ledger.record_feedback(feedback);
        self.ledger.record(oracle.loss().eval(&y)?);
        Ok(y)
    }

    /// One round with exact gradients of `loss` in place of the spherical
    /// estimates.
    pub fn boost_round_full_info(&mut self, x: &Point, loss: &ConvexLoss) -> Result<Point> {
        check_dim(self.set.dim(), loss.dim())?;
        let y = blend(
            &mut self.learners,
            &self.set,
            self.gamma,
            &mut self.calls,
            self.round + 1,
            x,
            |prev, log| {
                log(CallKind::Feedback);
                loss.grad(prev)
            },
        )?;
        self.round += 1;
        let value = loss.eval(&y)?;
        self.ledger.query_count += self.learners.len() as u64 + 1;
        self.ledger.record_feedback(value);
        self.ledger.record(value);
        Ok(y)
    }
}

fn blend<L, Q>(
    learners: &mut [L],
    set: &DecisionSet,
    gamma: f64,
    calls: &mut Option<CallLog>,
    round: u64,
    x: &Point,
    mut feedback: Q,
) -> Result<Point>
where
    L: WeakLearner,
    Q: FnMut(&Point, &mut dyn FnMut(CallKind)) -> Result<Point>,
{
    // Progressive validation: no learner may have seen this example yet.
    if let Some((i, l)) = learners
        .iter()
        .enumerate()
        .find(|(_, l)| l.updates() != round - 1)
    {
        return Err(Error::Protocol(format!(
            "learner {i} has consumed {} updates before round {round}",
            l.updates()
        )));
    }
    let mut prev = Point::zeros(set.dim());
    for (i, learner) in learners.iter_mut().enumerate() {
        let mut log = |kind| {
            if let Some(c) = calls.as_mut() {
                c.push(round, i, kind);
            }
        };
        let p = learner.predict(x)?;
        log(CallKind::Predict);
        check_dim(set.dim(), p.len())?;
        if !set.contains(&p) {
            return Err(Error::InfeasiblePrediction {
                index: i,
                distance: set.distance(&p)?,
            });
        }
        let eta = step_length(i + 1);
        let next = &prev * (1.0 - eta) + &p * (eta / gamma);
        let g = feedback(&prev, &mut log)?;
        learner.update(x, &g)?;
        log(CallKind::Update);
        prev = next;
    }
    set.project(&prev)
}

/// `Σ ℓₜ(yₜ) − comparator`, the regret against a fixed policy whose total
/// loss on the same stream is `comparator`.
pub fn policy_regret(ledger: &RegretLedger, comparator: f64) -> f64 {
    ledger.learner_loss_sum - comparator
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn interval() -> DecisionSet {
        DecisionSet::cube(1, -1.0, 1.0).unwrap()
    }

    fn rate(lr: f64, decay: f64) -> LearningRate {
        LearningRate { lr, decay }
    }

    #[test]
    fn weak_predict_examples() {
        let set = DecisionSet::unit_ball(2).unwrap();
        let mut zero = LinearWeakLearner::new(3, set.clone(), rate(0.1, 0.5)).unwrap();
        assert_eq!(zero.predict(&dvector![1.0, 2.0, 3.0]).unwrap(), Point::zeros(2));

        let identity = LinearWeakLearner::new(2, set.clone(), rate(0.1, 0.5))
            .unwrap()
            .with_weights(DMatrix::identity(2, 2))
            .unwrap();
        let x = dvector![0.3, -0.4];
        assert_eq!(identity.peek(&x).unwrap(), x);

        let big = LinearWeakLearner::new(2, set.clone(), rate(0.1, 0.5))
            .unwrap()
            .with_weights(DMatrix::from_row_slice(2, 2, &[5.0, -3.0, 2.0, 7.0]))
            .unwrap();
        assert!(set.contains(&big.peek(&dvector![1.0, 1.0]).unwrap()));
        assert!(big.peek(&dvector![1.0]).is_err());
        assert!(big.peek(&dvector![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn weak_update_examples() {
        let set = DecisionSet::cube(1, -10.0, 10.0).unwrap();
        let x = dvector![3.0];

        let mut scalar = LinearWeakLearner::new(1, set.clone(), rate(0.1, 0.0)).unwrap();
        scalar.predict(&x).unwrap();
        scalar.update(&x, &dvector![2.0]).unwrap();
        assert!((scalar.weights()[(0, 0)] + 0.6).abs() < 1e-12);

        let mut still = LinearWeakLearner::new(1, set.clone(), rate(0.1, 0.0)).unwrap();
        still.predict(&x).unwrap();
        still.update(&x, &dvector![0.0]).unwrap();
        assert_eq!(still.weights()[(0, 0)], 0.0);

        let mut twice = LinearWeakLearner::new(1, set, rate(0.1, 0.0)).unwrap();
        for _ in 0..2 {
            twice.predict(&x).unwrap();
            twice.update(&x, &dvector![2.0]).unwrap();
        }
        assert!((twice.weights()[(0, 0)] + 1.2).abs() < 1e-12);
    }

    #[test]
    fn weak_update_rejects_bad_input() {
        let mut l = LinearWeakLearner::new(2, interval(), rate(0.1, 0.5)).unwrap();
        assert!(matches!(l.update(&dvector![1.0, 1.0], &dvector![1.0]), Err(Error::Protocol(_))));
        l.predict(&dvector![1.0, 1.0]).unwrap();
        assert!(matches!(l.predict(&dvector![1.0, 1.0]), Err(Error::Protocol(_))));
        assert_eq!(
            l.update(&dvector![1.0, 1.0], &dvector![f64::INFINITY]),
            Err(Error::NonFinite("g"))
        );
        assert!(LinearWeakLearner::new(2, interval(), rate(0.0, 0.5)).is_err());
    }

    #[test]
    fn caps_bound_steps_and_weights() {
        let set = DecisionSet::cube(1, -10.0, 10.0).unwrap();
        let x = dvector![1.0];
        let mut l = LinearWeakLearner::new(1, set, rate(1.0, 0.0))
            .unwrap()
            .with_gradient_cap(0.5)
            .with_weight_cap(1.2);
        l.predict(&x).unwrap();
        l.update(&x, &dvector![-100.0]).unwrap();
        assert!((l.weights()[(0, 0)] - 0.5).abs() < 1e-12);
        for _ in 0..5 {
            l.predict(&x).unwrap();
            l.update(&x, &dvector![-100.0]).unwrap();
        }
        assert_eq!(l.weights()[(0, 0)], 1.2);
    }

    #[test]
    fn fkm_rule_is_unbiased_for_linear_losses() {
        let set = DecisionSet::cube(2, -5.0, 5.0).unwrap();
        let x = dvector![1.0];
        let g = dvector![0.7, -0.3];
        let n = 200_000;
        let mut mean = DMatrix::zeros(2, 1);
        for s in 0..n {
            let mut l = LinearWeakLearner::new(1, set.clone(), rate(1.0, 0.0))
                .unwrap()
                .with_rule(UpdateRule::Fkm { delta: 0.5 }, s);
            l.predict(&x).unwrap();
            l.update(&x, &g).unwrap();
            mean -= l.weights();
        }
        mean /= n as f64;
        assert!((mean[(0, 0)] - 0.7).abs() < 0.02 && (mean[(1, 0)] + 0.3).abs() < 0.02, "{mean}");
    }

    fn learners(n: usize, input_dim: usize, set: &DecisionSet) -> Vec<LinearWeakLearner> {
        (0..n)
            .map(|_| LinearWeakLearner::new(input_dim, set.clone(), rate(0.05, 0.5)).unwrap())
            .collect()
    }

    #[test]
    fn single_learner_output_is_its_projected_prediction() {
        let y_set = DecisionSet::cube(1, -2.0, 2.0).unwrap();
        let params = BoosterParams { gamma: 1.0, delta: Some(0.5) };
        let play = Booster::<LinearWeakLearner>::play_set_for(&y_set, params.delta).unwrap();
        let mut booster = Booster::new(learners(1, 2, &play), y_set.clone(), params).unwrap();
        let mut rng = seeded_rng(0, 0);
        let target = dvector![0.8];
        let loss = ConvexLoss::squared_distance(target, &y_set).unwrap();
        let mut oracle = NoisyBanditOracle::new(loss, 0.1, 1).unwrap();
        for t in 0..30 {
            let x = dvector![1.0, (t as f64 * 0.7).sin()];
            let expected = y_set.project(&booster.learners()[0].peek(&x).unwrap()).unwrap();
            let y = booster.boost_round(&x, &mut oracle, &mut rng).unwrap();
            assert_eq!(y, expected);
        }
    }

    #[test]
    fn rounds_respect_budget_feasibility_and_order() {
        let y_set = DecisionSet::ball(Point::zeros(2), 1.5).unwrap();
        let params = BoosterParams { gamma: 1.0, delta: Some(0.5) };
        let play = Booster::<LinearWeakLearner>::play_set_for(&y_set, params.delta).unwrap();
        let n = 6;
        let mut booster = Booster::new(learners(n, 3, &play), y_set.clone(), params).unwrap();
        booster.record_calls();
        let mut rng = seeded_rng(4, 0);
        let first = ConvexLoss::squared_distance(dvector![0.2, 0.4], &y_set).unwrap();
        let mut oracle = NoisyBanditOracle::new(first, 0.1, 2).unwrap();
        for t in 0..100u64 {
            let label = dvector![(t as f64).cos() * 0.5, 0.3];
            oracle
                .replace_loss(ConvexLoss::squared_distance(label, &y_set).unwrap())
                .unwrap();
            let before = oracle.query_count();
            let x = dvector![1.0, (t as f64).sin(), 0.5];
            let y = booster.boost_round(&x, &mut oracle, &mut rng).unwrap();
            assert!(y_set.contains(&y));
            assert_eq!(oracle.query_count() - before, n as u64 + 1);
        }
        assert_eq!(booster.ledger().query_count, 100 * (n as u64 + 1));
        assert_eq!(booster.estimates().violations, 0);
        assert_eq!(booster.estimates().count, 100 * n as u64);
        booster.calls().unwrap().check_predict_first().unwrap();
    }

    struct Rogue;

    impl WeakLearner for Rogue {
        fn predict(&mut self, _: &Point) -> Result<Point> {
            Ok(dvector![5.0])
        }
        fn update(&mut self, _: &Point, _: &Point) -> Result<()> {
            Ok(())
        }
        fn updates(&self) -> u64 {
            0
        }
    }

    #[test]
    fn infeasible_prediction_names_the_learner() {
        let y_set = interval();
        let loss = ConvexLoss::squared_distance(dvector![0.0], &y_set).unwrap();
        let mut booster = Booster::new(vec![Rogue], y_set, BoosterParams { gamma: 1.0, delta: None }).unwrap();
        match booster.boost_round_full_info(&dvector![1.0], &loss) {
            Err(Error::InfeasiblePrediction { index: 0, distance }) => assert!((distance - 4.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn configuration_is_validated() {
        let y_set = interval();
        let p = |gamma, delta| BoosterParams { gamma, delta };
        assert!(Booster::new(Vec::<LinearWeakLearner>::new(), y_set.clone(), p(1.0, None)).is_err());
        assert!(Booster::new(learners(2, 1, &y_set), y_set.clone(), p(0.5, None)).is_err());
        assert!(Booster::new(learners(2, 1, &y_set), y_set.clone(), p(1.0, Some(1.0))).is_err());
        let shifted = DecisionSet::cube(1, 1.0, 29.0).unwrap();
        assert!(Booster::new(learners(2, 1, &shifted), shifted, p(1.0, None)).is_err());
        let mut full = Booster::new(learners(2, 1, &y_set), y_set.clone(), p(1.0, None)).unwrap();
        let loss = ConvexLoss::squared_distance(dvector![0.5], &y_set).unwrap();
        let mut oracle = NoisyBanditOracle::new(loss, 0.0, 0).unwrap();
        let mut rng = seeded_rng(0, 0);
        assert!(matches!(
            full.boost_round(&dvector![1.0], &mut oracle, &mut rng),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn full_information_rounds_learn_a_constant() {
        let y_set = interval();
        let params = BoosterParams { gamma: 1.0, delta: None };
        let mut booster = Booster::new(learners(5, 1, &y_set), y_set.clone(), params).unwrap();
        let loss = ConvexLoss::squared_distance(dvector![0.4], &y_set).unwrap();
        for _ in 0..3000 {
            booster.boost_round_full_info(&dvector![1.0], &loss).unwrap();
        }
        let tail = &booster.ledger().per_round_losses[2900..];
        assert!(tail.iter().sum::<f64>() / 100.0 < 0.01);
    }

    #[test]
    fn policy_regret_examples() {
        let mut ledger = RegretLedger::new();
        ledger.record(5.0);
        assert_eq!(policy_regret(&ledger, 3.0), 2.0);
        assert_eq!(policy_regret(&ledger, 5.0), 0.0);
    }
}

//! Online linear optimizers and regret bookkeeping.
//!
//! An online linear optimizer plays a point of its set, then observes a
//! linear loss `x ↦ g·x` through its coefficient vector `g`. Calls must
//! strictly alternate `predict`, `update`, `predict`, ... so no learner can
//! see a loss before committing to the point it is charged for.

use log::warn;
use rand::Rng;

use crate::geometry::DecisionSet;
use crate::{check_dim, seeded_rng, Error, Point, Result, SeededRng};

pub trait OnlineLinearOptimizer {
    fn predict(&mut self) -> Result<Point>;
    fn update(&mut self, g: &Point) -> Result<()>;
    fn set(&self) -> &DecisionSet;
    /// Number of updates consumed so far.
    fn rounds(&self) -> u64;
}

/// Tracks whether a prediction is awaiting its update.
#[derive(Debug, Clone, Copy, Default)]
struct Alternation {
    pending: bool,
}

impl Alternation {
    fn begin(&mut self) -> Result<()> {
        if self.pending {
            return Err(Error::Protocol("predict called twice without an update".into()));
        }
        self.pending = true;
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        if !self.pending {
            return Err(Error::Protocol("update called without a pending prediction".into()));
        }
        self.pending = false;
        Ok(())
    }
}

fn warn_if_unbounded(g: &Point, sigma: f64) {
    let norm = g.norm();
    if norm > sigma * (1.0 + 1e-9) {
        warn!("linear loss norm {norm:.4} exceeds the declared bound {sigma:.4}");
    }
}

/// Follow the perturbed leader: plays the linear minimizer of the cumulative
/// coefficients plus a fresh perturbation drawn uniformly from `[0, scale]^d`
/// every round.
#[derive(Debug, Clone)]
pub struct FollowPerturbedLeader {
    set: DecisionSet,
    grad_sum: Point,
    perturbation_scale: f64,
    sigma: f64,
    rng: SeededRng,
    rounds: u64,
    turn: Alternation,
}

impl FollowPerturbedLeader {
    pub fn new(set: DecisionSet, perturbation_scale: f64, sigma: f64, seed: u64) -> Result<Self> {
        if !(perturbation_scale.is_finite() && perturbation_scale >= 0.0) {
            return Err(Error::invalid(
                "perturbation_scale",
                format!("must be nonnegative, got {perturbation_scale}"),
            ));
        }
        Ok(Self {
            grad_sum: Point::zeros(set.dim()),
            set,
            perturbation_scale,
            sigma,
            rng: seeded_rng(seed, 0x66706c),
            rounds: 0,
            turn: Alternation::default(),
        })
    }

    /// Default perturbation scale `1/ε = D·√T` for a planned horizon `T`.
    pub fn default_scale(set: &DecisionSet, horizon: u64) -> f64 {
        set.diameter() * (horizon.max(1) as f64).sqrt()
    }

    pub fn grad_sum(&self) -> &Point {
        &self.grad_sum
    }
}

impl OnlineLinearOptimizer for FollowPerturbedLeader {
    fn predict(&mut self) -> Result<Point> {
        self.turn.begin()?;
        let scale = self.perturbation_scale;
        let perturbed = if scale > 0.0 {
            let rng = &mut self.rng;
            self.grad_sum.map(|s| s + scale * rng.random::<f64>())
        } else {
            self.grad_sum.clone()
        };
        self.set.linear_minimize(&perturbed)
    }

    fn update(&mut self, g: &Point) -> Result<()> {
        check_dim(self.set.dim(), g.len())?;
        self.turn.finish()?;
        warn_if_unbounded(g, self.sigma);
        self.grad_sum += g;
        self.rounds += 1;
        Ok(())
    }

    fn set(&self) -> &DecisionSet {
        &self.set
    }

    fn rounds(&self) -> u64 {
        self.rounds
    }
}

/// Projected online gradient descent with step `η_t = step_scale / √t`,
/// started at the set's center.
#[derive(Debug, Clone)]
pub struct OnlineGradientDescent {
    set: DecisionSet,
    current: Point,
    step_scale: f64,
    sigma: f64,
    rounds: u64,
    turn: Alternation,
}

impl OnlineGradientDescent {
    pub fn new(set: DecisionSet, step_scale: f64, sigma: f64) -> Result<Self> {
        if !(step_scale.is_finite() && step_scale > 0.0) {
            return Err(Error::invalid("step_scale", format!("must be positive, got {step_scale}")));
        }
        Ok(Self {
            current: set.center().clone(),
            set,
            step_scale,
            sigma,
            rounds: 0,
            turn: Alternation::default(),
        })
    }

    /// `D/σ`, giving `η_t = D/(σ√t)`.
    pub fn default_scale(set: &DecisionSet, sigma: f64) -> f64 {
        set.diameter() / sigma
    }

    pub fn current(&self) -> &Point {
        &self.current
    }
}

impl OnlineLinearOptimizer for OnlineGradientDescent {
    fn predict(&mut self) -> Result<Point> {
        self.turn.begin()?;
        Ok(self.current.clone())
    }

    fn update(&mut self, g: &Point) -> Result<()> {
        check_dim(self.set.dim(), g.len())?;
        self.turn.finish()?;
        warn_if_unbounded(g, self.sigma);
        self.rounds += 1;
        let eta = self.step_scale / (self.rounds as f64).sqrt();
        self.current = self.set.project(&(&self.current - g * eta))?;
        Ok(())
    }

    fn set(&self) -> &DecisionSet {
        &self.set
    }

    fn rounds(&self) -> u64 {
        self.rounds
    }
}

/// Which base optimizer to build, with optional scale overrides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OloKind {
    Fpl { perturbation_scale: Option<f64> },
    Ogd { step_scale: Option<f64> },
}

impl Default for OloKind {
    fn default() -> Self {
        OloKind::Fpl {
            perturbation_scale: None,
        }
    }
}

/// Everything needed to build a family of independent optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OloSpec {
    pub kind: OloKind,
    /// Declared bound on the norm of the fed coefficients.
    pub sigma: f64,
    /// Planned horizon, used by the default FPL scale.
    pub horizon: u64,
}

impl OloSpec {
    pub fn build(&self, set: &DecisionSet, seed: u64) -> Result<OloState> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid("sigma", format!("must be positive, got {}", self.sigma)));
        }
        Ok(match self.kind {
            OloKind::Fpl { perturbation_scale } => {
                let scale = perturbation_scale
                    .unwrap_or_else(|| FollowPerturbedLeader::default_scale(set, self.horizon));
                OloState::Fpl(Box::new(FollowPerturbedLeader::new(set.clone(), scale, self.sigma, seed)?))
            }
            OloKind::Ogd { step_scale } => {
                let scale = step_scale
                    .unwrap_or_else(|| OnlineGradientDescent::default_scale(set, self.sigma));
                OloState::Ogd(OnlineGradientDescent::new(set.clone(), scale, self.sigma)?)
            }
        })
    }
}

/// A base optimizer of either kind.
#[derive(Debug, Clone)]
pub enum OloState {
    Fpl(Box<FollowPerturbedLeader>),
    Ogd(OnlineGradientDescent),
}

impl OnlineLinearOptimizer for OloState {
    fn predict(&mut self) -> Result<Point> {
        match self {
            OloState::Fpl(a) => a.predict(),
            OloState::Ogd(a) => a.predict(),
        }
    }

    fn update(&mut self, g: &Point) -> Result<()> {
        match self {
            OloState::Fpl(a) => a.update(g),
            OloState::Ogd(a) => a.update(g),
        }
    }

    fn set(&self) -> &DecisionSet {
        match self {
            OloState::Fpl(a) => a.set(),
            OloState::Ogd(a) => a.set(),
        }
    }

    fn rounds(&self) -> u64 {
        match self {
            OloState::Fpl(a) => a.rounds(),
            OloState::Ogd(a) => a.rounds(),
        }
    }
}

/// Best fixed point in hindsight for a sequence of linear losses, and its
/// total loss. Exact, since the total loss is itself linear.
pub fn offline_linear_optimum(gs: &[Point], set: &DecisionSet) -> Result<(Point, f64)> {
    if gs.is_empty() {
        return Err(Error::invalid("gs", "need at least one linear loss"));
    }
    let mut total = Point::zeros(set.dim());
    for g in gs {
        check_dim(set.dim(), g.len())?;
        total += g;
    }
    let x = set.linear_minimize(&total)?;
    let value = total.dot(&x);
    Ok((x, value))
}

/// Running totals for regret and policy regret.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretLedger {
    pub learner_loss_sum: f64,
    pub comparator_loss_sum: f64,
    pub per_round_losses: Vec<f64>,
    /// Observed (possibly noisy) feedback values, when a run records them.
    pub per_round_feedback: Vec<f64>,
    pub query_count: u64,
}

impl RegretLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, loss: f64) {
        self.learner_loss_sum += loss;
        self.per_round_losses.push(loss);
    }

    pub fn record_feedback(&mut self, value: f64) {
        self.per_round_feedback.push(value);
    }

    pub fn record_comparator(&mut self, loss: f64) {
        self.comparator_loss_sum += loss;
    }

    pub fn rounds(&self) -> usize {
        self.per_round_losses.len()
    }

    /// Regret against the comparator totals recorded so far.
    pub fn regret_so_far(&self) -> f64 {
        self.learner_loss_sum - self.comparator_loss_sum
    }

    pub fn average_loss(&self) -> f64 {
        if self.per_round_losses.is_empty() {
            0.0
        } else {
            self.learner_loss_sum / self.per_round_losses.len() as f64
        }
    }
}

/// `Σ ℓ_t(x_t) − comparator_loss`. May be negative on short horizons.
pub fn regret(ledger: &RegretLedger, comparator_loss: f64) -> f64 {
    ledger.learner_loss_sum - comparator_loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::sphere_sample;
    use nalgebra::dvector;

    fn close(a: &Point, b: &Point) -> bool {
        (a - b).norm() <= 1e-12
    }

    #[test]
    fn unperturbed_fpl_follows_the_leader() {
        let set = DecisionSet::ball(Point::zeros(2), 2.0).unwrap();
        let mut fpl = FollowPerturbedLeader::new(set, 0.0, 10.0, 0).unwrap();
        fpl.predict().unwrap();
        fpl.update(&dvector![0.0, 5.0]).unwrap();
        assert!(close(&fpl.predict().unwrap(), &dvector![0.0, -2.0]));
    }

    #[test]
    fn fpl_first_prediction_is_a_member() {
        let set = DecisionSet::cube(3, -1.0, 2.0).unwrap();
        let mut fpl = FollowPerturbedLeader::new(set.clone(), 5.0, 1.0, 3).unwrap();
        assert!(set.contains(&fpl.predict().unwrap()));
    }

    #[test]
    fn fpl_sums_gradients() {
        let set = DecisionSet::unit_ball(2).unwrap();
        let mut fpl = FollowPerturbedLeader::new(set, 1.0, 5.0, 0).unwrap();
        for g in [dvector![1.0, 0.0], dvector![0.0, 2.0]] {
            fpl.predict().unwrap();
            fpl.update(&g).unwrap();
        }
        assert_eq!(fpl.grad_sum(), &dvector![1.0, 2.0]);
        assert_eq!(fpl.rounds(), 2);
    }

    #[test]
    fn ogd_starts_at_center_and_steps() {
        let set = DecisionSet::unit_ball(2).unwrap();
        let mut ogd = OnlineGradientDescent::new(set.clone(), 0.1, 1.0).unwrap();
        assert_eq!(ogd.predict().unwrap(), Point::zeros(2));
        ogd.update(&dvector![1.0, 0.0]).unwrap();
        assert!(close(ogd.current(), &dvector![-0.1, 0.0]));

        let mut far = OnlineGradientDescent::new(set, 5.0, 1.0).unwrap();
        far.predict().unwrap();
        far.update(&dvector![0.0, 1.0]).unwrap();
        assert!(close(far.current(), &dvector![0.0, -1.0]));
    }

    #[test]
    fn alternation_is_enforced() {
        let set = DecisionSet::unit_ball(2).unwrap();
        for kind in [
            OloKind::Fpl { perturbation_scale: None },
            OloKind::Ogd { step_scale: None },
        ] {
            let spec = OloSpec { kind, sigma: 1.0, horizon: 10 };
            let mut olo = spec.build(&set, 0).unwrap();
            assert!(matches!(olo.update(&dvector![1.0, 0.0]), Err(Error::Protocol(_))));
            olo.predict().unwrap();
            assert!(matches!(olo.predict(), Err(Error::Protocol(_))));
            assert!(matches!(olo.update(&dvector![1.0]), Err(Error::DimensionMismatch { .. })));
            olo.update(&dvector![1.0, 0.0]).unwrap();
            olo.predict().unwrap();
        }
    }

    #[test]
    fn offline_optimum_examples() {
        let set = DecisionSet::unit_ball(2).unwrap();
        let (_, v) = offline_linear_optimum(&[dvector![1.0, 0.0], dvector![-1.0, 0.0]], &set).unwrap();
        assert_eq!(v, 0.0);
        let gs = vec![dvector![0.0, 1.0]; 10];
        let (x, v) = offline_linear_optimum(&gs, &set).unwrap();
        assert!(close(&x, &dvector![0.0, -1.0]));
        assert!((v + 10.0).abs() < 1e-12);
        assert!(offline_linear_optimum(&[], &set).is_err());
    }

    #[test]
    fn offline_optimum_beats_sampled_points() {
        let mut rng = seeded_rng(21, 0);
        let set = DecisionSet::hyperbox(dvector![0.5, 0.0, -1.0], dvector![1.0, 2.0, 0.5]).unwrap();
        let gs: Vec<Point> = (0..15).map(|_| sphere_sample(3, &mut rng) * 2.0).collect();
        let (_, best) = offline_linear_optimum(&gs, &set).unwrap();
        for _ in 0..1000 {
            let x = set.sample(&mut rng);
            let total: f64 = gs.iter().map(|g| g.dot(&x)).sum();
            assert!(best <= total + 1e-9);
        }
    }

    #[test]
    fn ledger_arithmetic() {
        let mut ledger = RegretLedger::new();
        ledger.record(5.0);
        assert_eq!(regret(&ledger, 3.0), 2.0);
        assert_eq!(ledger.rounds(), 1);
        ledger.record_comparator(5.0);
        assert_eq!(ledger.regret_so_far(), 0.0);
    }

    fn run_regret(kind: OloKind, horizon: u64, seed: u64) -> f64 {
        let set = DecisionSet::unit_ball(2).unwrap();
        let sigma = 1.0;
        let spec = OloSpec { kind, sigma, horizon };
        let mut olo = spec.build(&set, seed).unwrap();
        let mut rng = seeded_rng(seed, 1);
        let drift = dvector![0.3, -0.2];
        let mut gs = Vec::with_capacity(horizon as usize);
        let mut loss = 0.0;
        for _ in 0..horizon {
            let x = olo.predict().unwrap();
            let g = &drift + sphere_sample(2, &mut rng) * 0.6;
            loss += g.dot(&x);
            olo.update(&g).unwrap();
            gs.push(g);
        }
        let (_, best) = offline_linear_optimum(&gs, &set).unwrap();
        (loss - best) / horizon as f64
    }

    fn mean_average_regret(kind: OloKind, horizon: u64) -> f64 {
        (0..10).map(|s| run_regret(kind, horizon, s)).sum::<f64>() / 10.0
    }

    #[test]
    fn fpl_regret_is_sublinear() {
        let kind = OloKind::Fpl { perturbation_scale: None };
        let (short, long) = (mean_average_regret(kind, 1000), mean_average_regret(kind, 4000));
        assert!(long <= 0.6 * short, "short {short}, long {long}");
    }

    #[test]
    fn ogd_regret_is_sublinear() {
        let kind = OloKind::Ogd { step_scale: None };
        let (short, long) = (mean_average_regret(kind, 1000), mean_average_regret(kind, 4000));
        assert!(long <= 0.6 * short, "short {short}, long {long}");
    }

    #[test]
    fn identical_seeds_reproduce_predictions() {
        let set = DecisionSet::unit_ball(3).unwrap();
        let spec = OloSpec {
            kind: OloKind::Fpl { perturbation_scale: None },
            sigma: 1.0,
            horizon: 50,
        };
        let trace = |seed| {
            let mut olo = spec.build(&set, seed).unwrap();
            let mut out = Vec::new();
            for t in 0..50 {
                let x = olo.predict().unwrap();
                out.extend(x.iter().map(|v| v.to_bits()));
                olo.update(&dvector![(t as f64).sin(), 0.5, -0.25]).unwrap();
            }
            out
        };
        assert_eq!(trace(4), trace(4));
        assert_ne!(trace(4), trace(5));
    }
}

//! Convex losses, noisy bandit feedback and spherical gradient estimation.
//!
//! A [`ConvexLoss`] carries its declared constants (loss bound `M`, Lipschitz
//! constant `L`, smoothness `β`) computed in closed form over a decision set.
//! The constants are declarations; [`ConvexLoss::validate_constants`] checks
//! them by sampling.
//!
//! Bandit learners never see a loss directly. They query a
//! [`NoisyBanditOracle`], which returns `ℓ(y) + w` with `w` uniform on
//! `[-h, h]`, and turn values into gradient estimates with [`fkm_estimate`]:
//! `(d/δ)·ℓ̃(y + δv)·v` is unbiased for the gradient of the smoothed loss
//! `ℓ̂(y) = E_v[ℓ(y + δv)]`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::DecisionSet;
use crate::{check_dim, seeded_rng, Error, Point, Result, SeededRng};

/// Declared constants of a loss over a decision set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConstants {
    /// `M`: `|ℓ(y)| ≤ M` on the set.
    pub bound: f64,
    /// `L` (or `G`): gradient norm bound on the set.
    pub lipschitz: f64,
    /// `β`: gradient Lipschitz constant; zero for linear losses.
    pub smoothness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossKind {
    /// `‖y − target‖²`
    SquaredDistance { target: Point },
    /// `coefficients · y`
    Linear { coefficients: Point },
    /// `(y − offset)ᵀ Q (y − offset)` for symmetric PSD `Q`.
    Quadratic { matrix: DMatrix<f64>, offset: Point },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexLoss {
    kind: LossKind,
    constants: LossConstants,
}

impl ConvexLoss {
    /// Squared distance to `target`, with constants over `set`:
    /// `M = ρ²`, `L = 2ρ`, `β = 2`, where `ρ` bounds `‖y − target‖` on the set.
    pub fn squared_distance(target: Point, set: &DecisionSet) -> Result<Self> {
        check_dim(set.dim(), target.len())?;
        crate::check_finite("target", target.as_slice())?;
        let reach = (&target - set.center()).norm() + set.circumradius();
        Ok(Self {
            kind: LossKind::SquaredDistance { target },
            constants: LossConstants {
                bound: reach * reach,
                lipschitz: 2.0 * reach,
                smoothness: 2.0,
            },
        })
    }

    pub fn linear(coefficients: Point, set: &DecisionSet) -> Result<Self> {
        check_dim(set.dim(), coefficients.len())?;
        crate::check_finite("coefficients", coefficients.as_slice())?;
        let norm = coefficients.norm();
        Ok(Self {
            constants: LossConstants {
                bound: coefficients.dot(set.center()).abs() + norm * set.circumradius(),
                lipschitz: norm,
                smoothness: 0.0,
            },
            kind: LossKind::Linear { coefficients },
        })
    }

    pub fn quadratic(matrix: DMatrix<f64>, offset: Point, set: &DecisionSet) -> Result<Self> {
        let d = set.dim();
        check_dim(d, offset.len())?;
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::invalid(
                "matrix",
                format!("expected {d}x{d}, got {}x{}", matrix.nrows(), matrix.ncols()),
            ));
        }
        crate::check_finite("matrix", matrix.as_slice())?;
        if (&matrix - matrix.transpose()).amax() > 1e-12 * (1.0 + matrix.amax()) {
            return Err(Error::invalid("matrix", "must be symmetric"));
        }
        let eigen = SymmetricEigen::new(matrix.clone());
        let lo = eigen.eigenvalues.min();
        let hi = eigen.eigenvalues.max();
        if lo < -1e-12 * (1.0 + hi.abs()) {
            return Err(Error::invalid(
                "matrix",
                format!("must be positive semidefinite (smallest eigenvalue {lo})"),
            ));
        }
        let hi = hi.max(0.0);
        let reach = (&offset - set.center()).norm() + set.circumradius();
        Ok(Self {
            kind: LossKind::Quadratic { matrix, offset },
            constants: LossConstants {
                bound: hi * reach * reach,
                lipschitz: 2.0 * hi * reach,
                smoothness: 2.0 * hi,
            },
        })
    }

    /// A loss with caller-declared constants.
    pub fn with_constants(kind: LossKind, constants: LossConstants) -> Self {
        Self { kind, constants }
    }

    pub fn kind(&self) -> &LossKind {
        &self.kind
    }

    pub fn constants(&self) -> LossConstants {
        self.constants
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            LossKind::SquaredDistance { target } => target.len(),
            LossKind::Linear { coefficients } => coefficients.len(),
            LossKind::Quadratic { offset, .. } => offset.len(),
        }
    }

    pub fn eval(&self, y: &Point) -> Result<f64> {
        check_dim(self.dim(), y.len())?;
        Ok(match &self.kind {
            LossKind::SquaredDistance { target } => (y - target).norm_squared(),
            LossKind::Linear { coefficients } => coefficients.dot(y),
            LossKind::Quadratic { matrix, offset } => {
                let r = y - offset;
                r.dot(&(matrix * &r))
            }
        })
    }

    pub fn grad(&self, y: &Point) -> Result<Point> {
        check_dim(self.dim(), y.len())?;
        Ok(match &self.kind {
            LossKind::SquaredDistance { target } => (y - target) * 2.0,
            LossKind::Linear { coefficients } => coefficients.clone(),
            LossKind::Quadratic { matrix, offset } => (matrix * (y - offset)) * 2.0,
        })
    }

    /// Checks the declared constants on `samples` random members (and pairs)
    /// of `set`. Returns the first violated constant.
    pub fn validate_constants<R: Rng + ?Sized>(
        &self,
        set: &DecisionSet,
        samples: usize,
        rng: &mut R,
    ) -> Result<()> {
        const TOL: f64 = 1e-9;
        let c = self.constants;
        for _ in 0..samples {
            let y = set.sample(rng);
            let z = set.sample(rng);
            let (fy, fz) = (self.eval(&y)?, self.eval(&z)?);
            let (gy, gz) = (self.grad(&y)?, self.grad(&z)?);
            let dist = (&y - &z).norm();
            if fy.abs() > c.bound + TOL {
                return Err(Error::invalid("bound", format!("|ℓ(y)| = {} > M = {}", fy.abs(), c.bound)));
            }
            if gy.norm() > c.lipschitz + TOL || (fy - fz).abs() > c.lipschitz * dist + TOL {
                return Err(Error::invalid("lipschitz", format!("L = {} violated", c.lipschitz)));
            }
            if (gy - gz).norm() > c.smoothness * dist + TOL {
                return Err(Error::invalid("smoothness", format!("β = {} violated", c.smoothness)));
            }
        }
        Ok(())
    }

    /// Checks `ℓ(Π(z)) ≤ ℓ(z)` for points `z` sampled around `set`.
    ///
    /// Holds for squared distances to members of the set; it is the
    /// property boosting relies on when projecting its output.
    pub fn check_projection_monotone<R: Rng + ?Sized>(
        &self,
        set: &DecisionSet,
        samples: usize,
        rng: &mut R,
    ) -> Result<()> {
        for _ in 0..samples {
            let spread = 3.0 * set.circumradius() * rng.random::<f64>();
            let z = set.center() + sphere_sample(set.dim(), rng) * spread;
            let projected = self.eval(&set.project(&z)?)?;
            let raw = self.eval(&z)?;
            if projected > raw + 1e-9 * (1.0 + raw.abs()) {
                return Err(Error::invalid(
                    "loss",
                    format!("projection increases the loss: {projected} > {raw}"),
                ));
            }
        }
        Ok(())
    }
}

/// A unit vector drawn uniformly from the sphere in `R^d` (normalized
/// Gaussian coordinates).
pub fn sphere_sample<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Point {
    assert!(d >= 1, "sphere dimension must be positive");
    loop {
        let g = Point::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = g.norm();
        if norm > 1e-300 {
            return g / norm;
        }
    }
}

/// One-point spherical gradient estimate `(d/δ)·value·v`.
pub fn fkm_estimate(value: f64, direction: &Point, delta: f64) -> Point {
    direction * (direction.len() as f64 / delta * value)
}

/// Noisy point-query access to a loss: each query returns `ℓ(y) + w` with `w`
/// uniform on `[-h, h]` and increments the query counter.
#[derive(Debug, Clone)]
pub struct NoisyBanditOracle {
    loss: ConvexLoss,
    noise_halfwidth: f64,
    rng: SeededRng,
    queries: u64,
}

impl NoisyBanditOracle {
    /// Requires `0 ≤ h ≤ M`.
    pub fn new(loss: ConvexLoss, noise_halfwidth: f64, seed: u64) -> Result<Self> {
        Self::check_noise(&loss, noise_halfwidth)?;
        Ok(Self {
            loss,
            noise_halfwidth,
            rng: seeded_rng(seed, 0x6e6f697365),
            queries: 0,
        })
    }

    fn check_noise(loss: &ConvexLoss, h: f64) -> Result<()> {
        if !(h.is_finite() && h >= 0.0) {
            return Err(Error::invalid("noise_halfwidth", format!("must be nonnegative, got {h}")));
        }
        let m = loss.constants().bound;
        if h > m {
            return Err(Error::invalid(
                "noise_halfwidth",
                format!("noise bound {h} exceeds the loss bound M = {m}"),
            ));
        }
        Ok(())
    }

    /// Swaps in the next round's loss, keeping the noise stream and counter.
    pub fn replace_loss(&mut self, loss: ConvexLoss) -> Result<()> {
        Self::check_noise(&loss, self.noise_halfwidth)?;
        self.loss = loss;
        Ok(())
    }

    pub fn loss(&self) -> &ConvexLoss {
        &self.loss
    }

    pub fn noise_halfwidth(&self) -> f64 {
        self.noise_halfwidth
    }

    pub fn query_count(&self) -> u64 {
        self.queries
    }

    pub fn noisy_eval(&mut self, y: &Point) -> Result<f64> {
        let value = self.loss.eval(y)?;
        self.queries += 1;
        if self.noise_halfwidth == 0.0 {
            return Ok(value);
        }
        let h = self.noise_halfwidth;
        Ok(value + self.rng.random_range(-h..=h))
    }
}

/// Monte-Carlo access to the smoothed loss `ℓ̂(y) = E_v[ℓ(y + δv)]`.
#[derive(Debug, Clone)]
pub struct SmoothedLossProbe {
    pub loss: ConvexLoss,
    pub delta: f64,
    pub samples: usize,
}

/// A Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub mean: f64,
    pub std_error: f64,
}

impl SmoothedLossProbe {
    pub fn new(loss: ConvexLoss, delta: f64, samples: usize) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
        }
        if samples == 0 {
            return Err(Error::invalid("samples", "must be at least 1"));
        }
        Ok(Self {
            loss,
            delta,
            samples,
        })
    }

    pub fn estimate(&self, y: &Point, seed: u64) -> Result<MonteCarlo> {
        check_dim(self.loss.dim(), y.len())?;
        let mut rng = seeded_rng(seed, 0x736d6f6f7468);
        let n = self.samples as f64;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..self.samples {
            let v = sphere_sample(y.len(), &mut rng);
            let value = self.loss.eval(&(y + v * self.delta))?;
            sum += value;
            sum_sq += value * value;
        }
        let mean = sum / n;
        let var = if self.samples > 1 {
            ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Ok(MonteCarlo {
            mean,
            std_error: (var / n).sqrt(),
        })
    }

    pub fn smoothed_eval_mc(&self, y: &Point, seed: u64) -> Result<f64> {
        Ok(self.estimate(y, seed)?.mean)
    }
}

/// Running statistics of emitted gradient estimates against a norm bound.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EstimateStats {
    pub count: u64,
    pub max_norm: f64,
    /// Estimates whose norm exceeded the bound in force when they were emitted.
    pub violations: u64,
}

impl EstimateStats {
    pub fn observe(&mut self, estimate: &Point, bound: f64) {
        let norm = estimate.norm();
        self.count += 1;
        self.max_norm = self.max_norm.max(norm);
        if norm > bound + 1e-9 {
            self.violations += 1;
        }
    }

    pub fn merge(&mut self, other: &EstimateStats) {
        self.count += other.count;
        self.max_norm = self.max_norm.max(other.max_norm);
        self.violations += other.violations;
    }
}

/// `2dM/δ`: the norm bound of [`fkm_estimate`] under feedback noise bounded by `M`.
pub fn noisy_estimate_bound(d: usize, loss_bound: f64, delta: f64) -> f64 {
    2.0 * d as f64 * loss_bound / delta
}

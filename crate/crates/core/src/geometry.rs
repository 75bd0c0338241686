//! Convex decision sets.
//!
//! Every algorithm in this crate touches its feasible region through three
//! operations: Euclidean projection (boosting output, OGD), linear
//! minimization (FPL) and shrinking about the center (keeping spherical
//! queries `y + δv` feasible). Balls and axis-aligned boxes admit closed forms
//! for all three, which is all the experiments need.

use rand::Rng;

use crate::losses::sphere_sample;
use crate::{check_dim, Error, Point, Result};

/// Absolute tolerance used for every membership check.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Operations an algorithm needs from its feasible region.
///
/// [`DecisionSet`] is the only implementation shipped; new set kinds can be
/// added by implementing this trait.
pub trait ConvexSet {
    fn dim(&self) -> usize;
    fn diameter(&self) -> f64;
    /// Radius of the largest ball about the center contained in the set.
    fn inradius(&self) -> f64;
    fn contains(&self, y: &Point) -> bool;
    fn project(&self, z: &Point) -> Result<Point>;
    fn linear_minimize(&self, direction: &Point) -> Result<Point>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetKind {
    Ball { radius: f64 },
    Box { half_widths: Point },
}

/// A Euclidean ball or an axis-aligned box. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionSet {
    center: Point,
    kind: SetKind,
}

impl DecisionSet {
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("dimension", "must be positive"));
        }
        crate::check_finite("center", center.as_slice())?;
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(Self {
            center,
            kind: SetKind::Ball { radius },
        })
    }

    /// Unit ball about the origin.
    pub fn unit_ball(dim: usize) -> Result<Self> {
        Self::ball(Point::zeros(dim), 1.0)
    }

    pub fn hyperbox(center: Point, half_widths: Point) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("dimension", "must be positive"));
        }
        check_dim(center.len(), half_widths.len())?;
        crate::check_finite("center", center.as_slice())?;
        if let Some(h) = half_widths.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return Err(Error::invalid(
                "half_widths",
                format!("every half-width must be positive, got {h}"),
            ));
        }
        Ok(Self {
            center,
            kind: SetKind::Box { half_widths },
        })
    }

    /// The box `[lo, hi]^d`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::hyperbox(
            Point::from_element(dim, 0.5 * (lo + hi)),
            Point::from_element(dim, 0.5 * (hi - lo)),
        )
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    /// `2r` for balls, length of the full diagonal for boxes.
    pub fn diameter(&self) -> f64 {
        2.0 * self.circumradius()
    }

    /// Largest distance from the center to a member.
    pub fn circumradius(&self) -> f64 {
        match &self.kind {
            SetKind::Ball { radius } => *radius,
            SetKind::Box { half_widths } => half_widths.norm(),
        }
    }

    pub fn inradius(&self) -> f64 {
        match &self.kind {
            SetKind::Ball { radius } => *radius,
            SetKind::Box { half_widths } => half_widths.min(),
        }
    }

    /// Euclidean distance from `y` to the set (zero for members).
    pub fn distance(&self, y: &Point) -> Result<f64> {
        Ok((self.project(y)? - y).norm())
    }

    pub fn contains(&self, y: &Point) -> bool {
        y.len() == self.dim()
            && match &self.kind {
                SetKind::Ball { radius } => (y - &self.center).norm() <= radius + MEMBERSHIP_TOL,
                SetKind::Box { half_widths } => y
                    .iter()
                    .zip(self.center.iter())
                    .zip(half_widths.iter())
                    .all(|((yi, ci), hi)| (yi - ci).abs() <= hi + MEMBERSHIP_TOL),
            }
    }

    /// Nearest member of the set to `z`.
    pub fn project(&self, z: &Point) -> Result<Point> {
        check_dim(self.dim(), z.len())?;
        Ok(match &self.kind {
            SetKind::Ball { radius } => {
                let offset = z - &self.center;
                let norm = offset.norm();
                if norm <= *radius {
                    z.clone()
                } else {
                    &self.center + offset * (radius / norm)
                }
            }
            SetKind::Box { half_widths } => Point::from_iterator(
                self.dim(),
                z.iter()
                    .zip(self.center.iter())
                    .zip(half_widths.iter())
                    .map(|((zi, ci), hi)| zi.clamp(ci - hi, ci + hi)),
            ),
        })
    }

    /// A member minimizing `direction · x`. Ties (zero direction, or zero
    /// coordinates for boxes) resolve to the center.
    pub fn linear_minimize(&self, direction: &Point) -> Result<Point> {
        check_dim(self.dim(), direction.len())?;
        Ok(match &self.kind {
            SetKind::Ball { radius } => {
                let norm = direction.norm();
                if norm == 0.0 {
                    self.center.clone()
                } else {
                    &self.center - direction * (radius / norm)
                }
            }
            SetKind::Box { half_widths } => Point::from_iterator(
                self.dim(),
                direction
                    .iter()
                    .zip(self.center.iter())
                    .zip(half_widths.iter())
                    .map(|((di, ci), hi)| {
                        if *di > 0.0 {
                            ci - hi
                        } else if *di < 0.0 {
                            ci + hi
                        } else {
                            *ci
                        }
                    }),
            ),
        })
    }

    /// The set scaled by `1 - xi` about its center.
    ///
    /// Every member `y` of the result satisfies `y + δv ∈ self` for all unit
    /// `v` whenever `δ ≤ xi · inradius`.
    pub fn shrink(&self, xi: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&xi) {
            return Err(Error::invalid("xi", format!("must lie in [0, 1), got {xi}")));
        }
        let scale = 1.0 - xi;
        let kind = match &self.kind {
            SetKind::Ball { radius } => SetKind::Ball {
                radius: radius * scale,
            },
            SetKind::Box { half_widths } => SetKind::Box {
                half_widths: half_widths * scale,
            },
        };
        Ok(Self {
            center: self.center.clone(),
            kind,
        })
    }

    /// The shrunk set on which spherical queries of radius `delta` stay
    /// feasible: `shrink(delta / inradius)`.
    pub fn shrink_for_queries(&self, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
        }
        let xi = delta / self.inradius();
        if xi >= 1.0 {
            return Err(Error::invalid(
                "delta",
                format!(
                    "smoothing radius {delta} does not fit inside the set (inradius {})",
                    self.inradius()
                ),
            ));
        }
        self.shrink(xi)
    }

    /// A member drawn uniformly from the set.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match &self.kind {
            SetKind::Ball { radius } => {
                let d = self.dim() as f64;
                let r = radius * rng.random::<f64>().powf(1.0 / d);
                &self.center + sphere_sample(self.dim(), rng) * r
            }
            SetKind::Box { half_widths } => Point::from_iterator(
                self.dim(),
                self.center
                    .iter()
                    .zip(half_widths.iter())
                    .map(|(c, h)| c + h * rng.random_range(-1.0..=1.0)),
            ),
        }
    }
}

impl ConvexSet for DecisionSet {
    fn dim(&self) -> usize {
        DecisionSet::dim(self)
    }
    fn diameter(&self) -> f64 {
        DecisionSet::diameter(self)
    }
    fn inradius(&self) -> f64 {
        DecisionSet::inradius(self)
    }
    fn contains(&self, y: &Point) -> bool {
        DecisionSet::contains(self, y)
    }
    fn project(&self, z: &Point) -> Result<Point> {
        DecisionSet::project(self, z)
    }
    fn linear_minimize(&self, direction: &Point) -> Result<Point> {
        DecisionSet::linear_minimize(self, direction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use nalgebra::dvector;
    use proptest::prelude::{prop, prop_assert, prop_oneof, proptest, Strategy};
    use rand::Rng;

    fn close(a: &Point, b: &Point) -> bool {
        (a - b).norm() <= 1e-12
    }

    fn unit_square() -> DecisionSet {
        DecisionSet::cube(2, -1.0, 1.0).unwrap()
    }

    #[test]
    fn project_examples() {
        let ball = DecisionSet::unit_ball(2).unwrap();
        assert!(close(&ball.project(&dvector![3.0, 4.0]).unwrap(), &dvector![0.6, 0.8]));
        assert!(close(&ball.project(&dvector![0.2, 0.1]).unwrap(), &dvector![0.2, 0.1]));
        let sq = unit_square();
        assert!(close(&sq.project(&dvector![2.0, -0.5]).unwrap(), &dvector![1.0, -0.5]));
    }

    #[test]
    fn project_rejects_wrong_dimension() {
        let ball = DecisionSet::unit_ball(2).unwrap();
        assert_eq!(
            ball.project(&dvector![1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                actual: 3
            })
        );
    }

    #[test]
    fn linear_minimize_examples() {
        let ball = DecisionSet::ball(Point::zeros(2), 2.0).unwrap();
        assert!(close(&ball.linear_minimize(&dvector![0.0, 5.0]).unwrap(), &dvector![0.0, -2.0]));
        let sq = unit_square();
        assert!(close(&sq.linear_minimize(&dvector![3.0, -1.0]).unwrap(), &dvector![-1.0, 1.0]));
        let shifted = DecisionSet::ball(dvector![1.0, -2.0], 0.5).unwrap();
        assert_eq!(shifted.linear_minimize(&Point::zeros(2)).unwrap(), dvector![1.0, -2.0]);
        assert_eq!(sq.linear_minimize(&Point::zeros(2)).unwrap(), Point::zeros(2));
    }

    #[test]
    fn shrink_examples() {
        let ball = DecisionSet::unit_ball(3).unwrap();
        assert_eq!(
            ball.shrink(0.1).unwrap().kind(),
            &SetKind::Ball { radius: 0.9 }
        );
        let rect = DecisionSet::hyperbox(Point::zeros(2), dvector![2.0, 4.0]).unwrap();
        assert_eq!(
            rect.shrink(0.5).unwrap().kind(),
            &SetKind::Box {
                half_widths: dvector![1.0, 2.0]
            }
        );
        assert_eq!(rect.shrink(0.0).unwrap(), rect);
        assert!(rect.shrink(1.0).is_err());
        assert!(rect.shrink(-0.1).is_err());
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(DecisionSet::ball(Point::zeros(4), 3.0).unwrap().diameter(), 6.0);
        assert_eq!(DecisionSet::ball(Point::zeros(1), 0.5).unwrap().diameter(), 1.0);
        let d = unit_square().diameter();
        assert!((d - 2.0 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constructors_validate() {
        assert!(DecisionSet::ball(Point::zeros(2), 0.0).is_err());
        assert!(DecisionSet::ball(Point::zeros(0), 1.0).is_err());
        assert!(DecisionSet::hyperbox(Point::zeros(2), dvector![1.0, -1.0]).is_err());
        assert!(DecisionSet::hyperbox(Point::zeros(2), dvector![1.0]).is_err());
    }

    #[test]
    fn shrunk_members_admit_spherical_queries() {
        let mut rng = seeded_rng(7, 0);
        for set in [
            DecisionSet::ball(dvector![0.5, -1.0, 2.0], 2.0).unwrap(),
            DecisionSet::hyperbox(dvector![0.0, 1.0, 0.0], dvector![1.0, 3.0, 0.5]).unwrap(),
        ] {
            let xi = 0.3;
            let delta = xi * set.inradius();
            let inner = set.shrink(xi).unwrap();
            for _ in 0..2000 {
                let y = inner.sample(&mut rng);
                let v = sphere_sample(3, &mut rng);
                assert!(set.contains(&(y + v * delta)));
            }
        }
    }

    #[test]
    fn projection_never_increases_distance_to_members() {
        let mut rng = seeded_rng(11, 0);
        for set in [
            DecisionSet::ball(dvector![0.2, -0.3, 0.0], 1.5).unwrap(),
            DecisionSet::hyperbox(Point::zeros(3), dvector![0.5, 1.0, 2.0]).unwrap(),
        ] {
            for _ in 0..1000 {
                let z = set.center() + sphere_sample(3, &mut rng) * (4.0 * rng.random::<f64>());
                let target = set.sample(&mut rng);
                let p = set.project(&z).unwrap();
                assert!((&p - &target).norm_squared() <= (&z - &target).norm_squared() + 1e-9);
            }
        }
    }

    #[test]
    fn linear_minimize_beats_sampled_members() {
        let mut rng = seeded_rng(13, 0);
        for set in [
            DecisionSet::ball(dvector![1.0, 0.0], 2.0).unwrap(),
            DecisionSet::hyperbox(dvector![0.0, -1.0], dvector![0.5, 1.5]).unwrap(),
        ] {
            let members: Vec<Point> = (0..100).map(|_| set.sample(&mut rng)).collect();
            for _ in 0..1000 {
                let dir = sphere_sample(2, &mut rng) * (10.0 * rng.random::<f64>());
                let best = set.linear_minimize(&dir).unwrap();
                assert!(set.contains(&best));
                let value = dir.dot(&best);
                assert!(members.iter().all(|x| value <= dir.dot(x) + 1e-9));
            }
        }
    }

    fn any_set() -> impl Strategy<Value = DecisionSet> {
        let ball = (prop::collection::vec(-3.0..3.0f64, 3), 0.1..5.0f64)
            .prop_map(|(c, r)| DecisionSet::ball(Point::from_vec(c), r).unwrap());
        let rect = (
            prop::collection::vec(-3.0..3.0f64, 3),
            prop::collection::vec(0.1..5.0f64, 3),
        )
            .prop_map(|(c, h)| DecisionSet::hyperbox(Point::from_vec(c), Point::from_vec(h)).unwrap());
        prop_oneof![ball, rect]
    }

    proptest! {
        #[test]
        fn projection_is_feasible_and_idempotent(
            set in any_set(),
            z in prop::collection::vec(-50.0..50.0f64, 3),
        ) {
            let z = Point::from_vec(z);
            let p = set.project(&z).unwrap();
            prop_assert!(set.contains(&p));
            let pp = set.project(&p).unwrap();
            prop_assert!((&pp - &p).norm() <= 1e-9);
        }
    }
}

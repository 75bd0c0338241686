//! Offline comparators, solved on the recorded stream after a run.

use anyhow::Result;
use fwboost::geometry::{DecisionSet, SetKind};
use fwboost::olo::offline_linear_optimum;
use fwboost::sfw::QuadraticAggregate;
use fwboost::Point;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::dataset::{LossFamily, Stream};

/// Total and per-round loss of a fixed comparator.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparator {
    pub total: f64,
    pub per_round: Vec<f64>,
}

/// Best fixed point of `set` against the stream's losses.
pub fn best_fixed_point(stream: &Stream, set: &DecisionSet) -> Result<(Point, Comparator)> {
    let x = match stream.family {
        LossFamily::Squared => {
            let mut agg = QuadraticAggregate::new(set.dim());
            for t in 0..stream.len() {
                agg.add(&stream.loss(t, set)?)?;
            }
            agg.minimize(set)?.0
        }
        LossFamily::Linear => {
            let gs: Vec<Point> = stream.examples.iter().map(|e| e.label.clone()).collect();
            offline_linear_optimum(&gs, set)?.0
        }
    };
    let per_round = (0..stream.len())
        .map(|t| stream.loss(t, set)?.eval(&x))
        .collect::<fwboost::Result<Vec<_>>>()?;
    Ok((
        x,
        Comparator {
            total: per_round.iter().sum(),
            per_round,
        },
    ))
}

/// Loss of the fixed policy `x ↦ Π_set(Wx)` on every example.
pub fn policy_losses(stream: &Stream, set: &DecisionSet, w: &DMatrix<f64>) -> Result<Vec<f64>> {
    stream
        .examples
        .iter()
        .enumerate()
        .map(|(t, e)| Ok(stream.loss(t, set)?.eval(&set.project(&(w * &e.features))?)?))
        .collect()
}

const REFINE_STEPS: usize = 120;
const START_SCALES: [f64; 4] = [0.0, 1.0, 2.0, 4.0];

/// Sum of losses of `Π(Wx)` and its gradient in `W`, treating clipped
/// coordinates as constant.
fn policy_objective(stream: &Stream, set: &DecisionSet, w: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let mut grad = DMatrix::zeros(w.nrows(), w.ncols());
    let mut total = 0.0;
    for e in &stream.examples {
        let raw = w * &e.features;
        let pred = set.project(&raw)?;
        let mut residual = &pred - &e.label;
        total += residual.norm_squared();
        if let SetKind::Box { half_widths } = set.kind() {
            for j in 0..residual.len() {
                if (raw[j] - set.center()[j]).abs() > half_widths[j] {
                    residual[j] = 0.0;
                }
            }
        }
        grad.ger(2.0, &residual, &e.features, 1.0);
    }
    Ok((total, grad))
}

/// Best fixed projected linear map for a squared-loss stream. Starts from
/// scaled ridge solutions and zero, then runs backtracking gradient descent
/// through the projection from each. Returns `None` for other loss families.
pub fn best_linear_policy(
    stream: &Stream,
    set: &DecisionSet,
) -> Result<Option<(DMatrix<f64>, Comparator)>> {
    if stream.family != LossFamily::Squared {
        return Ok(None);
    }
    let p = stream.feature_dim();
    let k = stream.label_dim();
    let x = DMatrix::from_fn(stream.len(), p, |t, j| stream.examples[t].features[j]);
    let y = DMatrix::from_fn(stream.len(), k, |t, j| stream.examples[t].label[j]);
    let gram = x.transpose() * &x;
    let ridge = 1e-8 * (gram.trace() / p as f64).max(1e-12);
    let regularized = &gram + DMatrix::identity(p, p) * ridge;
    let rhs = x.transpose() * &y;
    let ls = match regularized.cholesky() {
        Some(ch) => ch.solve(&rhs).transpose(),
        None => DMatrix::zeros(k, p),
    };
    let lambda_max = SymmetricEigen::new(gram).eigenvalues.max().max(1e-12);

    let mut best: Option<(DMatrix<f64>, f64)> = None;
    for scale in START_SCALES {
        let mut w = &ls * scale;
        let (mut value, mut grad) = policy_objective(stream, set, &w)?;
        let mut step = 1.0 / lambda_max;
        for _ in 0..REFINE_STEPS {
            let g2 = grad.norm_squared();
            if g2 <= 1e-24 {
                break;
            }
            // Armijo backtracking; grows the step again after each success.
            let mut accepted = false;
            while step * lambda_max > 1e-10 {
                let cand = &w - &grad * step;
                let (v, g) = policy_objective(stream, set, &cand)?;
                if v <= value - 0.5 * step * g2 {
                    (w, value, grad) = (cand, v, g);
                    step *= 2.0;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| value < b.1) {
            best = Some((w, value));
        }
    }
    let (w, _) = best.expect("at least one start");
    let per_round = policy_losses(stream, set, &w)?;
    Ok(Some((
        w,
        Comparator {
            total: per_round.iter().sum(),
            per_round,
        },
    )))
}

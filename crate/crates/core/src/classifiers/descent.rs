//! Full-batch gradient descent with Armijo backtracking. Each line search
//! starts from the Barzilai-Borwein step `sᵀs / sᵀy` of the previous move
//! (twice the previous step when the curvature estimate is not positive)
//! and halves until the sufficient-decrease condition holds.

use crate::error::{Error, Result};

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
const MAX_STEP: f64 = 1e12;

/// What the optimizer reports about one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub iterations: usize,
    /// Gradient ∞-norm fell below tolerance.
    pub converged: bool,
    /// Objective value at the start and after every accepted step.
    pub loss_history: Vec<f64>,
}

/// A differentiable objective whose state moves along `-t·gradient`.
pub(crate) trait Objective {
    type Dir;
    type Trial;

    fn loss(&self) -> f64;
    /// Gradient at the current point, its squared norm, and whether every
    /// component is below `tol`.
    fn direction(&self, tol: f64) -> (Self::Dir, f64, bool);
    /// Objective after a step of length `t`, plus what `accept` needs.
    fn trial(&self, dir: &Self::Dir, t: f64) -> (f64, Self::Trial);
    fn accept(&mut self, dir: &Self::Dir, trial: Self::Trial, t: f64);
    /// Inner product of two gradients.
    fn dot(&self, a: &Self::Dir, b: &Self::Dir) -> f64;
}

pub(crate) fn descend<O: Objective>(obj: &mut O, max_iter: usize, tol: f64) -> Result<TrainReport> {
    let mut loss = obj.loss();
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    let mut history = vec![loss];
    let mut t = 1.0;
    let mut prev: Option<(O::Dir, f64)> = None;
    let mut converged = false;
    let mut iterations = 0;
    'outer: while iterations < max_iter {
        let (dir, gnorm_sq, small) = obj.direction(tol);
        if !gnorm_sq.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        if small {
            converged = true;
            break;
        }
        t = match &prev {
            // s = −t·g_prev and y = g − g_prev.
            Some((g_prev, prev_sq)) => {
                let cross = obj.dot(g_prev, &dir);
                let curvature = prev_sq - cross;
                let y_sq = gnorm_sq - 2.0 * cross + prev_sq;
                if curvature > 0.0 && y_sq > 0.0 {
                    let long = t * prev_sq / curvature;
                    let short = t * curvature / y_sq;
                    (if short < 0.5 * long { short } else { long }).min(MAX_STEP)
                } else {
                    2.0 * t
                }
            }
            None => t,
        };
        loop {
            let (trial_loss, trial) = obj.trial(&dir, t);
            if trial_loss.is_finite() && trial_loss <= loss - ARMIJO * t * gnorm_sq {
                obj.accept(&dir, trial, t);
                loss = trial_loss;
                break;
            }
            t *= 0.5;
            if t < MIN_STEP {
                // No representable decrease left along the gradient.
                break 'outer;
            }
        }
        prev = Some((dir, gnorm_sq));
        history.push(loss);
        iterations += 1;
    }
    if !converged && iterations == max_iter {
        converged = obj.direction(tol).2;
    }
    Ok(TrainReport { iterations, converged, loss_history: history })
}

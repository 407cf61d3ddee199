//! A weight matrix `W` (R×D) applied to the sample matrix `X` (N×D) by a
//! gradient-descent trainer.
//!
//! Two representations produce the same iterates:
//!
//! * primal: `W` stored explicitly, each step costs two N·D·R products;
//! * dual: `W = c·W₀ + A·X` with `A` R×N, each step costs one N²·R product
//!   against the Gram matrix `X·Xᵀ`. Every gradient of `‖W‖²` and of a loss
//!   of `X·Wᵀ` stays in that family, so wide descriptors (D ≫ N) train at the
//!   cost of an N-dimensional problem.

use std::cell::Cell;

use ndarray::{Array2, Axis};

/// An inconclusive ∞-norm test is repeated only once the Frobenius norm has
/// shrunk by this factor since the last failed one.
const RECHECK_RATIO: f64 = 0.7;

fn frob_dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `Σ_{r,n} a[r][n] · b[n][r]`.
fn frob_dot_t(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    frob_dot(a, &b.t().to_owned())
}

enum Repr {
    Primal { w: Array2<f64> },
    Dual { c: f64, a: Array2<f64> },
}

/// State of one weight block plus the cached products the trainer needs.
pub(crate) struct WeightBlock<'a> {
    x: &'a Array2<f64>,
    gram: Option<&'a Array2<f64>>,
    /// Dual form only: initial weights, `X·W₀ᵀ` and `‖W₀‖²`.
    w0: Option<(Array2<f64>, Array2<f64>, f64)>,
    repr: Repr,
    scores: Array2<f64>,
    norm_sq: f64,
    /// Frobenius norm at the last explicit ∞-norm check that failed.
    last_check: Cell<f64>,
}

enum GradRepr {
    Primal(Array2<f64>),
    Dual { cg: f64, b: Array2<f64> },
}

/// Gradient `G` of the objective with respect to `W`, and `X·Gᵀ`.
pub(crate) struct Direction {
    grad: GradRepr,
    scores: Array2<f64>,
    pub norm_sq: f64,
    w_dot: f64,
}

impl<'a> WeightBlock<'a> {
    pub fn primal(x: &'a Array2<f64>, w: Array2<f64>) -> Self {
        let scores = x.dot(&w.t());
        let norm_sq = frob_dot(&w, &w);
        Self { x, gram: None, w0: None, repr: Repr::Primal { w }, scores, norm_sq, last_check: Cell::new(f64::INFINITY) }
    }

    /// Dual form starting from `w_init` (`c = 1`, `A = 0`).
    pub fn dual(x: &'a Array2<f64>, gram: &'a Array2<f64>, w_init: Array2<f64>) -> Self {
        let rows = w_init.nrows();
        let s0 = x.dot(&w_init.t());
        let n0 = frob_dot(&w_init, &w_init);
        let a = Array2::zeros((rows, x.nrows()));
        Self {
            x,
            gram: Some(gram),
            scores: s0.clone(),
            norm_sq: n0,
            w0: Some((w_init, s0, n0)),
            repr: Repr::Dual { c: 1.0, a },
            last_check: Cell::new(f64::INFINITY),
        }
    }

    /// `X·Wᵀ` (N×R).
    pub fn scores(&self) -> &Array2<f64> {
        &self.scores
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// Gradient `upstreamᵀ·X + reg·W` where `upstream` (N×R) is the loss
    /// derivative with respect to the scores.
    pub fn direction(&self, upstream: &Array2<f64>, reg: f64) -> Direction {
        match &self.repr {
            Repr::Primal { w } => {
                let g = upstream.t().dot(self.x) + &(w * reg);
                let scores = self.x.dot(&g.t());
                let norm_sq = frob_dot(&g, &g);
                let w_dot = frob_dot(w, &g);
                Direction { grad: GradRepr::Primal(g), scores, norm_sq, w_dot }
            }
            Repr::Dual { c, a } => {
                let gram = self.gram.expect("dual block has a Gram matrix");
                let (_, s0, n0) = self.w0.as_ref().expect("dual block has initial weights");
                let b = upstream.t().to_owned() + &(a * reg);
                let cg = reg * c;
                // X·(B·X)ᵀ = Gram·Bᵀ
                let gb = gram.dot(&b.t());
                let scores = &gb + &(s0 * cg);
                let b_s0 = frob_dot_t(&b, s0);
                let a_s0 = frob_dot_t(a, s0);
                let norm_sq = cg * cg * n0 + 2.0 * cg * b_s0 + frob_dot_t(&b, &gb);
                let w_dot = c * cg * n0 + c * b_s0 + cg * a_s0 + frob_dot_t(a, &gb);
                Direction { grad: GradRepr::Dual { cg, b }, scores, norm_sq, w_dot }
            }
        }
    }

    /// Scores after moving by `-t·G`.
    pub fn trial_scores(&self, dir: &Direction, t: f64) -> Array2<f64> {
        &self.scores - &(&dir.scores * t)
    }

    /// `‖W − t·G‖²`.
    pub fn trial_norm_sq(&self, dir: &Direction, t: f64) -> f64 {
        (self.norm_sq - 2.0 * t * dir.w_dot + t * t * dir.norm_sq).max(0.0)
    }

    pub fn step(&mut self, dir: &Direction, t: f64) {
        self.norm_sq = self.trial_norm_sq(dir, t);
        self.scores.scaled_add(-t, &dir.scores);
        match (&mut self.repr, &dir.grad) {
            (Repr::Primal { w }, GradRepr::Primal(g)) => {
                w.scaled_add(-t, g);
                self.norm_sq = frob_dot(w, w);
            }
            (Repr::Dual { c, a }, GradRepr::Dual { cg, b }) => {
                a.scaled_add(-t, b);
                *c -= t * cg;
            }
            _ => unreachable!("direction computed for another block"),
        }
    }

    /// `⟨G₁, G₂⟩` without materializing either gradient.
    pub fn dot(&self, g1: &Direction, g2: &Direction) -> f64 {
        match (&g1.grad, &g2.grad) {
            (GradRepr::Primal(a), GradRepr::Primal(b)) => frob_dot(a, b),
            (GradRepr::Dual { cg: c1, b: b1 }, GradRepr::Dual { cg: c2, b: b2 }) => {
                let (_, s0, n0) = self.w0.as_ref().expect("dual block has initial weights");
                // Gram·B₂ᵀ is the score matrix of G₂ minus its W₀ part.
                let gb2 = &g2.scores - &(s0 * *c2);
                frob_dot_t(b1, &gb2) + c1 * frob_dot_t(b2, s0) + c2 * frob_dot_t(b1, s0) + c1 * c2 * n0
            }
            _ => unreachable!("directions of different blocks"),
        }
    }

    /// Materializes a gradient as an R×D matrix.
    pub fn explicit_gradient(&self, dir: &Direction) -> Array2<f64> {
        match &dir.grad {
            GradRepr::Primal(g) => g.clone(),
            GradRepr::Dual { cg, b } => {
                let (w0, _, _) = self.w0.as_ref().expect("dual block has initial weights");
                b.dot(self.x) + &(w0 * *cg)
            }
        }
    }

    /// Whether `max |G| < tol`. `G` is materialized only when the Frobenius
    /// bounds are inconclusive, and then at most once per
    /// [`RECHECK_RATIO`] decrease of the Frobenius norm, so a `false` may be
    /// reported for a few iterations after the threshold is first crossed.
    pub fn gradient_below(&self, dir: &Direction, tol: f64) -> bool {
        let fro = dir.norm_sq.sqrt();
        if fro < tol {
            return true;
        }
        let entries = (self.scores.ncols() * self.x.ncols()) as f64;
        if fro >= tol * entries.sqrt() || fro > RECHECK_RATIO * self.last_check.get() {
            return false;
        }
        let below = self.explicit_gradient(dir).iter().all(|g| g.abs() < tol);
        if !below {
            self.last_check.set(fro);
        }
        below
    }

    pub fn weights(&self) -> Array2<f64> {
        match &self.repr {
            Repr::Primal { w } => w.clone(),
            Repr::Dual { c, a } => {
                let (w0, _, _) = self.w0.as_ref().expect("dual block has initial weights");
                a.dot(self.x) + &(w0 * *c)
            }
        }
    }
}

/// Whether the dual form is cheaper for an N×D problem.
pub(crate) fn prefer_dual(n: usize, d: usize) -> bool {
    n < 2 * d
}

/// Column sums.
pub(crate) fn col_sums(m: &Array2<f64>) -> ndarray::Array1<f64> {
    m.sum_axis(Axis(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn dual_and_primal_take_identical_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(6, 15, &mut rng);
        let gram = x.dot(&x.t());
        let w = random(3, 15, &mut rng);
        let mut p = WeightBlock::primal(&x, w.clone());
        let mut d = WeightBlock::dual(&x, &gram, w);
        let mut prev = None;
        for step in 0..5 {
            let up = random(6, 3, &mut rng);
            let dp = p.direction(&up, 0.3);
            let dd = d.direction(&up, 0.3);
            assert!((dp.norm_sq - dd.norm_sq).abs() < 1e-9);
            let gp = p.explicit_gradient(&dp);
            let gd = d.explicit_gradient(&dd);
            assert!(gp.iter().zip(gd.iter()).all(|(a, b)| (a - b).abs() < 1e-10));
            let t = 0.1 * (step + 1) as f64;
            assert!((p.trial_norm_sq(&dp, t) - d.trial_norm_sq(&dd, t)).abs() < 1e-9);
            assert!((p.dot(&dp, &dp) - dp.norm_sq).abs() < 1e-9 && (d.dot(&dd, &dd) - dd.norm_sq).abs() < 1e-9);
            if let Some((pp, pd)) = &prev {
                assert!((p.dot(pp, &dp) - d.dot(pd, &dd)).abs() < 1e-9);
                assert!((d.dot(pd, &dd) - d.dot(&dd, pd)).abs() < 1e-9);
            }
            p.step(&dp, t);
            d.step(&dd, t);
            prev = Some((dp, dd));
            assert!(p.scores().iter().zip(d.scores().iter()).all(|(a, b)| (a - b).abs() < 1e-10));
            assert!((p.norm_sq() - d.norm_sq()).abs() < 1e-9);
        }
        let (wp, wd) = (p.weights(), d.weights());
        assert!(wp.iter().zip(wd.iter()).all(|(a, b)| (a - b).abs() < 1e-10));
        assert!((frob_dot(&wd, &wd) - d.norm_sq()).abs() < 1e-9);
    }
}

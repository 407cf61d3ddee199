use ndarray::{s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::block::{col_sums, prefer_dual, Direction, WeightBlock};
use super::descent::{descend, Objective, TrainReport};
use super::{softmax, softmax_xent, HyperParams, LabeledSet, TrainOptions};
use crate::error::{Error, Result};

pub const HIDDEN_UNITS: usize = 25;

/// Sigmoid hidden layer, softmax output. Bias is the last column of each matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnModel {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub lambda: f64,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn with_bias(w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[w.view(), b.view().insert_axis(Axis(1))]).expect("matching rows")
}

fn split_bias(w: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let d = w.ncols() - 1;
    (w.slice(s![.., ..d]).to_owned(), w.column(d).to_owned())
}

impl AnnModel {
    pub fn zeros(d: usize, k: usize, lambda: f64) -> Self {
        Self { w1: Array2::zeros((HIDDEN_UNITS, d + 1)), w2: Array2::zeros((k, HIDDEN_UNITS + 1)), lambda }
    }

    /// Uniform weights in `[−ε, ε]`, `ε = √(6/(fan_in+fan_out))`, drawn row-major,
    /// hidden layer first.
    pub fn random(d: usize, k: usize, lambda: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows: usize, fan_in: usize| {
            let eps = (6.0 / (fan_in + rows) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, fan_in + 1), || rng.random_range(-eps..=eps))
        };
        let w1 = draw(HIDDEN_UNITS, d);
        let w2 = draw(k, HIDDEN_UNITS);
        Self { w1, w2, lambda }
    }

    pub fn dim(&self) -> usize {
        self.w1.ncols() - 1
    }

    pub fn classes(&self) -> usize {
        self.w2.nrows()
    }

    pub fn hidden(&self, x: &Array2<f64>) -> Array2<f64> {
        let (w, b) = split_bias(&self.w1);
        (x.dot(&w.t()) + &b).mapv(sigmoid)
    }

    pub fn probabilities(&self, x: &Array2<f64>) -> Array2<f64> {
        let (w, b) = split_bias(&self.w2);
        softmax(&(self.hidden(x).dot(&w.t()) + &b))
    }
}

struct Forward {
    hidden: Array2<f64>,
    probs: Array2<f64>,
    loss: f64,
}

pub(crate) struct AnnState<'a> {
    block: WeightBlock<'a>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
    y: &'a [usize],
    lambda: f64,
    fwd: Forward,
}

pub(crate) struct AnnDir {
    block: Direction,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

pub(crate) struct AnnTrial {
    fwd: Forward,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

impl<'a> AnnState<'a> {
    pub fn new(set: &'a LabeledSet, model: &AnnModel, dual: bool) -> Self {
        let (w1, b1) = split_bias(&model.w1);
        let (w2, b2) = split_bias(&model.w2);
        let block = if dual { WeightBlock::dual(set.x(), set.gram(), w1) } else { WeightBlock::primal(set.x(), w1) };
        let empty = Forward { hidden: Array2::zeros((0, 0)), probs: Array2::zeros((0, 0)), loss: 0.0 };
        let mut state = Self { block, b1, w2, b2, y: set.y(), lambda: model.lambda, fwd: empty };
        state.fwd = state.forward(state.block.scores().clone(), &state.b1, &state.w2, &state.b2, state.block.norm_sq());
        state
    }

    fn n(&self) -> f64 {
        self.y.len() as f64
    }

    fn forward(&self, mut pre: Array2<f64>, b1: &Array1<f64>, w2: &Array2<f64>, b2: &Array1<f64>, w1_norm_sq: f64) -> Forward {
        pre += b1;
        let hidden = pre.mapv(sigmoid);
        let z = hidden.dot(&w2.t()) + b2;
        let (probs, xent) = softmax_xent(&z, self.y);
        let w2_sq: f64 = w2.iter().map(|v| v * v).sum();
        let loss = xent / self.n() + self.lambda / (2.0 * self.n()) * (w1_norm_sq + w2_sq);
        Forward { hidden, probs, loss }
    }

    pub fn model(&self) -> AnnModel {
        AnnModel { w1: with_bias(&self.block.weights(), &self.b1), w2: with_bias(&self.w2, &self.b2), lambda: self.lambda }
    }

    pub fn explicit_gradient(&self) -> (Array2<f64>, Array2<f64>) {
        let dir = self.direction(0.0).0;
        let g1 = self.block.explicit_gradient(&dir.block);
        (with_bias(&g1, &dir.b1), with_bias(&dir.w2, &dir.b2))
    }
}

impl Objective for AnnState<'_> {
    type Dir = AnnDir;
    type Trial = AnnTrial;

    fn loss(&self) -> f64 {
        self.fwd.loss
    }

    fn direction(&self, tol: f64) -> (AnnDir, f64, bool) {
        let reg = self.lambda / self.n();
        let mut delta2 = self.fwd.probs.clone();
        for (mut row, &label) in delta2.rows_mut().into_iter().zip(self.y) {
            row[label] -= 1.0;
        }
        delta2 /= self.n();
        let w2 = delta2.t().dot(&self.fwd.hidden) + &(&self.w2 * reg);
        let b2 = col_sums(&delta2);
        let mut delta1 = delta2.dot(&self.w2);
        delta1.zip_mut_with(&self.fwd.hidden, |d, &h| *d *= h * (1.0 - h));
        let b1 = col_sums(&delta1);
        let block = self.block.direction(&delta1, reg);
        let sq = |it: &mut dyn Iterator<Item = &f64>| it.map(|v| v * v).sum::<f64>();
        let norm_sq = block.norm_sq + sq(&mut w2.iter()) + sq(&mut b1.iter()) + sq(&mut b2.iter());
        let small = w2.iter().chain(&b1).chain(&b2).all(|v| v.abs() < tol) && self.block.gradient_below(&block, tol);
        (AnnDir { block, b1, w2, b2 }, norm_sq, small)
    }

    fn trial(&self, dir: &AnnDir, t: f64) -> (f64, AnnTrial) {
        let b1 = &self.b1 - &(&dir.b1 * t);
        let w2 = &self.w2 - &(&dir.w2 * t);
        let b2 = &self.b2 - &(&dir.b2 * t);
        let fwd = self.forward(self.block.trial_scores(&dir.block, t), &b1, &w2, &b2, self.block.trial_norm_sq(&dir.block, t));
        (fwd.loss, AnnTrial { fwd, w2, b2 })
    }

    fn dot(&self, a: &AnnDir, b: &AnnDir) -> f64 {
        let w2: f64 = a.w2.iter().zip(b.w2.iter()).map(|(x, y)| x * y).sum();
        self.block.dot(&a.block, &b.block) + a.b1.dot(&b.b1) + w2 + a.b2.dot(&b.b2)
    }

    fn accept(&mut self, dir: &AnnDir, trial: AnnTrial, t: f64) {
        self.block.step(&dir.block, t);
        self.b1.scaled_add(-t, &dir.b1);
        self.w2 = trial.w2;
        self.b2 = trial.b2;
        self.fwd = trial.fwd;
    }
}

/// Objective value and gradients `(∂/∂W1, ∂/∂W2)` at `model`, as used by the trainer.
pub fn ann_loss_and_gradient(set: &LabeledSet, model: &AnnModel) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    if model.dim() != set.d() || model.classes() != set.k() || model.w1.nrows() != HIDDEN_UNITS {
        return Err(Error::DimensionMismatch { expected: set.d(), actual: model.dim() });
    }
    let state = AnnState::new(set, model, prefer_dual(set.n(), set.d()));
    let (g1, g2) = state.explicit_gradient();
    Ok((state.fwd.loss, g1, g2))
}

pub fn train_ann(set: &LabeledSet, lambda: f64) -> Result<AnnModel> {
    Ok(train_ann_with(set, lambda, &TrainOptions::default())?.0)
}

/// Backpropagation with full-batch descent from a seeded uniform initialization.
pub fn train_ann_with(set: &LabeledSet, lambda: f64, opts: &TrainOptions) -> Result<(AnnModel, TrainReport)> {
    HyperParams::Ann { lambda }.validate()?;
    set.require_classes()?;
    let init = AnnModel::random(set.d(), set.k(), lambda, opts.seed);
    let mut state = AnnState::new(set, &init, prefer_dual(set.n(), set.d()));
    let report = descend(&mut state, opts.max_iter, opts.grad_tol)?;
    let model = state.model();
    if model.w1.iter().chain(&model.w2).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLoss);
    }
    Ok((model, report))
}

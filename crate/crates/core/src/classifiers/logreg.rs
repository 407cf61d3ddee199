use ndarray::{s, Array1, Array2, Axis};

use super::block::{col_sums, prefer_dual, Direction, WeightBlock};
use super::descent::{descend, Objective, TrainReport};
use super::{softmax, softmax_xent, HyperParams, LabeledSet, TrainOptions};
use crate::error::{Error, Result};

/// Multinomial logistic regression; the last column of `w` is the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub w: Array2<f64>,
    pub lambda: f64,
}

impl LogRegModel {
    pub fn zeros(d: usize, k: usize, lambda: f64) -> Self {
        Self { w: Array2::zeros((k, d + 1)), lambda }
    }

    pub fn dim(&self) -> usize {
        self.w.ncols() - 1
    }

    pub fn classes(&self) -> usize {
        self.w.nrows()
    }

    /// Class probabilities (N×K). The caller checks dimensions.
    pub fn probabilities(&self, x: &Array2<f64>) -> Array2<f64> {
        let d = self.dim();
        let z = x.dot(&self.w.slice(s![.., ..d]).t()) + &self.w.column(d);
        softmax(&z)
    }
}

pub(crate) struct LrState<'a> {
    block: WeightBlock<'a>,
    bias: Array1<f64>,
    y: &'a [usize],
    lambda: f64,
    loss: f64,
    probs: Array2<f64>,
}

pub(crate) struct LrDir {
    block: Direction,
    bias: Array1<f64>,
}

impl<'a> LrState<'a> {
    pub fn new(set: &'a LabeledSet, w: &Array2<f64>, lambda: f64, dual: bool) -> Self {
        let d = set.d();
        let wx = w.slice(s![.., ..d]).to_owned();
        let bias = w.column(d).to_owned();
        let block = if dual { WeightBlock::dual(set.x(), set.gram(), wx) } else { WeightBlock::primal(set.x(), wx) };
        let mut state = Self { block, bias, y: set.y(), lambda, loss: 0.0, probs: Array2::zeros((0, 0)) };
        let (loss, probs) = state.evaluate(state.block.scores().clone(), &state.bias, state.block.norm_sq());
        state.loss = loss;
        state.probs = probs;
        state
    }

    fn n(&self) -> f64 {
        self.y.len() as f64
    }

    fn evaluate(&self, mut z: Array2<f64>, bias: &Array1<f64>, norm_sq: f64) -> (f64, Array2<f64>) {
        z += bias;
        let (p, xent) = softmax_xent(&z, self.y);
        (xent / self.n() + self.lambda / (2.0 * self.n()) * norm_sq, p)
    }

    fn upstream(&self) -> Array2<f64> {
        let mut g = self.probs.clone();
        for (mut row, &label) in g.rows_mut().into_iter().zip(self.y) {
            row[label] -= 1.0;
        }
        g / self.n()
    }

    pub fn weights(&self) -> Array2<f64> {
        let w = self.block.weights();
        ndarray::concatenate(Axis(1), &[w.view(), self.bias.view().insert_axis(Axis(1))]).expect("matching rows")
    }

    /// Gradient with respect to the full `K×(D+1)` weight matrix.
    pub fn explicit_gradient(&self) -> Array2<f64> {
        let dir = self.direction(0.0).0;
        let g = self.block.explicit_gradient(&dir.block);
        ndarray::concatenate(Axis(1), &[g.view(), dir.bias.view().insert_axis(Axis(1))]).expect("matching rows")
    }
}

impl Objective for LrState<'_> {
    type Dir = LrDir;
    type Trial = (f64, Array2<f64>);

    fn loss(&self) -> f64 {
        self.loss
    }

    fn direction(&self, tol: f64) -> (LrDir, f64, bool) {
        let up = self.upstream();
        let bias = col_sums(&up);
        let block = self.block.direction(&up, self.lambda / self.n());
        let bias_sq: f64 = bias.iter().map(|v| v * v).sum();
        let norm_sq = block.norm_sq + bias_sq;
        let small = bias.iter().all(|v| v.abs() < tol) && self.block.gradient_below(&block, tol);
        (LrDir { block, bias }, norm_sq, small)
    }

    fn trial(&self, dir: &LrDir, t: f64) -> (f64, (f64, Array2<f64>)) {
        let bias = &self.bias - &(&dir.bias * t);
        let (loss, probs) = self.evaluate(self.block.trial_scores(&dir.block, t), &bias, self.block.trial_norm_sq(&dir.block, t));
        (loss, (loss, probs))
    }

    fn dot(&self, a: &LrDir, b: &LrDir) -> f64 {
        self.block.dot(&a.block, &b.block) + a.bias.dot(&b.bias)
    }

    fn accept(&mut self, dir: &LrDir, (loss, probs): (f64, Array2<f64>), t: f64) {
        self.block.step(&dir.block, t);
        self.bias.scaled_add(-t, &dir.bias);
        self.probs = probs;
        self.loss = loss;
    }
}

/// Objective value and gradient at `w` (`K×(D+1)`, bias last), as used by the trainer.
pub fn logreg_loss_and_gradient(set: &LabeledSet, w: &Array2<f64>, lambda: f64) -> Result<(f64, Array2<f64>)> {
    check_shape(set, w)?;
    let state = LrState::new(set, w, lambda, prefer_dual(set.n(), set.d()));
    Ok((state.loss, state.explicit_gradient()))
}

fn check_shape(set: &LabeledSet, w: &Array2<f64>) -> Result<()> {
    if w.nrows() != set.k() || w.ncols() != set.d() + 1 {
        return Err(Error::DimensionMismatch { expected: set.k() * (set.d() + 1), actual: w.len() });
    }
    Ok(())
}

pub fn train_logreg(set: &LabeledSet, lambda: f64) -> Result<LogRegModel> {
    Ok(train_logreg_with(set, lambda, &TrainOptions::default())?.0)
}

/// Zero-initialized full-batch descent on cross-entropy + `λ/(2N)‖W‖²`.
pub fn train_logreg_with(set: &LabeledSet, lambda: f64, opts: &TrainOptions) -> Result<(LogRegModel, TrainReport)> {
    HyperParams::LogReg { lambda }.validate()?;
    set.require_classes()?;
    let w0 = Array2::zeros((set.k(), set.d() + 1));
    let mut state = LrState::new(set, &w0, lambda, prefer_dual(set.n(), set.d()));
    let report = descend(&mut state, opts.max_iter, opts.grad_tol)?;
    let w = state.weights();
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLoss);
    }
    Ok((LogRegModel { w, lambda }, report))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_set(n: usize, d: usize, k: usize, seed: u64) -> LabeledSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
        let y = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        LabeledSet::new(x, y, k).unwrap()
    }

    /// Objective computed straight from its definition.
    fn naive_loss(set: &LabeledSet, w: &Array2<f64>, lambda: f64) -> f64 {
        let d = set.d();
        let n = set.n() as f64;
        let mut total = 0.0;
        for (row, &label) in set.x().rows().into_iter().zip(set.y()) {
            let z: Vec<f64> = (0..set.k()).map(|c| (0..d).map(|j| w[[c, j]] * row[j]).sum::<f64>() + w[[c, d]]).collect();
            let lse = z.iter().map(|v| v.exp()).sum::<f64>().ln();
            total += lse - z[label];
        }
        let reg: f64 = w.slice(s![.., ..d]).iter().map(|v| v * v).sum();
        total / n + lambda / (2.0 * n) * reg
    }

    fn check_gradient(set: &LabeledSet, dual: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = Array2::from_shape_fn((set.k(), set.d() + 1), |_| rng.random_range(-0.5..0.5));
        let lambda = 0.7;
        let state = LrState::new(set, &w, lambda, dual);
        assert!((state.loss - naive_loss(set, &w, lambda)).abs() < 1e-12);
        let g = state.explicit_gradient();
        let h = 1e-5;
        let mut num = Array2::zeros(w.dim());
        for idx in ndarray::indices(w.dim()) {
            let (mut a, mut b) = (w.clone(), w.clone());
            a[idx] += h;
            b[idx] -= h;
            num[idx] = (naive_loss(set, &a, lambda) - naive_loss(set, &b, lambda)) / (2.0 * h);
        }
        let diff = (&g - &num).iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = (&g + &num).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(diff / scale < 1e-7, "relative error {}", diff / scale);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        check_gradient(&random_set(10, 5, 3, 1), false);
        check_gradient(&random_set(10, 5, 3, 1), true);
        check_gradient(&random_set(4, 9, 2, 2), true);
    }

    #[test]
    fn zero_model_is_uniform_and_predicts_class_zero() {
        let m = super::super::Model::LogReg(LogRegModel::zeros(3, 4, 0.1));
        let p = m.scores(&array![[1.0, -2.0, 3.0]]).unwrap();
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert_eq!(m.predict(&[5.0, 5.0, 5.0]).unwrap(), 0);
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn separable_points() {
        let set = LabeledSet::new(array![[-1.0], [1.0]], vec![0, 1], 2).unwrap();
        let m = train_logreg(&set, 0.01).unwrap();
        let pred = super::super::Model::LogReg(m).predict_batch(set.x()).unwrap();
        assert_eq!(pred, vec![0, 1]);
    }

    #[test]
    fn loss_never_increases_and_paths_agree() {
        let wide = random_set(12, 40, 3, 4);
        let opts = TrainOptions { max_iter: 60, ..Default::default() };
        let (m, r) = train_logreg_with(&wide, 0.3, &opts).unwrap();
        assert!(r.loss_history.windows(2).all(|w| w[1] <= w[0]));
        // Same problem through the explicit weights.
        let mut state = LrState::new(&wide, &Array2::zeros((3, 41)), 0.3, false);
        let r2 = descend(&mut state, 60, 1e-5).unwrap();
        assert_eq!(r.iterations, r2.iterations);
        let diff = (&m.w - &state.weights()).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn probabilities_sum_to_one() {
        let set = random_set(30, 4, 3, 6);
        let m = train_logreg(&set, 0.1).unwrap();
        for row in m.probabilities(set.x()).rows() {
            assert!(row.iter().all(|&p| p >= 0.0));
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn larger_lambda_shrinks_weights() {
        let set = random_set(40, 5, 3, 8);
        let norms: Vec<f64> = [0.1, 1.0, 10.0]
            .iter()
            .map(|&l| {
                let w = train_logreg(&set, l).unwrap().w;
                w.slice(s![.., ..5]).iter().map(|v| v * v).sum::<f64>()
            })
            .collect();
        assert!(norms[0] >= norms[1] && norms[1] >= norms[2], "{norms:?}");
    }

    #[test]
    fn rejects_fewer_samples_than_classes() {
        let set = LabeledSet::new(array![[1.0]], vec![0], 3).unwrap();
        assert!(train_logreg(&set, 0.1).is_err());
        assert!(train_logreg(&random_set(5, 2, 2, 0), -1.0).is_err());
    }
}

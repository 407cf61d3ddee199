use std::fmt;
use std::sync::OnceLock;

use ndarray::Array2;
use rayon::prelude::*;

use super::svm::{kernel_from_products, train_dense, SvmKernel, SvmModel};
use super::{argmax, train_ann_with, train_logreg_with, ClassifierKind, HyperParams, LabeledSet, Model, ParamGrid, Standardizer, TrainOptions};
use crate::error::{Error, Result};

/// Count of correct predictions out of a total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn from_predictions(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::LengthMismatch(pred.len(), truth.len()));
        }
        Ok(Self { correct: pred.iter().zip(truth).filter(|(p, t)| p == t).count(), total: truth.len() })
    }

    pub fn errors(&self) -> usize {
        self.total - self.correct
    }

    /// Percentage; an empty evaluation has no errors and scores 100.
    pub fn percent(&self) -> f64 {
        if self.total == 0 {
            100.0
        } else {
            100.0 * self.correct as f64 / self.total as f64
        }
    }
}

impl fmt::Display for Accuracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}%", self.percent())
    }
}

/// A model together with the standardization fitted on its training data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    pub standardizer: Standardizer,
    pub model: Model,
}

impl TrainedClassifier {
    pub fn scores(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.model.scores(&self.standardizer.apply(x)?)
    }

    pub fn predict_batch(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        self.model.predict_batch(&self.standardizer.apply(x)?)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let row = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("single row");
        Ok(self.predict_batch(&row)?[0])
    }
}

fn train_standardized(set: &LabeledSet, params: HyperParams, opts: &TrainOptions) -> Result<Model> {
    params.validate()?;
    Ok(match params {
        HyperParams::LogReg { lambda } => Model::LogReg(train_logreg_with(set, lambda, opts)?.0),
        HyperParams::Ann { lambda } => Model::Ann(train_ann_with(set, lambda, opts)?.0),
        HyperParams::SvmLinear { c } => Model::Svm(SvmModel::from_dense(set.x(), train_dense(set, SvmKernel::Linear, c, opts)?)),
        HyperParams::SvmRbf { c, gamma } => {
            Model::Svm(SvmModel::from_dense(set.x(), train_dense(set, SvmKernel::Rbf { gamma }, c, opts)?))
        }
    })
}

/// Standardizes on `set` and trains one model.
pub fn fit(set: &LabeledSet, params: HyperParams, opts: &TrainOptions) -> Result<TrainedClassifier> {
    let standardizer = Standardizer::fit(set.x());
    let scaled = standardizer.apply_set(set)?;
    let model = train_standardized(&scaled, params, opts)?;
    Ok(TrainedClassifier { standardizer, model })
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub params: HyperParams,
    pub outcome: std::result::Result<Accuracy, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best: HyperParams,
    pub val_accuracy: Accuracy,
    pub trials: Vec<Trial>,
}

/// A training set standardized on itself, plus an evaluation set under the
/// same transform. Preparing once lets every classifier share the Gram
/// matrix and the evaluation × training products.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub standardizer: Standardizer,
    pub train: LabeledSet,
    pub eval_x: Array2<f64>,
    pub eval_y: Vec<usize>,
    cross: OnceLock<(Array2<f64>, Vec<f64>, Vec<f64>)>,
}

impl Prepared {
    pub fn new(train: &LabeledSet, eval: &LabeledSet) -> Result<Self> {
        if train.d() != eval.d() {
            return Err(Error::DimensionMismatch { expected: train.d(), actual: eval.d() });
        }
        let standardizer = Standardizer::fit(train.x());
        let scaled = standardizer.apply_set(train)?;
        let eval_x = standardizer.apply(eval.x())?;
        Ok(Self { standardizer, train: scaled, eval_x, eval_y: eval.y().to_vec(), cross: OnceLock::new() })
    }

    /// Evaluation × training inner products and both sides' squared norms.
    fn cross(&self) -> &(Array2<f64>, Vec<f64>, Vec<f64>) {
        self.cross.get_or_init(|| {
            let ip = self.eval_x.dot(&self.train.x().t());
            let en: Vec<f64> = self.eval_x.rows().into_iter().map(|r| r.dot(&r)).collect();
            let tn: Vec<f64> = self.train.gram().diag().to_vec();
            (ip, en, tn)
        })
    }

    /// Trains on the prepared training set and scores the evaluation set.
    /// SVMs are evaluated through the cached products.
    pub fn evaluation_scores(&self, params: HyperParams, opts: &TrainOptions) -> Result<Array2<f64>> {
        params.validate()?;
        Ok(match params {
            HyperParams::SvmLinear { c } => train_dense(&self.train, SvmKernel::Linear, c, opts)?.decision_from_kernel(&self.cross().0),
            HyperParams::SvmRbf { c, gamma } => {
                let kernel = SvmKernel::Rbf { gamma };
                let (ip, en, tn) = self.cross();
                train_dense(&self.train, kernel, c, opts)?.decision_from_kernel(&kernel_from_products(ip, en, tn, kernel))
            }
            _ => train_standardized(&self.train, params, opts)?.scores(&self.eval_x)?,
        })
    }

    fn accuracy(&self, scores: &Array2<f64>) -> Result<(Vec<usize>, Accuracy)> {
        let pred: Vec<usize> = scores.rows().into_iter().map(argmax).collect();
        let acc = Accuracy::from_predictions(&pred, &self.eval_y)?;
        Ok((pred, acc))
    }
}

/// Trains on `train` at every grid point and keeps the one with the best
/// validation accuracy; ties go to the smaller λ, C, then γ. Failed grid
/// points are recorded and skipped.
pub fn grid_search(
    train: &LabeledSet,
    val: &LabeledSet,
    kind: ClassifierKind,
    grid: &ParamGrid,
    opts: &TrainOptions,
) -> Result<GridSearchResult> {
    grid_search_prepared(&Prepared::new(train, val)?, kind, grid, opts)
}

pub fn grid_search_prepared(data: &Prepared, kind: ClassifierKind, grid: &ParamGrid, opts: &TrainOptions) -> Result<GridSearchResult> {
    let candidates = grid.candidates(kind)?;
    let evaluate = |params: HyperParams| -> Result<Accuracy> { Ok(data.accuracy(&data.evaluation_scores(params, opts)?)?.1) };
    let trials: Vec<Trial> = candidates
        .par_iter()
        .map(|&params| Trial { params, outcome: evaluate(params).map_err(|e| e.to_string()) })
        .collect();
    let mut best: Option<(HyperParams, Accuracy)> = None;
    for t in &trials {
        if let Ok(acc) = t.outcome {
            if best.is_none_or(|(_, b)| acc.correct > b.correct) {
                best = Some((t.params, acc));
            }
        }
    }
    let (best, val_accuracy) = best.ok_or_else(|| {
        let reason = trials.iter().find_map(|t| t.outcome.clone().err()).unwrap_or_default();
        Error::InvalidParameter(format!("every grid point failed: {reason}"))
    })?;
    Ok(GridSearchResult { best, val_accuracy, trials })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefitResult {
    pub params: HyperParams,
    pub accuracy: Accuracy,
    pub predictions: Vec<usize>,
    pub classifier: TrainedClassifier,
}

/// Trains on `train ∪ val` (re-standardized) and evaluates on `test`.
pub fn refit_and_test(
    train: &LabeledSet,
    val: &LabeledSet,
    test: &LabeledSet,
    params: HyperParams,
    opts: &TrainOptions,
) -> Result<RefitResult> {
    refit_prepared(&Prepared::new(&train.concat(val)?, test)?, params, opts)
}

/// Trains on the prepared set and evaluates on its evaluation part.
pub fn refit_prepared(data: &Prepared, params: HyperParams, opts: &TrainOptions) -> Result<RefitResult> {
    let model = train_standardized(&data.train, params, opts)?;
    let (predictions, accuracy) = data.accuracy(&model.scores(&data.eval_x)?)?;
    Ok(RefitResult { params, accuracy, predictions, classifier: TrainedClassifier { standardizer: data.standardizer.clone(), model } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Three Gaussian blobs in 4-D.
    fn blobs(n: usize, seed: u64) -> LabeledSet {
        labeled_blobs((0..n).map(|i| i % 3).collect(), seed)
    }

    fn labeled_blobs(y: Vec<usize>, seed: u64) -> LabeledSet {
        let n = y.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centres = [[2.0, 0.0, 0.0, 1.0], [-2.0, 1.0, 0.0, 0.0], [0.0, -2.0, 1.5, 0.0]];
        let x = Array2::from_shape_fn((n, 4), |(i, j)| centres[y[i]][j] + rng.random_range(-1.0..1.0));
        LabeledSet::new(x, y, 3).unwrap()
    }

    #[test]
    fn accuracy_renders_two_decimals() {
        let acc = Accuracy { correct: 1312 - 75, total: 1312 };
        assert_eq!(acc.to_string(), "94.28%");
        assert_eq!(Accuracy { correct: 0, total: 10 }.to_string(), "0.00%");
        assert_eq!(Accuracy { correct: 7, total: 7 }.to_string(), "100.00%");
        assert_eq!(Accuracy { correct: 0, total: 0 }.percent(), 100.0);
        assert!(Accuracy::from_predictions(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn single_point_grid_returns_it() {
        let (tr, va) = (blobs(30, 1), blobs(15, 2));
        let grid = ParamGrid { lambdas: vec![0.3], cs: vec![2.0], gammas: vec![0.5] };
        for kind in ClassifierKind::ALL {
            let r = grid_search(&tr, &va, kind, &grid, &TrainOptions::default()).unwrap();
            assert_eq!(r.trials.len(), 1);
            assert_eq!(r.best, grid.candidates(kind).unwrap()[0]);
        }
    }

    #[test]
    fn huge_lambda_loses() {
        // With the weights shrunk to nothing, only the bias toward the
        // majority class is left.
        let tr = labeled_blobs((0..60).map(|i| if i < 30 { 0 } else { 1 + i % 2 }).collect(), 3);
        let va = blobs(30, 4);
        let grid = ParamGrid { lambdas: vec![1e6, 0.01], ..Default::default() };
        let r = grid_search(&tr, &va, ClassifierKind::LogReg, &grid, &TrainOptions::default()).unwrap();
        assert_eq!(r.best, HyperParams::LogReg { lambda: 0.01 });
        let acc: Vec<Accuracy> = r.trials.iter().map(|t| t.outcome.clone().unwrap()).collect();
        assert!(acc[0].correct > acc[1].correct, "{acc:?}");
    }

    #[test]
    fn ties_prefer_smaller_parameters() {
        let (tr, va) = (blobs(30, 5), blobs(30, 6));
        // Well separated blobs: every C gets the same validation accuracy.
        let grid = ParamGrid { cs: vec![30.0, 10.0, 3.0], ..Default::default() };
        let r = grid_search(&tr, &va, ClassifierKind::SvmLinear, &grid, &TrainOptions::default()).unwrap();
        let best_correct = r.val_accuracy.correct;
        let first_best = r.trials.iter().find(|t| t.outcome.clone().unwrap().correct == best_correct).unwrap();
        assert_eq!(r.best, first_best.params);
        assert_eq!(r.trials[0].params, HyperParams::SvmLinear { c: 3.0 });
    }

    #[test]
    fn grid_svm_shortcut_matches_full_model() {
        let (tr, va) = (blobs(45, 7), blobs(21, 8));
        let grid = ParamGrid { cs: vec![1.0], gammas: vec![0.2], ..Default::default() };
        let opts = TrainOptions::default();
        let r = grid_search(&tr, &va, ClassifierKind::SvmRbf, &grid, &opts).unwrap();
        let full = fit(&tr, r.best, &opts).unwrap();
        let acc = Accuracy::from_predictions(&full.predict_batch(va.x()).unwrap(), va.y()).unwrap();
        assert_eq!(acc, r.val_accuracy);
    }

    #[test]
    fn refit_uses_train_and_val() {
        let (tr, va, te) = (blobs(30, 9), blobs(15, 10), blobs(30, 11));
        let r = refit_and_test(&tr, &va, &te, HyperParams::SvmRbf { c: 3.0, gamma: 0.1 }, &TrainOptions::default()).unwrap();
        assert_eq!(r.predictions.len(), 30);
        assert!(r.accuracy.percent() > 80.0);
        assert_eq!(r.classifier.standardizer, Standardizer::fit(tr.concat(&va).unwrap().x()));
    }
}

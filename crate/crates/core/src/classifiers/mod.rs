//! Logistic regression, a one-hidden-layer network and one-vs-rest SVMs
//! (linear and RBF), plus validation-set tuning.

mod ann;
mod block;
mod descent;
mod logreg;
mod model_io;
mod svm;
mod tuning;

pub use ann::{ann_loss_and_gradient, train_ann, train_ann_with, AnnModel, HIDDEN_UNITS};
pub use descent::TrainReport;
pub use logreg::{logreg_loss_and_gradient, train_logreg, train_logreg_with, LogRegModel};
pub use model_io::{decode_model, encode_model, load_model, save_model};
pub use svm::{kernel_matrix, smo_binary, train_svm, train_svm_with, BinarySolution, SmoDiagnostics, SvmKernel, SvmModel};
pub use tuning::{
    fit, grid_search, grid_search_prepared, refit_and_test, refit_prepared, Accuracy, GridSearchResult, Prepared, RefitResult, Trial,
    TrainedClassifier,
};

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Descriptor matrix with class labels.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    x: Array2<f64>,
    y: Vec<usize>,
    k: usize,
    gram: OnceLock<Array2<f64>>,
}

impl LabeledSet {
    pub fn new(x: Array2<f64>, y: Vec<usize>, k: usize) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::InvalidLabeledSet("no samples".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::InvalidLabeledSet(format!("{} rows but {} labels", x.nrows(), y.len())));
        }
        if k == 0 {
            return Err(Error::InvalidLabeledSet("zero classes".into()));
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidLabeledSet(format!("label {bad} not below class count {k}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidLabeledSet("non-finite feature value".into()));
        }
        Ok(Self { x, y, k, gram: OnceLock::new() })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<usize>, k: usize) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, actual: r.len() });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let x = Array2::from_shape_vec((rows.len(), d), flat).expect("row lengths checked");
        Self::new(x, y, k)
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// `X·Xᵀ`, computed once and shared by every model trained on this set.
    pub fn gram(&self) -> &Array2<f64> {
        self.gram.get_or_init(|| self.x.dot(&self.x.t()))
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &LabeledSet) -> Result<Self> {
        if self.d() != other.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), actual: other.d() });
        }
        let x = ndarray::concatenate(Axis(0), &[self.x.view(), other.x.view()]).expect("equal widths");
        let y = self.y.iter().chain(&other.y).copied().collect();
        Self::new(x, y, self.k.max(other.k))
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let x = self.x.select(Axis(0), indices);
        let y = indices.iter().map(|&i| self.y[i]).collect();
        Self::new(x, y, self.k)
    }

    /// Same labels, features mapped through `f`.
    pub(crate) fn map_features(&self, f: impl FnOnce(&Array2<f64>) -> Array2<f64>) -> Self {
        Self { x: f(&self.x), y: self.y.clone(), k: self.k, gram: OnceLock::new() }
    }

    pub(crate) fn require_classes(&self) -> Result<()> {
        if self.n() < self.k {
            return Err(Error::InvalidLabeledSet(format!("{} samples for {} classes", self.n(), self.k)));
        }
        Ok(())
    }
}

/// Per-dimension z-scoring; constant dimensions get unit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean = x.sum_axis(Axis(0)) / n;
        let mut var = Array1::<f64>::zeros(x.ncols());
        for row in x.rows() {
            var.zip_mut_with(&(&row - &mean), |v, d| *v += d * d);
        }
        let scale = var.mapv(|v| {
            let s = (v / n).sqrt();
            if s > 1e-12 { s } else { 1.0 }
        });
        Self { mean: mean.to_vec(), scale: scale.to_vec() }
    }

    pub fn identity(d: usize) -> Self {
        Self { mean: vec![0.0; d], scale: vec![1.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.ncols() });
        }
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn apply_set(&self, set: &LabeledSet) -> Result<LabeledSet> {
        let x = self.apply(set.x())?;
        Ok(set.map_features(|_| x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassifierKind {
    LogReg,
    Ann,
    SvmLinear,
    SvmRbf,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [Self::LogReg, Self::Ann, Self::SvmLinear, Self::SvmRbf];

    /// Column heading in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            Self::LogReg => "LR",
            Self::Ann => "ANN",
            Self::SvmLinear => "SVM (Linear)",
            Self::SvmRbf => "SVM (RBF)",
        }
    }

    /// Identifier used in configs and CSV rows.
    pub fn key(self) -> &'static str {
        match self {
            Self::LogReg => "lr",
            Self::Ann => "ann",
            Self::SvmLinear => "svm-linear",
            Self::SvmRbf => "svm-rbf",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' ', '(', ')'], "-");
        let norm = norm.trim_matches('-');
        match norm {
            "lr" | "logreg" => Ok(Self::LogReg),
            "ann" | "nn" => Ok(Self::Ann),
            "svm-linear" | "linear" | "svm--linear" => Ok(Self::SvmLinear),
            "svm-rbf" | "rbf" | "svm--rbf" => Ok(Self::SvmRbf),
            _ => Err(Error::InvalidParameter(format!("unknown classifier {s:?}"))),
        }
    }
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HyperParams {
    LogReg { lambda: f64 },
    Ann { lambda: f64 },
    SvmLinear { c: f64 },
    SvmRbf { c: f64, gamma: f64 },
}

impl HyperParams {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Self::LogReg { .. } => ClassifierKind::LogReg,
            Self::Ann { .. } => ClassifierKind::Ann,
            Self::SvmLinear { .. } => ClassifierKind::SvmLinear,
            Self::SvmRbf { .. } => ClassifierKind::SvmRbf,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} = {v}")));
        match *self {
            Self::LogReg { lambda } | Self::Ann { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => bad("lambda", lambda),
            Self::SvmLinear { c } | Self::SvmRbf { c, .. } if !(c > 0.0 && c.is_finite()) => bad("C", c),
            Self::SvmRbf { gamma, .. } if !(gamma > 0.0 && gamma.is_finite()) => bad("gamma", gamma),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LogReg { lambda } | Self::Ann { lambda } => write!(f, "lambda={lambda}"),
            Self::SvmLinear { c } => write!(f, "C={c}"),
            Self::SvmRbf { c, gamma } => write!(f, "C={c};gamma={gamma}"),
        }
    }
}

impl HyperParams {
    /// Parses the display form for a given classifier: `lambda=0.1`, `C=10`
    /// or `C=10;gamma=0.01`. Keys are case-insensitive, in any order.
    pub fn parse(kind: ClassifierKind, s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse {s:?} as {} parameters", kind.key()));
        let mut lambda = None;
        let mut c = None;
        let mut gamma = None;
        for part in s.split([';', ',']).map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(bad)?;
            let value: f64 = value.trim().parse().map_err(|_| bad())?;
            let slot = match key.trim().to_ascii_lowercase().as_str() {
                "lambda" => &mut lambda,
                "c" => &mut c,
                "gamma" => &mut gamma,
                _ => return Err(bad()),
            };
            if slot.replace(value).is_some() {
                return Err(bad());
            }
        }
        let params = match (kind, lambda, c, gamma) {
            (ClassifierKind::LogReg, Some(lambda), None, None) => Self::LogReg { lambda },
            (ClassifierKind::Ann, Some(lambda), None, None) => Self::Ann { lambda },
            (ClassifierKind::SvmLinear, None, Some(c), None) => Self::SvmLinear { c },
            (ClassifierKind::SvmRbf, None, Some(c), Some(gamma)) => Self::SvmRbf { c, gamma },
            _ => return Err(bad()),
        };
        params.validate()?;
        Ok(params)
    }
}

/// Candidate values per hyperparameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    pub lambdas: Vec<f64>,
    pub cs: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl Default for ParamGrid {
    fn default() -> Self {
        Self {
            lambdas: vec![0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0],
            cs: vec![0.3, 1.0, 3.0, 10.0, 30.0],
            gammas: vec![0.001, 0.003, 0.01, 0.03, 0.1],
        }
    }
}

impl ParamGrid {
    /// Grid points for `kind`, sorted by the tie-break order.
    pub fn candidates(&self, kind: ClassifierKind) -> Result<Vec<HyperParams>> {
        let need = |v: &Vec<f64>, what: &str| {
            if v.is_empty() {
                Err(Error::InvalidParameter(format!("empty {what} grid")))
            } else {
                let mut s = v.clone();
                s.sort_by(f64::total_cmp);
                s.dedup();
                Ok(s)
            }
        };
        let out: Vec<HyperParams> = match kind {
            ClassifierKind::LogReg => need(&self.lambdas, "lambda")?.into_iter().map(|lambda| HyperParams::LogReg { lambda }).collect(),
            ClassifierKind::Ann => need(&self.lambdas, "lambda")?.into_iter().map(|lambda| HyperParams::Ann { lambda }).collect(),
            ClassifierKind::SvmLinear => need(&self.cs, "C")?.into_iter().map(|c| HyperParams::SvmLinear { c }).collect(),
            ClassifierKind::SvmRbf => {
                let gammas = need(&self.gammas, "gamma")?;
                need(&self.cs, "C")?
                    .into_iter()
                    .flat_map(|c| gammas.iter().map(move |&gamma| HyperParams::SvmRbf { c, gamma }))
                    .collect()
            }
        };
        out.iter().try_for_each(HyperParams::validate)?;
        Ok(out)
    }
}

/// Optimizer budgets and seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub seed: u64,
    pub smo_tol: f64,
    pub smo_max_updates: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { max_iter: 2000, grad_tol: 1e-5, seed: 0, smo_tol: 1e-3, smo_max_updates: 100_000 }
    }
}

/// Any trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    LogReg(LogRegModel),
    Ann(AnnModel),
    Svm(SvmModel),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Self::LogReg(m) => m.dim(),
            Self::Ann(m) => m.dim(),
            Self::Svm(m) => m.dim(),
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            Self::LogReg(m) => m.classes(),
            Self::Ann(m) => m.classes(),
            Self::Svm(m) => m.classes(),
        }
    }

    pub fn params(&self) -> HyperParams {
        match self {
            Self::LogReg(m) => HyperParams::LogReg { lambda: m.lambda },
            Self::Ann(m) => HyperParams::Ann { lambda: m.lambda },
            Self::Svm(m) => m.params(),
        }
    }

    /// Per-class scores (N×K): probabilities for LR/ANN, decision values for SVM.
    pub fn scores(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.ncols() });
        }
        Ok(match self {
            Self::LogReg(m) => m.probabilities(x),
            Self::Ann(m) => m.probabilities(x),
            Self::Svm(m) => m.decision_values(x),
        })
    }

    pub fn predict_batch(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        Ok(self.scores(x)?.rows().into_iter().map(argmax).collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let row = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("single row");
        Ok(self.predict_batch(&row)?[0])
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Row-wise softmax of `z` and `Σ_i −log p(y_i)`.
pub(crate) fn softmax_xent(z: &Array2<f64>, y: &[usize]) -> (Array2<f64>, f64) {
    let mut p = z.clone();
    let mut loss = 0.0;
    for (mut row, &label) in p.rows_mut().into_iter().zip(y) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let zy = row[label];
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
        loss += m + s.ln() - zy;
    }
    (p, loss)
}

pub(crate) fn softmax(z: &Array2<f64>) -> Array2<f64> {
    let zeros = vec![0; z.nrows()];
    softmax_xent(z, &zeros).0
}

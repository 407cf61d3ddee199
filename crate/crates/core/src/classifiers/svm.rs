//! Soft-margin SVMs solved by SMO with maximal-violating-pair selection,
//! combined one-vs-rest.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use super::{HyperParams, LabeledSet, TrainOptions};
use crate::error::{Error, Result};

const BOUND_EPS: f64 = 1e-12;
const ETA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SvmKernel {
    Linear,
    Rbf { gamma: f64 },
}

/// Kernel values from inner products `ip` (rows × cols) and squared norms.
pub(crate) fn kernel_from_products(ip: &Array2<f64>, row_sq: &[f64], col_sq: &[f64], kernel: SvmKernel) -> Array2<f64> {
    match kernel {
        SvmKernel::Linear => ip.clone(),
        SvmKernel::Rbf { gamma } => {
            let mut k = ip.clone();
            for ((i, j), v) in k.indexed_iter_mut() {
                let d2 = (row_sq[i] + col_sq[j] - 2.0 * *v).max(0.0);
                *v = (-gamma * d2).exp();
            }
            k
        }
    }
}

fn diag(g: &Array2<f64>) -> Vec<f64> {
    g.diag().to_vec()
}

fn row_sq_norms(x: &Array2<f64>) -> Vec<f64> {
    x.rows().into_iter().map(|r| r.dot(&r)).collect()
}

/// Full training kernel matrix, derived from the cached Gram matrix.
pub fn kernel_matrix(set: &LabeledSet, kernel: SvmKernel) -> Array2<f64> {
    let g = set.gram();
    let d = diag(g);
    kernel_from_products(g, &d, &d, kernel)
}

/// Solver outcome for one binary problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoDiagnostics {
    pub updates: u64,
    /// No pair violates the KKT conditions by more than `2·tol`.
    pub converged: bool,
    /// Final `b_low − b_up`.
    pub gap: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    pub alpha: Vec<f64>,
    pub b: f64,
    pub diagnostics: SmoDiagnostics,
}

impl BinarySolution {
    /// Decision values on the training points.
    pub fn decision(&self, kernel: &Array2<f64>, y: &[f64]) -> Vec<f64> {
        let coef: Array1<f64> = self.alpha.iter().zip(y).map(|(a, y)| a * y).collect();
        (kernel.dot(&coef) + self.b).to_vec()
    }
}

/// Maximizes `Σα − ½ΣΣ αᵢαⱼyᵢyⱼKᵢⱼ` subject to `0 ≤ α ≤ C`, `Σαᵢyᵢ = 0`.
///
/// Stops once the largest KKT violation is below `2·tol`: the gap between
/// the minimum of `Eᵢ = f(xᵢ) − b − yᵢ` over indices whose α may move up in
/// the `y` direction and the maximum over those that may move down. Each
/// step pairs that minimizer with the down-movable index of largest
/// second-order gain `(Eⱼ − E_up)² / ηⱼ`.
pub fn smo_binary(kernel: &Array2<f64>, y: &[f64], c: f64, tol: f64, max_updates: usize) -> Result<BinarySolution> {
    let n = y.len();
    if kernel.dim() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n * n, actual: kernel.len() });
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidParameter("binary labels must be ±1".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C = {c}")));
    }
    let kernel = kernel.as_standard_layout();
    let ks = kernel.as_slice().expect("standard layout");
    let row = |i: usize| &ks[i * n..(i + 1) * n];
    let diag: Vec<f64> = (0..n).map(|i| ks[i * n + i]).collect();
    let mut alpha = vec![0.0f64; n];
    // E = f − y with f the decision value without bias; f starts at zero.
    let mut e: Vec<f64> = y.iter().map(|v| -v).collect();
    // Whether αᵢ may still move up (resp. down) along yᵢ.
    let movable = |a: f64, y: f64| (if y > 0.0 { a < c } else { a > 0.0 }, if y > 0.0 { a > 0.0 } else { a < c });
    let (mut up, mut low): (Vec<bool>, Vec<bool>) = y.iter().map(|&v| movable(0.0, v)).unzip();
    let mut updates = 0u64;
    let (mut b_up, mut b_low);
    let converged = loop {
        let (mut i_up, mut i_low) = (usize::MAX, usize::MAX);
        b_up = f64::INFINITY;
        b_low = f64::NEG_INFINITY;
        for (i, &ei) in e.iter().enumerate() {
            if up[i] && ei < b_up {
                b_up = ei;
                i_up = i;
            }
            if low[i] && ei > b_low {
                b_low = ei;
                i_low = i;
            }
        }
        if i_up == usize::MAX || i_low == usize::MAX || b_low <= b_up + 2.0 * tol {
            break true;
        }
        if updates as usize >= max_updates {
            break false;
        }
        // Second index: the down-movable violator promising the largest dual gain.
        let (i2, row2) = (i_up, row(i_up));
        let mut i1 = i_low;
        let mut best_gain = 0.0;
        for (j, ((&ej, &kjj), &k2j)) in e.iter().zip(&diag).zip(row2).enumerate() {
            let diff = ej - b_up;
            if low[j] && diff > 0.0 {
                let gain = diff * diff / (kjj + diag[i2] - 2.0 * k2j).max(ETA_FLOOR);
                if gain > best_gain {
                    best_gain = gain;
                    i1 = j;
                }
            }
        }
        let (y1, y2) = (y[i1], y[i2]);
        let (a1, a2) = (alpha[i1], alpha[i2]);
        let (lo, hi) = if y1 != y2 { ((a2 - a1).max(0.0), (c + a2 - a1).min(c)) } else { ((a1 + a2 - c).max(0.0), (a1 + a2).min(c)) };
        let eta = (diag[i1] + diag[i2] - 2.0 * row2[i1]).max(ETA_FLOOR);
        // Snapping to the box keeps rounding residue (c − 1e-16) out of the working sets.
        let snap = |a: f64| if a < BOUND_EPS * c { 0.0 } else if a > c - BOUND_EPS * c { c } else { a };
        let new2 = snap((a2 + y2 * (e[i1] - b_up) / eta).clamp(lo, hi));
        let new1 = snap((a1 + y1 * y2 * (a2 - new2)).clamp(0.0, c));
        let (d1, d2) = ((new1 - a1) * y1, (new2 - a2) * y2);
        alpha[i1] = new1;
        alpha[i2] = new2;
        (up[i1], low[i1]) = movable(new1, y1);
        (up[i2], low[i2]) = movable(new2, y2);
        for ((ek, &r1), &r2) in e.iter_mut().zip(row(i1)).zip(row2) {
            *ek += d1 * r1 + d2 * r2;
        }
        updates += 1;
        if d1 == 0.0 && d2 == 0.0 {
            // Numerically stuck; the pair cannot move further.
            break false;
        }
    };
    let f: Vec<f64> = e.iter().zip(y).map(|(e, y)| e + y).collect();
    let b = match (b_up.is_finite(), b_low.is_finite()) {
        (true, true) => -(b_up + b_low) / 2.0,
        (true, false) => -b_up,
        (false, true) => -b_low,
        (false, false) => 0.0,
    };
    let objective = alpha.iter().sum::<f64>() - 0.5 * alpha.iter().zip(y).zip(&f).map(|((a, y), f)| a * y * f).sum::<f64>();
    let gap = if b_up.is_finite() && b_low.is_finite() { b_low - b_up } else { 0.0 };
    Ok(BinarySolution { alpha, b, diagnostics: SmoDiagnostics { updates, converged, gap, objective } })
}

/// One-vs-rest solution with a coefficient (`αᵢyᵢ`) for every training sample.
pub(crate) struct DenseSvm {
    pub kernel: SvmKernel,
    pub c: f64,
    pub coef: Array2<f64>,
    pub bias: Vec<f64>,
    pub diagnostics: Vec<SmoDiagnostics>,
}

impl DenseSvm {
    /// Decision values given the kernel between evaluation and training points.
    pub fn decision_from_kernel(&self, cross: &Array2<f64>) -> Array2<f64> {
        cross.dot(&self.coef.t()) + &Array1::from(self.bias.clone())
    }
}

pub(crate) fn train_dense(set: &LabeledSet, kernel: SvmKernel, c: f64, opts: &TrainOptions) -> Result<DenseSvm> {
    let params = match kernel {
        SvmKernel::Linear => HyperParams::SvmLinear { c },
        SvmKernel::Rbf { gamma } => HyperParams::SvmRbf { c, gamma },
    };
    params.validate()?;
    let km = kernel_matrix(set, kernel);
    let solutions: Vec<BinarySolution> = (0..set.k())
        .into_par_iter()
        .map(|class| {
            let y: Vec<f64> = set.y().iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            smo_binary(&km, &y, c, opts.smo_tol, opts.smo_max_updates)
        })
        .collect::<Result<_>>()?;
    let mut coef = Array2::zeros((set.k(), set.n()));
    for (class, s) in solutions.iter().enumerate() {
        for (i, (&a, &l)) in s.alpha.iter().zip(set.y()).enumerate() {
            coef[[class, i]] = if l == class { a } else { -a };
        }
    }
    Ok(DenseSvm {
        kernel,
        c,
        coef,
        bias: solutions.iter().map(|s| s.b).collect(),
        diagnostics: solutions.iter().map(|s| s.diagnostics).collect(),
    })
}

/// One-vs-rest SVM over the union of all problems' support vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub kernel: SvmKernel,
    pub c: f64,
    /// Union of support vectors (n_sv × D).
    pub support_vectors: Array2<f64>,
    /// `αᵢyᵢ` of each support vector in each binary problem (K × n_sv).
    pub coef: Array2<f64>,
    pub bias: Vec<f64>,
    pub diagnostics: Vec<SmoDiagnostics>,
}

impl SvmModel {
    pub(crate) fn from_dense(x: &Array2<f64>, dense: DenseSvm) -> Self {
        let keep: Vec<usize> = (0..x.nrows()).filter(|&i| dense.coef.column(i).iter().any(|&v| v != 0.0)).collect();
        Self {
            kernel: dense.kernel,
            c: dense.c,
            support_vectors: x.select(Axis(0), &keep),
            coef: dense.coef.select(Axis(1), &keep),
            bias: dense.bias,
            diagnostics: dense.diagnostics,
        }
    }

    pub fn dim(&self) -> usize {
        self.support_vectors.ncols()
    }

    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    pub fn params(&self) -> HyperParams {
        match self.kernel {
            SvmKernel::Linear => HyperParams::SvmLinear { c: self.c },
            SvmKernel::Rbf { gamma } => HyperParams::SvmRbf { c: self.c, gamma },
        }
    }

    pub fn converged(&self) -> bool {
        self.diagnostics.iter().all(|d| d.converged)
    }

    /// One-vs-rest decision values (N×K). The caller checks dimensions.
    pub fn decision_values(&self, x: &Array2<f64>) -> Array2<f64> {
        let bias = Array1::from(self.bias.clone());
        if self.support_vectors.nrows() == 0 {
            return Array2::zeros((x.nrows(), self.classes())) + &bias;
        }
        match self.kernel {
            SvmKernel::Linear => {
                let w = self.coef.dot(&self.support_vectors);
                x.dot(&w.t()) + &bias
            }
            SvmKernel::Rbf { .. } => {
                let ip = x.dot(&self.support_vectors.t());
                let k = kernel_from_products(&ip, &row_sq_norms(x), &row_sq_norms(&self.support_vectors), self.kernel);
                k.dot(&self.coef.t()) + &bias
            }
        }
    }
}

pub fn train_svm(set: &LabeledSet, kernel: SvmKernel, c: f64) -> Result<SvmModel> {
    train_svm_with(set, kernel, c, &TrainOptions::default())
}

/// Trains K one-vs-rest problems. Hitting the update cap is not an error;
/// it shows up in the model's diagnostics.
pub fn train_svm_with(set: &LabeledSet, kernel: SvmKernel, c: f64, opts: &TrainOptions) -> Result<SvmModel> {
    let dense = train_dense(set, kernel, c, opts)?;
    Ok(SvmModel::from_dense(set.x(), dense))
}

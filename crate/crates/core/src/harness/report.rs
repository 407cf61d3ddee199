use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::DescriptorVariant;
use crate::classifiers::{Accuracy, ClassifierKind, HyperParams, Trial};
use crate::dataset::Sample;
use crate::descriptors::DescriptorKind;
use crate::error::{Error, Result};
use crate::imagecore::encode_pgm;

/// One held-out sample the model got wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Misclassified {
    pub id: String,
    pub truth: usize,
    pub predicted: usize,
}

/// Result of tuning and testing one (descriptor, classifier) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub params: HyperParams,
    pub val_accuracy: Accuracy,
    pub accuracy: Accuracy,
    pub trials: Vec<Trial>,
    /// Test predictions, aligned with the report's test samples.
    pub predictions: Vec<usize>,
    pub confusion: Array2<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportCell {
    pub descriptor: DescriptorVariant,
    pub classifier: ClassifierKind,
    pub outcome: std::result::Result<CellOutcome, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    /// Labels present in the data, ascending; confusion matrices are
    /// indexed by position in this list.
    pub classes: Vec<usize>,
    pub descriptors: Vec<DescriptorVariant>,
    pub classifiers: Vec<ClassifierKind>,
    /// Train, validation and test sizes.
    pub split_sizes: [usize; 3],
    pub test_ids: Vec<String>,
    pub test_labels: Vec<usize>,
    /// Descriptor-major, in config order.
    pub cells: Vec<ReportCell>,
}

impl ExperimentReport {
    pub fn cell(&self, descriptor: DescriptorVariant, classifier: ClassifierKind) -> Option<&ReportCell> {
        self.cells.iter().find(|c| c.descriptor == descriptor && c.classifier == classifier)
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }

    /// The cell with the highest test accuracy; the first one wins ties.
    pub fn best_cell(&self) -> Option<&ReportCell> {
        let mut best: Option<&ReportCell> = None;
        for c in &self.cells {
            if let Ok(o) = &c.outcome {
                if best.is_none_or(|b| o.accuracy.correct > b.outcome.as_ref().map_or(0, |bo| bo.accuracy.correct)) {
                    best = Some(c);
                }
            }
        }
        best
    }

    pub fn misclassified(&self, outcome: &CellOutcome) -> Vec<Misclassified> {
        self.test_ids
            .iter()
            .zip(&self.test_labels)
            .zip(&outcome.predictions)
            .filter(|((_, t), p)| t != p)
            .map(|((id, &truth), &predicted)| Misclassified { id: id.clone(), truth, predicted })
            .collect()
    }

    pub fn matrix(&self) -> AccuracyMatrix {
        let mut m = AccuracyMatrix::new(self.descriptors.clone(), self.classifiers.clone());
        for c in &self.cells {
            if let Ok(o) = &c.outcome {
                m.set(c.descriptor, c.classifier, o.accuracy.percent(), Some(o.params));
            }
        }
        m
    }
}

/// A descriptor × classifier table of test accuracies in percent. Missing
/// entries are failed (or never run) cells.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyMatrix {
    pub rows: Vec<DescriptorVariant>,
    pub columns: Vec<ClassifierKind>,
    entries: Vec<Vec<Option<(f64, Option<HyperParams>)>>>,
}

impl AccuracyMatrix {
    pub fn new(rows: Vec<DescriptorVariant>, columns: Vec<ClassifierKind>) -> Self {
        let entries = vec![vec![None; columns.len()]; rows.len()];
        Self { rows, columns, entries }
    }

    fn index(&self, row: DescriptorVariant, col: ClassifierKind) -> Option<(usize, usize)> {
        Some((self.rows.iter().position(|&r| r == row)?, self.columns.iter().position(|&c| c == col)?))
    }

    /// Records a percentage; ignored for rows or columns not in the table.
    pub fn set(&mut self, row: DescriptorVariant, col: ClassifierKind, percent: f64, params: Option<HyperParams>) {
        if let Some((i, j)) = self.index(row, col) {
            self.entries[i][j] = Some((percent, params));
        }
    }

    pub fn get(&self, row: DescriptorVariant, col: ClassifierKind) -> Option<f64> {
        let (i, j) = self.index(row, col)?;
        self.entries[i][j].map(|(p, _)| p)
    }

    /// Aligned text table: descriptors down, classifiers across.
    pub fn render_table(&self) -> String {
        let cell = |e: &Option<(f64, Option<HyperParams>)>| e.map_or("failed".to_string(), |(p, _)| format!("{p:.2}%"));
        let first = self.rows.iter().map(|r| r.to_string().len()).chain([10]).max().unwrap_or(10);
        let widths: Vec<usize> = self.columns.iter().map(|c| c.title().len().max(7)).collect();
        let mut out = String::new();
        let mut line = format!("{:<first$}", "Descriptor");
        for (c, w) in self.columns.iter().zip(&widths) {
            write!(line, "  {:>w$}", c.title()).expect("write to String");
        }
        out.push_str(line.trim_end());
        out.push('\n');
        for (r, row) in self.rows.iter().zip(&self.entries) {
            let mut line = format!("{:<first$}", r.to_string());
            for (e, w) in row.iter().zip(&widths) {
                write!(line, "  {:>w$}", cell(e)).expect("write to String");
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }

    /// `descriptor,pyramid,classifier,params,accuracy`, one row per cell.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("descriptor,pyramid,classifier,params,accuracy\n");
        for (r, row) in self.rows.iter().zip(&self.entries) {
            for (c, e) in self.columns.iter().zip(row) {
                let (params, acc) = match e {
                    Some((p, params)) => (params.map(|x| x.to_string()).unwrap_or_default(), format!("{p:.2}%")),
                    None => (String::new(), "failed".to_string()),
                };
                writeln!(out, "{},{},{},{params},{acc}", r.kind.name(), r.pyramid, c.key()).expect("write to String");
            }
        }
        out
    }

    /// X7 minus base accuracy for every descriptor kind and classifier with
    /// both entries, computed on the two-decimal values the table shows.
    pub fn pyramid_deltas(&self) -> Vec<PyramidDelta> {
        let hundredths = |p: f64| (p * 100.0).round() as i64;
        let mut kinds: Vec<DescriptorKind> = Vec::new();
        for r in &self.rows {
            if !kinds.contains(&r.kind) {
                kinds.push(r.kind);
            }
        }
        let mut out = Vec::new();
        for kind in kinds {
            for &classifier in &self.columns {
                let base = self.get(DescriptorVariant { kind, pyramid: false }, classifier);
                let x7 = self.get(DescriptorVariant { kind, pyramid: true }, classifier);
                if let (Some(base), Some(x7)) = (base, x7) {
                    out.push(PyramidDelta { kind, classifier, base: hundredths(base), pyramid: hundredths(x7) });
                }
            }
        }
        out
    }
}

/// Accuracies in hundredths of a percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PyramidDelta {
    pub kind: DescriptorKind,
    pub classifier: ClassifierKind,
    pub base: i64,
    pub pyramid: i64,
}

impl PyramidDelta {
    pub fn delta(&self) -> i64 {
        self.pyramid - self.base
    }
}

fn hundredths_str(v: i64, signed: bool) -> String {
    let sign = if v < 0 { "-" } else if signed { "+" } else { "" };
    format!("{sign}{}.{:02}", v.abs() / 100, v.abs() % 100)
}

/// `descriptor,classifier,base,x7,delta` rows, e.g. `LBP,lr,52.97%,79.73%,+26.76`.
pub fn render_deltas(deltas: &[PyramidDelta]) -> String {
    let mut out = String::from("descriptor,classifier,base,x7,delta\n");
    for d in deltas {
        writeln!(
            out,
            "{},{},{}%,{}%,{}",
            d.kind.name(),
            d.classifier.key(),
            hundredths_str(d.base, false),
            hundredths_str(d.pyramid, false),
            hundredths_str(d.delta(), true)
        )
        .expect("write to String");
    }
    out
}

/// K×K counts: entry (i, j) is the number of samples of class i predicted as j.
pub fn confusion(predictions: &[usize], labels: &[usize], k: usize) -> Result<Array2<usize>> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch(predictions.len(), labels.len()));
    }
    let mut m = Array2::zeros((k, k));
    for (&p, &t) in predictions.iter().zip(labels) {
        if p >= k || t >= k {
            return Err(Error::InvalidParameter(format!("label {} outside {k} classes", p.max(t))));
        }
        m[[t, p]] += 1;
    }
    Ok(m)
}

/// CSV with a `true/pred` header of class labels and one row per true class.
pub fn render_confusion(m: &Array2<usize>, classes: &[usize]) -> String {
    let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(",");
    let mut out = format!("true/pred,{}\n", join(&mut classes.iter().map(|c| c.to_string())));
    for (c, row) in classes.iter().zip(m.rows()) {
        writeln!(out, "{c},{}", join(&mut row.iter().map(|v| v.to_string()))).expect("write to String");
    }
    out
}

/// Keeps ASCII letters, digits, `-` and `.`; everything else becomes `_`.
fn file_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect::<String>().trim_end_matches(".pgm").to_string()
}

pub const MISCLASSIFIED_INDEX: &str = "index.csv";

/// Writes every misclassified sample as `true<T>_pred<P>_<id>.pgm` plus an
/// `index.csv` of `file,id,true,pred` rows. Returns the number of images.
pub fn dump_misclassified(errors: &[Misclassified], samples: &[Sample], out_dir: &Path) -> Result<usize> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let by_id: HashMap<&str, &Sample> = samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut index = String::from("file,id,true,pred\n");
    for m in errors {
        let sample = by_id.get(m.id.as_str()).ok_or_else(|| Error::format("misclassified list", format!("unknown sample id {:?}", m.id)))?;
        let name = format!("true{}_pred{}_{}.pgm", m.truth, m.predicted, file_safe(&m.id));
        let path = out_dir.join(&name);
        std::fs::write(&path, encode_pgm(&sample.image)).map_err(|e| Error::io(&path, e))?;
        writeln!(index, "{name},{},{},{}", m.id, m.truth, m.predicted).expect("write to String");
    }
    let path = out_dir.join(MISCLASSIFIED_INDEX);
    std::fs::write(&path, index).map_err(|e| Error::io(&path, e))?;
    Ok(errors.len())
}

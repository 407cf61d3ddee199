use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;

use super::cache::{cache_path, dataset_hash, read_cache, write_cache, CachedFeatures};
use super::config::{DatasetSource, ExperimentConfig};
use super::report::{confusion, dump_misclassified, render_confusion, render_deltas, CellOutcome, ExperimentReport, ReportCell};
use super::DescriptorVariant;
use crate::classifiers::{grid_search_prepared, refit_prepared, ClassifierKind, LabeledSet, Prepared};
use crate::dataset::{ingest, split, synth_glyphs, GlyphParams, Sample, SplitSpec};
use crate::descriptors::{DescriptorConfig, Extractor};
use crate::error::{Error, Result};
use crate::pyramid::describe;

/// Maps arbitrary class labels onto `0..k` for training and back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseLabels {
    pub classes: Vec<usize>,
}

impl DenseLabels {
    pub fn new(labels: impl IntoIterator<Item = usize>) -> Self {
        let mut classes: Vec<usize> = labels.into_iter().collect();
        classes.sort_unstable();
        classes.dedup();
        Self { classes }
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn dense(&self, label: usize) -> Option<usize> {
        self.classes.binary_search(&label).ok()
    }

    pub fn original(&self, index: usize) -> usize {
        self.classes[index]
    }
}

/// Samples plus human-readable warnings about skipped inputs.
pub fn load_dataset(source: &DatasetSource) -> Result<(Vec<Sample>, Vec<String>)> {
    match source {
        DatasetSource::Directory(root) => {
            let got = ingest(root)?;
            let warnings = got.warnings.iter().map(|w| format!("{}: {}", w.path.display(), w.reason)).collect();
            Ok((got.samples, warnings))
        }
        DatasetSource::Synthetic { seed, per_class } => Ok((synth_glyphs(*per_class, *seed, &GlyphParams::default()), Vec::new())),
    }
}

/// Descriptor cache directory bound to one dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureCache {
    pub dir: PathBuf,
    pub hash: String,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>, samples: &[Sample], config: &DescriptorConfig) -> Self {
        Self { dir: dir.into(), hash: dataset_hash(samples, config) }
    }

    pub fn path(&self, variant: DescriptorVariant) -> PathBuf {
        cache_path(&self.dir, &self.hash, variant)
    }
}

/// N×D descriptor matrix, rounded to f32 so that cached and fresh features
/// agree bit for bit. A cache entry is used only if its variant, labels and
/// shape match; anything else is recomputed and overwritten.
pub fn extract_features(samples: &[Sample], variant: DescriptorVariant, extractor: &Extractor, cache: Option<&FeatureCache>) -> Result<Array2<f64>> {
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let dim = extractor.base_dim(variant.kind) * if variant.pyramid { 7 } else { 1 };
    let path = cache.map(|c| c.path(variant));
    if let Some(hit) = path.as_deref().filter(|p| p.is_file()).and_then(|p| read_cache(p).ok()) {
        if hit.variant == variant && hit.labels == labels && hit.features.dim() == (samples.len(), dim) {
            return Ok(hit.features);
        }
    }
    let rows: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|s| describe(extractor, &s.image, variant.kind, variant.pyramid).map(|d| d.into_values()))
        .collect::<Result<_>>()?;
    let mut features = Array2::zeros((samples.len(), dim));
    for (mut out, row) in features.rows_mut().into_iter().zip(&rows) {
        if row.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: row.len() });
        }
        out.iter_mut().zip(row).for_each(|(o, &v)| *o = v as f32 as f64);
    }
    if let Some(p) = path {
        write_cache(&p, &CachedFeatures { variant, features: features.clone(), labels })?;
    }
    Ok(features)
}

fn run_cell(tune: &Prepared, refit: &Prepared, kind: ClassifierKind, config: &ExperimentConfig, dense: &DenseLabels) -> Result<CellOutcome> {
    let search = grid_search_prepared(tune, kind, &config.grid, &config.train)?;
    let result = refit_prepared(refit, search.best, &config.train)?;
    let confusion = confusion(&result.predictions, &refit.eval_y, dense.k())?;
    Ok(CellOutcome {
        params: search.best,
        val_accuracy: search.val_accuracy,
        accuracy: result.accuracy,
        trials: search.trials,
        predictions: result.predictions.iter().map(|&p| dense.original(p)).collect(),
        confusion,
    })
}

/// Runs every configured cell on `samples`. Cell failures are recorded in
/// the report; only invalid configs, bad splits and cache I/O are fatal.
pub fn run_on(config: &ExperimentConfig, samples: &[Sample], progress: &(dyn Fn(&str) + Sync)) -> Result<ExperimentReport> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dense = DenseLabels::new(samples.iter().map(|s| s.label));
    let y: Vec<usize> = samples.iter().map(|s| dense.dense(s.label).expect("label listed")).collect();
    let parts = split(samples, &SplitSpec::with_seed(config.split_seed))?;
    let extractor = Extractor::new(DescriptorConfig::default());
    let cache = config.cache.as_ref().map(|dir| FeatureCache::new(dir, samples, extractor.config()));
    let mut cells = Vec::with_capacity(config.descriptors.len() * config.classifiers.len());
    for &variant in &config.descriptors {
        progress(&format!("{variant}: extracting"));
        let prepared = extract_features(samples, variant, &extractor, cache.as_ref()).and_then(|x| {
            let all = LabeledSet::new(x, y.clone(), dense.k())?;
            let (train, val, test) = (all.subset(&parts.train)?, all.subset(&parts.val)?, all.subset(&parts.test)?);
            Ok((Prepared::new(&train, &val)?, Prepared::new(&train.concat(&val)?, &test)?))
        });
        let (tune, refit) = match prepared {
            Ok(p) => p,
            Err(e @ Error::Io { .. }) => return Err(e),
            Err(e) => {
                let reason = e.to_string();
                progress(&format!("{variant}: failed: {reason}"));
                cells.extend(config.classifiers.iter().map(|&classifier| ReportCell { descriptor: variant, classifier, outcome: Err(reason.clone()) }));
                continue;
            }
        };
        let row: Vec<ReportCell> = config
            .classifiers
            .par_iter()
            .map(|&classifier| {
                let outcome = run_cell(&tune, &refit, classifier, config, &dense).map_err(|e| e.to_string());
                match &outcome {
                    Ok(o) => progress(&format!("{variant} {}: {} ({})", classifier.key(), o.accuracy, o.params)),
                    Err(e) => progress(&format!("{variant} {}: failed: {e}", classifier.key())),
                }
                ReportCell { descriptor: variant, classifier, outcome }
            })
            .collect();
        cells.extend(row);
    }
    Ok(ExperimentReport {
        classes: dense.classes.clone(),
        descriptors: config.descriptors.clone(),
        classifiers: config.classifiers.clone(),
        split_sizes: [parts.train.len(), parts.val.len(), parts.test.len()],
        test_ids: parts.test.iter().map(|&i| samples[i].id.clone()).collect(),
        test_labels: parts.test.iter().map(|&i| samples[i].label).collect(),
        cells,
    })
}

/// Runs `f` on a pool of `workers` threads (0 means one per core).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Loads the configured dataset and runs the full matrix on the configured
/// number of workers.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let (samples, _) = load_dataset(&config.dataset)?;
    with_workers(config.workers, || run_on(config, &samples, &|_| {}))?
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `table.txt`, `results.csv`, `deltas.csv`, `trials.csv`,
/// `misclassified.csv`, `failures.csv`, one `confusion/<variant>_<classifier>.csv`
/// per successful cell, and the best cell's misclassified images under
/// `misclassified/`.
pub fn write_report(report: &ExperimentReport, samples: &[Sample], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir.join("confusion")).map_err(|e| Error::io(dir, e))?;
    let matrix = report.matrix();
    write(&dir.join("table.txt"), &matrix.render_table())?;
    write(&dir.join("results.csv"), &matrix.render_csv())?;
    write(&dir.join("deltas.csv"), &render_deltas(&matrix.pyramid_deltas()))?;
    let mut trials = String::from("descriptor,classifier,params,val_accuracy\n");
    let mut wrong = String::from("descriptor,classifier,id,true,pred\n");
    let mut failures = String::from("descriptor,classifier,reason\n");
    for cell in &report.cells {
        let (d, c) = (cell.descriptor, cell.classifier.key());
        match &cell.outcome {
            Ok(o) => {
                for t in &o.trials {
                    let acc = t.outcome.as_ref().map_or("failed".to_string(), |a| a.to_string());
                    writeln!(trials, "{d},{c},{},{acc}", t.params).expect("write to String");
                }
                for m in report.misclassified(o) {
                    writeln!(wrong, "{d},{c},{},{},{}", m.id, m.truth, m.predicted).expect("write to String");
                }
                write(&dir.join("confusion").join(format!("{d}_{c}.csv")), &render_confusion(&o.confusion, &report.classes))?;
            }
            Err(reason) => writeln!(failures, "{d},{c},{}", reason.replace(['\n', ','], " ")).expect("write to String"),
        }
    }
    write(&dir.join("trials.csv"), &trials)?;
    write(&dir.join("misclassified.csv"), &wrong)?;
    write(&dir.join("failures.csv"), &failures)?;
    let dump = dir.join("misclassified");
    if dump.is_dir() {
        std::fs::remove_dir_all(&dump).map_err(|e| Error::io(&dump, e))?;
    }
    if let Some(Ok(best)) = report.best_cell().map(|c| &c.outcome) {
        dump_misclassified(&report.misclassified(best), samples, &dump)?;
    }
    Ok(())
}

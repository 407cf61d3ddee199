//! Experiment runner: feature extraction with an on-disk cache, tuning and
//! testing every descriptor × classifier cell, and report rendering.

mod cache;
mod config;
mod report;
mod run;

pub use cache::{cache_path, dataset_hash, decode_cache, encode_cache, read_cache, write_cache, CachedFeatures};
pub use config::{DatasetSource, ExperimentConfig};
pub use report::{
    confusion, dump_misclassified, render_confusion, render_deltas, AccuracyMatrix, CellOutcome, ExperimentReport, Misclassified,
    PyramidDelta, ReportCell, MISCLASSIFIED_INDEX,
};
pub use run::{extract_features, load_dataset, run_experiment, run_on, with_workers, write_report, DenseLabels, FeatureCache};

use std::fmt;
use std::str::FromStr;

use crate::descriptors::{variant_name, DescriptorKind};
use crate::error::{Error, Result};

/// A descriptor kind, either on the whole window or as the seven-region
/// pyramid (`X7`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DescriptorVariant {
    pub kind: DescriptorKind,
    pub pyramid: bool,
}

impl DescriptorVariant {
    pub fn new(kind: DescriptorKind, pyramid: bool) -> Self {
        Self { kind, pyramid }
    }
}

impl fmt::Display for DescriptorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&variant_name(self.kind, self.pyramid))
    }
}

impl FromStr for DescriptorVariant {
    type Err = Error;

    /// `SIFT`, `sift7`, `Gist7`, ...
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (base, pyramid) = match s.strip_suffix('7') {
            Some(b) => (b, true),
            None => (s, false),
        };
        let kind = base.parse().map_err(|_| Error::InvalidParameter(format!("unknown descriptor {s:?}")))?;
        Ok(Self { kind, pyramid })
    }
}

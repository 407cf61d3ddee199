use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use super::DescriptorVariant;
use crate::classifiers::{ClassifierKind, ParamGrid, TrainOptions};
use crate::descriptors::DescriptorKind;
use crate::error::{Error, Result};

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// `root/<class>/<writer>_<rep>.pgm`.
    Directory(PathBuf),
    Synthetic { seed: u64, per_class: usize },
}

/// Everything a run needs; read from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub descriptors: Vec<DescriptorVariant>,
    pub classifiers: Vec<ClassifierKind>,
    pub grid: ParamGrid,
    pub split_seed: u64,
    pub train: TrainOptions,
    pub output: PathBuf,
    pub cache: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let descriptors = [false, true]
            .into_iter()
            .flat_map(|pyramid| DescriptorKind::ALL.into_iter().map(move |kind| DescriptorVariant { kind, pyramid }))
            .collect();
        Self {
            dataset: DatasetSource::Synthetic { seed: 7, per_class: 50 },
            descriptors,
            classifiers: ClassifierKind::ALL.to_vec(),
            grid: ParamGrid::default(),
            split_seed: 0,
            train: TrainOptions::default(),
            output: PathBuf::from("results"),
            cache: None,
            workers: 0,
        }
    }
}

fn list<T>(value: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|v| !v.is_empty()).map(parse).collect()
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Parses config text. Relative paths are taken relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        let (mut synth_seed, mut per_class) = (7, 50);
        let mut directory = None;
        let resolve = |v: &str| if Path::new(v).is_absolute() { PathBuf::from(v) } else { base.join(v) };
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key}", no + 1)));
            }
            match key {
                "dataset" => directory = (value != "synthetic").then(|| resolve(value)),
                "synth_seed" => synth_seed = number(key, value)?,
                "synth_per_class" => per_class = number(key, value)?,
                "descriptors" => cfg.descriptors = list(value, str::parse)?,
                "classifiers" => cfg.classifiers = list(value, str::parse)?,
                "lambdas" => cfg.grid.lambdas = list(value, |v| number(key, v))?,
                "cs" => cfg.grid.cs = list(value, |v| number(key, v))?,
                "gammas" => cfg.grid.gammas = list(value, |v| number(key, v))?,
                "split_seed" => cfg.split_seed = number(key, value)?,
                "train_seed" => cfg.train.seed = number(key, value)?,
                "max_iter" => cfg.train.max_iter = number(key, value)?,
                "grad_tol" => cfg.train.grad_tol = number(key, value)?,
                "smo_tol" => cfg.train.smo_tol = number(key, value)?,
                "smo_max_updates" => cfg.train.smo_max_updates = number(key, value)?,
                "output" => cfg.output = resolve(value),
                "cache" => cfg.cache = (!value.is_empty()).then(|| resolve(value)),
                "workers" => cfg.workers = number(key, value)?,
                other => return Err(Error::Config(format!("line {}: unknown key {other}", no + 1))),
            }
        }
        cfg.dataset = match directory {
            Some(dir) => DatasetSource::Directory(dir),
            None => DatasetSource::Synthetic { seed: synth_seed, per_class },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.descriptors.is_empty() || self.classifiers.is_empty() {
            return Err(Error::Config("descriptor and classifier lists must be non-empty".into()));
        }
        if let DatasetSource::Synthetic { per_class, .. } = self.dataset {
            if per_class < 3 {
                return Err(Error::Config(format!("synth_per_class must be at least 3, got {per_class}")));
            }
        }
        for kind in &self.classifiers {
            self.grid.candidates(*kind).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

impl fmt::Display for ExperimentConfig {
    /// Config text that parses back to `self` (paths written as given).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.dataset {
            DatasetSource::Directory(d) => writeln!(f, "dataset = {}", d.display())?,
            DatasetSource::Synthetic { seed, per_class } => {
                writeln!(f, "dataset = synthetic")?;
                writeln!(f, "synth_seed = {seed}")?;
                writeln!(f, "synth_per_class = {per_class}")?;
            }
        }
        writeln!(f, "descriptors = {}", join(&self.descriptors))?;
        writeln!(f, "classifiers = {}", self.classifiers.iter().map(|c| c.key()).collect::<Vec<_>>().join(", "))?;
        writeln!(f, "lambdas = {}", join(&self.grid.lambdas))?;
        writeln!(f, "cs = {}", join(&self.grid.cs))?;
        writeln!(f, "gammas = {}", join(&self.grid.gammas))?;
        writeln!(f, "split_seed = {}", self.split_seed)?;
        writeln!(f, "train_seed = {}", self.train.seed)?;
        writeln!(f, "max_iter = {}", self.train.max_iter)?;
        writeln!(f, "grad_tol = {}", self.train.grad_tol)?;
        writeln!(f, "smo_tol = {}", self.train.smo_tol)?;
        writeln!(f, "smo_max_updates = {}", self.train.smo_max_updates)?;
        writeln!(f, "output = {}", self.output.display())?;
        if let Some(c) = &self.cache {
            writeln!(f, "cache = {}", c.display())?;
        }
        writeln!(f, "workers = {}", self.workers)
    }
}

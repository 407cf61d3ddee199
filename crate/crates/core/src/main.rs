use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use glyphrec::classifiers::{grid_search_prepared, refit_prepared, save_model, ClassifierKind, HyperParams, LabeledSet, Prepared};
use glyphrec::dataset::{split_indices, synth_glyphs, GlyphParams, SplitSpec};
use glyphrec::descriptors::{DescriptorConfig, Extractor};
use glyphrec::formproc::{crop_cells, deskew, qa_flags_with, GridSpec, QaThresholds};
use glyphrec::harness::{
    confusion, extract_features, load_dataset, read_cache, render_confusion, run_on, with_workers, write_cache, write_report,
    CachedFeatures, DatasetSource, DenseLabels, DescriptorVariant, ExperimentConfig,
};
use glyphrec::imagecore::{read_pgm, write_pgm};
use glyphrec::{Error, Result};

#[derive(Parser)]
#[command(name = "glyphrec", version, about = "Handwritten character descriptors and classifier benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one descriptor variant for a dataset and write a GDC1 matrix.
    Extract {
        #[command(flatten)]
        data: DataArgs,
        /// Variant name such as SIFT or HOG7.
        #[arg(long)]
        descriptor: DescriptorVariant,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid-search one classifier on the train/validation split of a matrix.
    Tune {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Train on train+validation with fixed parameters and score the test split.
    Evaluate {
        #[command(flatten)]
        model: ModelArgs,
        /// E.g. `lambda=0.1`, `C=10` or `C=10;gamma=0.01`.
        #[arg(long)]
        params: String,
        /// Also save the trained model here.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Run the full descriptor × classifier matrix and write reports.
    Run {
        /// `key = value` experiment file; defaults apply without one.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deskew a scanned form, cut it into cells and flag suspicious cells.
    PreprocessForm(FormArgs),
    /// Write a synthetic glyph set as `<label>/<writer>_<rep>.pgm`.
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        per_class: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Dataset root; a synthetic set is generated when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    synth_seed: u64,
    #[arg(long, default_value_t = 50)]
    synth_per_class: usize,
}

impl DataArgs {
    fn source(&self) -> DatasetSource {
        match &self.data {
            Some(dir) => DatasetSource::Directory(dir.clone()),
            None => DatasetSource::Synthetic { seed: self.synth_seed, per_class: self.synth_per_class },
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    /// GDC1 matrix written by `extract`.
    #[arg(long)]
    features: PathBuf,
    /// lr, ann, svm-linear or svm-rbf.
    #[arg(long)]
    classifier: ClassifierKind,
    /// Experiment file supplying grids, split seed and optimizer settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured split seed.
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args)]
struct FormArgs {
    /// Scanned page (PGM).
    input: PathBuf,
    /// Rows x columns, e.g. 7x4.
    #[arg(long, value_parser = parse_pair)]
    grid: (usize, usize),
    /// Canonical form size in pixels, width x height.
    #[arg(long, value_parser = parse_pair)]
    canonical: (usize, usize),
    /// Pixels trimmed from every side of each cell.
    #[arg(long, default_value_t = 4)]
    margin: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = QaThresholds::default().max_components)]
    max_components: usize,
    #[arg(long, default_value_t = QaThresholds::default().min_component_fraction)]
    min_component_fraction: f64,
    #[arg(long, default_value_t = QaThresholds::default().min_ink_fraction)]
    min_ink_fraction: f64,
    #[arg(long, default_value_t = QaThresholds::default().min_range)]
    min_range: f64,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected AxB, got {s:?}"))?;
    let num = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("expected AxB, got {s:?}"));
    Ok((num(a)?, num(b)?))
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    path.map_or_else(|| Ok(ExperimentConfig::default()), ExperimentConfig::from_file)
}

fn extract(data: &DataArgs, variant: DescriptorVariant, out: &Path) -> Result<()> {
    let (samples, warnings) = load_dataset(&data.source())?;
    warnings.iter().for_each(|w| eprintln!("warning: {w}"));
    let features = extract_features(&samples, variant, &Extractor::new(DescriptorConfig::default()), None)?;
    let (n, d) = features.dim();
    write_cache(out, &CachedFeatures { variant, features, labels: samples.iter().map(|s| s.label).collect() })?;
    println!("{variant}: {n} samples x {d} values -> {}", out.display());
    Ok(())
}

/// Train/validation/test sets of a feature file, with labels made dense.
fn load_split(args: &ModelArgs) -> Result<(ExperimentConfig, DenseLabels, [LabeledSet; 3])> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.split_seed {
        config.split_seed = seed;
    }
    let cached = read_cache(&args.features)?;
    let dense = DenseLabels::new(cached.labels.iter().copied());
    let y: Vec<usize> = cached.labels.iter().map(|&l| dense.dense(l).expect("label listed")).collect();
    let parts = split_indices(&y, &SplitSpec::with_seed(config.split_seed))?;
    let all = LabeledSet::new(cached.features, y, dense.k())?;
    let sets = [all.subset(&parts.train)?, all.subset(&parts.val)?, all.subset(&parts.test)?];
    Ok((config, dense, sets))
}

fn tune(args: &ModelArgs) -> Result<()> {
    let (config, _, [train, val, _]) = load_split(args)?;
    let result = grid_search_prepared(&Prepared::new(&train, &val)?, args.classifier, &config.grid, &config.train)?;
    for t in &result.trials {
        match &t.outcome {
            Ok(acc) => println!("{}\t{acc}", t.params),
            Err(e) => println!("{}\tfailed: {e}", t.params),
        }
    }
    println!("best {} validation {}", result.best, result.val_accuracy);
    Ok(())
}

fn evaluate(args: &ModelArgs, params: &str, model_out: Option<&Path>) -> Result<()> {
    let params = HyperParams::parse(args.classifier, params)?;
    let (config, dense, [train, val, test]) = load_split(args)?;
    let prepared = Prepared::new(&train.concat(&val)?, &test)?;
    let result = refit_prepared(&prepared, params, &config.train)?;
    println!("{} {params}: test {} ({} of {} wrong)", args.classifier.key(), result.accuracy, result.accuracy.errors(), result.accuracy.total);
    print!("{}", render_confusion(&confusion(&result.predictions, &prepared.eval_y, dense.k())?, &dense.classes));
    if let Some(path) = model_out {
        save_model(path, &result.classifier)?;
    }
    Ok(())
}

/// Returns the number of failed cells.
fn run(config: Option<&Path>, out: Option<PathBuf>) -> Result<usize> {
    let mut config = load_config(config)?;
    if let Some(out) = out {
        config.output = out;
    }
    let (samples, warnings) = load_dataset(&config.dataset)?;
    warnings.iter().for_each(|w| eprintln!("warning: {w}"));
    let report = with_workers(config.workers, || run_on(&config, &samples, &|msg| eprintln!("{msg}")))??;
    write_report(&report, &samples, &config.output)?;
    print!("{}", report.matrix().render_table());
    Ok(report.failed_cells())
}

fn preprocess_form(args: &FormArgs) -> Result<()> {
    let spec = GridSpec::new(args.grid.0, args.grid.1, args.canonical.0, args.canonical.1, args.margin)?;
    let thresholds = QaThresholds {
        max_components: args.max_components,
        min_component_fraction: args.min_component_fraction,
        min_ink_fraction: args.min_ink_fraction,
        min_range: args.min_range,
    };
    let form = deskew(&read_pgm(&args.input)?, &spec)?;
    let cells = crop_cells(&form, &spec)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io { path: args.out.clone(), source: e })?;
    let mut qa = String::from("cell,flags\n");
    for (i, cell) in cells.iter().enumerate() {
        let name = format!("r{}c{}", i / spec.cols, i % spec.cols);
        write_pgm(args.out.join(format!("{name}.pgm")), cell)?;
        let flags: Vec<&str> = qa_flags_with(cell, &thresholds).into_iter().map(|f| f.name()).collect();
        qa.push_str(&format!("{name},{}\n", flags.join(";")));
    }
    let path = args.out.join("qa.csv");
    std::fs::write(&path, qa).map_err(|e| Error::Io { path, source: e })?;
    println!("{} cells -> {}", cells.len(), args.out.display());
    Ok(())
}

fn synth(seed: u64, per_class: usize, out: &Path) -> Result<()> {
    let samples = synth_glyphs(per_class, seed, &GlyphParams::default());
    for s in &samples {
        let dir = out.join(s.label.to_string());
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
        write_pgm(dir.join(format!("{}_0.pgm", s.writer_id)), &s.image)?;
    }
    println!("{} samples -> {}", samples.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Extract { data, descriptor, out } => extract(&data, descriptor, &out).map(|_| 0),
        Command::Tune { model } => tune(&model).map(|_| 0),
        Command::Evaluate { model, params, model_out } => evaluate(&model, &params, model_out.as_deref()).map(|_| 0),
        Command::Run { config, out } => run(config.as_deref(), out),
        Command::PreprocessForm(args) => preprocess_form(&args).map(|_| 0),
        Command::Synth { seed, per_class, out } => synth(seed, per_class, &out).map(|_| 0),
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} cell(s) failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

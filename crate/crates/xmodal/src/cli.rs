//! Command-line front end. Every subcommand is a thin orchestration of
//! library calls; each run ends by writing `run_manifest.txt` with the
//! command line, the seed, and a sha256 per artifact so results are
//! re-derivable.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{reconstruct, to_gray_image, viz_embeddings, write_coords_csv, write_pgm};
#[cfg(feature = "kcca")]
use crate::baselines::{kcca_fit, Bandwidth};
use crate::baselines::{
    cca_fit, load_baseline, pls_fit, save_baseline, LinearBaselineModel,
};
use crate::data::{
    gen_synthetic, inject_anomalies, load_dataset, load_idx, load_pairs, save_dataset, save_pairs,
    split_train_test, tag_embed, Dataset, Nonlinearity, Truth,
};
use crate::detection::{
    confusion_and_metrics, default_epsilon_grid, default_gamma_grid, detect, sweep,
    write_metrics_csv, write_scores_csv, DetectionConfig, PairScorer, SweepCell,
};
use crate::iofmt;
use crate::numerics::RngStream;
use crate::objective::ContrastiveConfig;
use crate::training::{
    load_model, save_model, train_cmad, write_train_log, TrainConfig, TrainedModel,
};
use crate::{Error, Real, Result};

/// Parse `argv` and run the selected command. Returns the process exit
/// code: 0 on success, 1 on a usage error, 2 on a runtime error.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let command_line = argv
        .iter()
        .map(|s| s.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(err) => {
            // --help/--version arrive here as non-error displays.
            let code = i32::from(err.use_stderr());
            let _ = err.print();
            return code;
        }
    };
    match run(cli.command, &command_line) {
        Ok(()) => 0,
        Err(RunError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(RunError::Runtime(err)) => {
            eprintln!("error: {err}");
            2
        }
    }
}

#[derive(Debug)]
enum RunError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for RunError {
    fn from(err: Error) -> Self {
        RunError::Runtime(err)
    }
}

type RunResult<T> = std::result::Result<T, RunError>;

fn usage(flag: &str, detail: impl std::fmt::Display) -> RunError {
    RunError::Usage(format!("{flag}: {detail}"))
}

#[derive(Parser)]
#[command(
    name = "xmodal",
    version,
    about = "Cross-modal anomaly detection: train dual encoders, score pairs, sweep thresholds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-modality dataset with train/test splits
    Gen(GenArgs),
    /// Sample anomalous and consistent evaluation pairs from a dataset
    Inject(InjectArgs),
    /// Train the deep consensus embedding model
    Train(TrainCmdArgs),
    /// Score evaluation pairs with a saved model and flag anomalies
    Detect(DetectArgs),
    /// Retrain across a (gamma, epsilon) grid and tabulate metrics
    Sweep(SweepArgs),
    /// Fit a classical baseline in place of the deep model
    Baseline(BaselineArgs),
    /// Project embeddings to 2-D with PCA for plotting
    Viz(VizArgs),
    /// Average the images matching a query into a grayscale prototype
    Reconstruct(ReconstructArgs),
    /// Convert IDX image/label files into a dataset directory
    IdxImport(IdxImportArgs),
}

fn run(command: Command, command_line: &str) -> RunResult<()> {
    match command {
        Command::Gen(args) => run_gen(args, command_line),
        Command::Inject(args) => run_inject(args, command_line),
        Command::Train(args) => run_train(args, command_line),
        Command::Detect(args) => run_detect(args, command_line),
        Command::Sweep(args) => run_sweep(args, command_line),
        Command::Baseline(args) => run_baseline(args, command_line),
        Command::Viz(args) => run_viz(args, command_line),
        Command::Reconstruct(args) => run_reconstruct(args, command_line),
        Command::IdxImport(args) => run_idx_import(args, command_line),
    }
}

/// Reproducibility record written as the last artifact of every run.
struct RunManifest {
    command: String,
    seed: Option<u64>,
    artifacts: Vec<(String, String)>,
}

impl RunManifest {
    fn new(command_line: &str, seed: Option<u64>) -> Self {
        RunManifest {
            command: command_line.to_string(),
            seed,
            artifacts: Vec::new(),
        }
    }

    /// Hash an artifact under the output directory by its relative name.
    fn record(&mut self, out_dir: &Path, rel: &str) -> Result<()> {
        let bytes = iofmt::read_bytes(&out_dir.join(rel))?;
        self.artifacts.push((rel.to_string(), iofmt::sha256_hex(&bytes)));
        Ok(())
    }

    fn write(&self, out_dir: &Path) -> Result<()> {
        let mut text = format!("version=1\ncommand={}\n", self.command);
        match self.seed {
            Some(seed) => text.push_str(&format!("seed={seed}\n")),
            None => text.push_str("seed=none\n"),
        }
        for (name, hash) in &self.artifacts {
            text.push_str(&format!("artifact={name}:{hash}\n"));
        }
        iofmt::write_atomic(&out_dir.join("run_manifest.txt"), text.as_bytes())
    }
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|err| Error::io(path, err))
}

const DATASET_FILES: [&str; 5] = [
    "manifest.txt",
    "mod_a.csv",
    "mod_b.csv",
    "labels_a.csv",
    "labels_b.csv",
];

fn record_dataset(manifest: &mut RunManifest, out: &Path, prefix: &str) -> Result<()> {
    for file in DATASET_FILES {
        manifest.record(out, &format!("{prefix}{file}"))?;
    }
    Ok(())
}

/// Write full/train/test dataset directories plus the run manifest.
fn save_split_dataset(
    full: &Dataset<Real>,
    test_fraction: f64,
    rng: &mut RngStream,
    out: &Path,
    manifest: &mut RunManifest,
) -> RunResult<()> {
    let (train, test) = split_train_test(full, test_fraction, rng)?;
    ensure_dir(&out.join("train"))?;
    ensure_dir(&out.join("test"))?;
    save_dataset(full, out)?;
    save_dataset(&train, &out.join("train"))?;
    save_dataset(&test, &out.join("test"))?;
    record_dataset(manifest, out, "")?;
    record_dataset(manifest, out, "train/")?;
    record_dataset(manifest, out, "test/")?;
    manifest.write(out)?;
    println!(
        "wrote {} instances ({} train, {} test) to {}",
        full.len(),
        train.len(),
        test.len(),
        out.display()
    );
    Ok(())
}

fn check_fraction(value: f64, flag: &str) -> RunResult<()> {
    if !value.is_finite() || value <= 0.0 || value >= 1.0 {
        return Err(usage(flag, "must lie strictly between 0 and 1"));
    }
    Ok(())
}

#[derive(Args)]
struct GenArgs {
    /// Number of classes
    #[arg(long, default_value_t = 5)]
    classes: usize,
    /// Instances per class
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    /// Modality A feature dimension
    #[arg(long, default_value_t = 20)]
    da: usize,
    /// Modality B feature dimension
    #[arg(long, default_value_t = 20)]
    db: usize,
    /// Observation noise standard deviation
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Warp modality B through a tanh nonlinearity
    #[arg(long)]
    nonlinear: bool,
    /// Fraction of rows held out as the test split
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// RNG seed
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn run_gen(args: GenArgs, command_line: &str) -> RunResult<()> {
    if args.classes == 0 {
        return Err(usage("--classes", "must be at least 1"));
    }
    if args.per_class == 0 {
        return Err(usage("--per-class", "must be at least 1"));
    }
    if args.da == 0 || args.db == 0 {
        return Err(usage("--da/--db", "feature dimensions must be positive"));
    }
    if !args.noise.is_finite() || args.noise < 0.0 {
        return Err(usage("--noise", "must be a finite value >= 0"));
    }
    check_fraction(args.test_fraction, "--test-fraction")?;

    let mut rng = RngStream::new(args.seed);
    let nonlinearity = if args.nonlinear {
        Nonlinearity::TanhWarp
    } else {
        Nonlinearity::None
    };
    let full = gen_synthetic::<Real>(
        args.classes,
        args.per_class,
        args.da,
        args.db,
        args.noise,
        nonlinearity,
        &mut rng,
    )?;
    let mut manifest = RunManifest::new(command_line, Some(args.seed));
    save_split_dataset(&full, args.test_fraction, &mut rng, &args.out, &mut manifest)
}

#[derive(Args)]
struct InjectArgs {
    /// Dataset directory to draw evaluation pairs from
    #[arg(long)]
    data: PathBuf,
    /// Number of anomalous pairs (an equal number of consistent pairs is added)
    #[arg(long)]
    num_anomalies: usize,
    /// RNG seed
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn run_inject(args: InjectArgs, command_line: &str) -> RunResult<()> {
    let dataset = load_dataset::<Real>(&args.data)?;
    let mut rng = RngStream::new(args.seed);
    let pairs = inject_anomalies(&dataset, args.num_anomalies, &mut rng)?;
    ensure_dir(&args.out)?;
    save_pairs(&pairs, &args.out.join("pairs.csv"))?;
    let mut manifest = RunManifest::new(command_line, Some(args.seed));
    manifest.record(&args.out, "pairs.csv")?;
    manifest.write(&args.out)?;
    println!(
        "wrote {} pairs ({} anomalous) to {}",
        pairs.len(),
        args.num_anomalies,
        args.out.display()
    );
    Ok(())
}

/// Flags shared by `train` and `sweep`.
#[derive(Args)]
struct TrainFlags {
    /// Hinge margin gamma in [-1, 1]
    #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
    gamma: f64,
    /// Weight lambda on the negative-pair hinge term
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Training epochs
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    /// Positive pairs per optimization step
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    /// Adam learning rate
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Encoder A widths, dash-separated (e.g. 20-64-32), or preset "mnist-image";
    /// defaults to <input>-64-32
    #[arg(long)]
    arch_a: Option<String>,
    /// Encoder B widths, dash-separated, or preset "mnist-tag";
    /// defaults to <input>-64-32
    #[arg(long)]
    arch_b: Option<String>,
    /// Dropout rate on hidden layers during training
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    /// Negatives sampled per positive pair
    #[arg(long, default_value_t = 1.0)]
    neg_ratio: f64,
    /// Fraction of positives drawn as same-class cross-index pairs
    #[arg(long, default_value_t = 0.25)]
    cross_ratio: f64,
    /// RNG seed
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn parse_arch(text: &str, flag: &str) -> RunResult<Vec<usize>> {
    let dims = match text {
        "mnist-image" => vec![784, 1440, 1280, 320, 150, 50],
        "mnist-tag" => vec![100, 100, 50],
        _ => text
            .split('-')
            .map(|part| part.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| {
                usage(
                    flag,
                    format!("expected dash-separated widths or a preset, got {text:?}"),
                )
            })?,
    };
    if dims.len() < 2 || dims.contains(&0) {
        return Err(usage(flag, "need at least input and output widths, all positive"));
    }
    Ok(dims)
}

impl TrainFlags {
    /// Validate every flag that does not depend on the dataset.
    fn validate(&self) -> RunResult<()> {
        if !self.gamma.is_finite() || !(-1.0..=1.0).contains(&self.gamma) {
            return Err(usage("--gamma", "must lie in [-1, 1]"));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(usage("--lambda", "must be a finite value >= 0"));
        }
        if self.batch_size == 0 {
            return Err(usage("--batch-size", "must be at least 1"));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(usage("--lr", "must be a finite value > 0"));
        }
        if !self.dropout.is_finite() || !(0.0..1.0).contains(&self.dropout) {
            return Err(usage("--dropout", "must lie in [0, 1)"));
        }
        if !self.neg_ratio.is_finite() || self.neg_ratio <= 0.0 {
            return Err(usage("--neg-ratio", "must be a finite value > 0"));
        }
        if !self.cross_ratio.is_finite() || !(0.0..=1.0).contains(&self.cross_ratio) {
            return Err(usage("--cross-ratio", "must lie in [0, 1]"));
        }
        if let Some(text) = &self.arch_a {
            parse_arch(text, "--arch-a")?;
        }
        if let Some(text) = &self.arch_b {
            parse_arch(text, "--arch-b")?;
        }
        Ok(())
    }

    /// Resolve archs against the dataset dimensions and build the config.
    fn to_config(&self, d_a: usize, d_b: usize) -> RunResult<TrainConfig<Real>> {
        let arch_a = match &self.arch_a {
            Some(text) => parse_arch(text, "--arch-a")?,
            None => vec![d_a, 64, 32],
        };
        let arch_b = match &self.arch_b {
            Some(text) => parse_arch(text, "--arch-b")?,
            None => vec![d_b, 64, 32],
        };
        if arch_a.last() != arch_b.last() {
            return Err(usage(
                "--arch-a/--arch-b",
                "encoders must end in the same embedding width",
            ));
        }
        let mut cfg = TrainConfig::new(arch_a, arch_b, self.seed);
        cfg.epochs = self.epochs;
        cfg.batch_size = self.batch_size;
        cfg.neg_ratio = self.neg_ratio;
        cfg.cross_class_positive_ratio = self.cross_ratio;
        cfg.contrastive = ContrastiveConfig::new(self.gamma, self.lambda, 1e-3)?;
        cfg.adam.lr = self.lr;
        cfg.dropout_rate = self.dropout;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainCmdArgs {
    /// Training dataset directory
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    flags: TrainFlags,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn run_train(args: TrainCmdArgs, command_line: &str) -> RunResult<()> {
    args.flags.validate()?;
    let dataset = load_dataset::<Real>(&args.data)?;
    let cfg = args
        .flags
        .to_config(dataset.mod_a.cols(), dataset.mod_b.cols())?;
    let model = train_cmad(&dataset, &cfg)?;
    ensure_dir(&args.out)?;
    save_model(&model, &args.out.join("model.txt"))?;
    write_train_log(&model.log, &args.out.join("train_log.csv"))?;
    let mut manifest = RunManifest::new(command_line, Some(args.flags.seed));
    manifest.record(&args.out, "model.txt")?;
    manifest.record(&args.out, "train_log.csv")?;
    manifest.write(&args.out)?;
    if let Some(last) = model.log.last() {
        println!(
            "trained {} epochs; final mean loss {}",
            model.log.len(),
            last.mean_loss
        );
    } else {
        println!("trained 0 epochs; wrote initial parameters");
    }
    Ok(())
}

/// A saved model of any kind, scored through the common interface.
enum AnyModel {
    Trained(TrainedModel<Real>),
    Baseline(LinearBaselineModel<Real>),
}

impl AnyModel {
    /// Peek at the `kind` header to pick the loader.
    fn load(path: &Path) -> Result<Self> {
        let text = iofmt::read_to_string(path)?;
        let mut reader = iofmt::LineReader::new("model file", &text);
        reader.expect_kv("version")?;
        let kind = reader.expect_kv("kind")?.to_string();
        if kind == "baseline" {
            Ok(AnyModel::Baseline(load_baseline(path)?))
        } else {
            Ok(AnyModel::Trained(load_model(path)?))
        }
    }

    /// Margin the model was trained with; baselines have none.
    fn gamma(&self) -> Real {
        match self {
            AnyModel::Trained(model) => model.gamma,
            AnyModel::Baseline(_) => Real::NAN,
        }
    }
}

impl PairScorer<Real> for AnyModel {
    fn score(&self, x_a: &[Real], x_b: &[Real]) -> Result<Real> {
        match self {
            AnyModel::Trained(model) => model.score(x_a, x_b),
            AnyModel::Baseline(model) => PairScorer::score(model, x_a, x_b),
        }
    }
}

/// Accept either a model file or a directory containing `model.txt`.
fn model_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("model.txt")
    } else {
        path.to_path_buf()
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Model file or directory containing model.txt
    #[arg(long)]
    model: PathBuf,
    /// Dataset directory the evaluation pairs index into
    #[arg(long)]
    data: PathBuf,
    /// pairs.csv from `inject`
    #[arg(long)]
    pairs: PathBuf,
    /// Anomaly threshold: a pair is flagged when its score falls below this
    #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
    epsilon: f64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn run_detect(args: DetectArgs, command_line: &str) -> RunResult<()> {
    if !args.epsilon.is_finite() {
        return Err(usage("--epsilon", "must be finite"));
    }
    let model = AnyModel::load(&model_file(&args.model))?;
    let dataset = load_dataset::<Real>(&args.data)?;
    let pairs = load_pairs(&args.pairs)?;
    let cfg = DetectionConfig::new(args.epsilon)?;
    let detections = detect(&model, &dataset, &pairs, &cfg)?;

    let flags: Vec<bool> = detections.iter().map(|d| d.flagged).collect();
    let truths: Vec<Truth> = pairs.iter().map(|p| p.truth).collect();
    let metrics = confusion_and_metrics::<Real>(&flags, &truths)?;
    let flagged = flags.iter().filter(|&&f| f).count();

    ensure_dir(&args.out)?;
    write_scores_csv(&detections, &pairs, &args.out.join("scores.csv"))?;
    let cell = SweepCell {
        gamma: model.gamma(),
        epsilon: args.epsilon,
        flagged,
        metrics,
    };
    write_metrics_csv(&[cell], &args.out.join("metrics.csv"))?;
    let mut manifest = RunManifest::new(command_line, None);
    manifest.record(&args.out, "scores.csv")?;
    manifest.record(&args.out, "metrics.csv")?;
    manifest.write(&args.out)?;
    println!(
        "flagged {flagged} of {} pairs; precision {} recall {} accuracy {}",
        pairs.len(),
        iofmt::fmt_float(metrics.precision),
        iofmt::fmt_float(metrics.recall),
        iofmt::fmt_float(metrics.accuracy)
    );
    Ok(())
}

fn parse_grid(text: &str, flag: &str) -> RunResult<Vec<Real>> {
    let values = text
        .split(',')
        .map(|part| part.trim().parse::<Real>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| usage(flag, format!("expected comma-separated reals, got {text:?}")))?;
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(usage(flag, "need at least one finite value"));
    }
    Ok(values)
}

#[derive(Args)]
struct SweepArgs {
    /// Training dataset directory
    #[arg(long)]
    data: PathBuf,
    /// Dataset directory the evaluation pairs index into
    #[arg(long)]
    eval_data: PathBuf,
    /// pairs.csv from `inject`
    #[arg(long)]
    pairs: PathBuf,
    /// Comma-separated gamma grid; defaults to -0.4..0.5 in steps of 0.1
    #[arg(long, allow_hyphen_values = true)]
    gammas: Option<String>,
    /// Comma-separated epsilon grid; defaults to -0.2..0.7 in steps of 0.1
    #[arg(long, allow_hyphen_values = true)]
    epsilons: Option<String>,
    #[command(flatten)]
    flags: TrainFlags,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn run_sweep(args: SweepArgs, command_line: &str) -> RunResult<()> {
    args.flags.validate()?;
    let gammas = match &args.gammas {
        Some(text) => parse_grid(text, "--gammas")?,
        None => default_gamma_grid(),
    };
    if gammas.iter().any(|g| !(-1.0..=1.0).contains(g)) {
        return Err(usage("--gammas", "margins must lie in [-1, 1]"));
    }
    let epsilons = match &args.epsilons {
        Some(text) => parse_grid(text, "--epsilons")?,
        None => default_epsilon_grid(),
    };

    let train_data = load_dataset::<Real>(&args.data)?;
    let eval_data = load_dataset::<Real>(&args.eval_data)?;
    let pairs = load_pairs(&args.pairs)?;
    let cfg = args
        .flags
        .to_config(train_data.mod_a.cols(), train_data.mod_b.cols())?;
    let cells = sweep(&train_data, &eval_data, &pairs, &cfg, &gammas, &epsilons)?;

    ensure_dir(&args.out)?;
    write_metrics_csv(&cells, &args.out.join("metrics.csv"))?;
    let mut manifest = RunManifest::new(command_line, Some(args.flags.seed));
    manifest.record(&args.out, "metrics.csv")?;
    manifest.write(&args.out)?;
    println!(
        "swept {} gammas x {} epsilons = {} cells",
        gammas.len(),
        epsilons.len(),
        cells.len()
    );
    Ok(())
}

#[derive(ValueEnum, Clone, Copy)]
enum MethodArg {
    Cca,
    Pls,
    #[cfg(feature = "kcca")]
    Kcca,
}

#[derive(Args)]
struct BaselineArgs {
    /// Baseline family to fit
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Training dataset directory
    #[arg(long)]
    data: PathBuf,
    /// Number of projection directions; defaults to min(d_a, d_b, 10)
    #[arg(long)]
    r: Option<usize>,
    /// Covariance ridge (CCA) or dual regularizer scale (KCCA)
    #[arg(long, default_value_t = 1e-3)]
    ridge: f64,
    /// Fixed RBF bandwidth for KCCA; defaults to the median heuristic
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn run_baseline(args: BaselineArgs, command_line: &str) -> RunResult<()> {
    if !args.ridge.is_finite() || args.ridge < 0.0 {
        return Err(usage("--ridge", "must be a finite value >= 0"));
    }
    if let Some(r) = args.r {
        if r == 0 {
            return Err(usage("--r", "must be at least 1"));
        }
    }
    if let Some(b) = args.bandwidth {
        if !b.is_finite() || b <= 0.0 {
            return Err(usage("--bandwidth", "must be a finite value > 0"));
        }
    }
    let dataset = load_dataset::<Real>(&args.data)?;
    let r = args
        .r
        .unwrap_or_else(|| dataset.mod_a.cols().min(dataset.mod_b.cols()).min(10));
    let model = match args.method {
        MethodArg::Cca => cca_fit(&dataset.mod_a, &dataset.mod_b, r, args.ridge)?,
        MethodArg::Pls => pls_fit(&dataset.mod_a, &dataset.mod_b, r)?,
        #[cfg(feature = "kcca")]
        MethodArg::Kcca => {
            let bandwidth = match args.bandwidth {
                Some(b) => Bandwidth::Fixed(b),
                None => Bandwidth::Median,
            };
            kcca_fit(&dataset.mod_a, &dataset.mod_b, r, bandwidth, args.ridge)?
        }
    };
    ensure_dir(&args.out)?;
    save_baseline(&model, &args.out.join("model.txt"))?;
    let mut manifest = RunManifest::new(command_line, None);
    manifest.record(&args.out, "model.txt")?;
    manifest.write(&args.out)?;
    let corrs = model
        .correlations
        .iter()
        .map(|&c| iofmt::fmt_float(c))
        .collect::<Vec<_>>()
        .join(" ");
    println!("fitted {} with r={r}; correlations: {corrs}", model.method.tag());
    Ok(())
}

#[derive(ValueEnum, Clone, Copy)]
enum ModalityArg {
    A,
    B,
}

#[derive(Args)]
struct VizArgs {
    /// Trained model file or directory containing model.txt
    #[arg(long)]
    model: PathBuf,
    /// Dataset directory to embed
    #[arg(long)]
    data: PathBuf,
    /// Which modality's encoder and features to plot
    #[arg(long, value_enum, default_value_t = ModalityArg::A)]
    modality: ModalityArg,
    /// Comma-separated class ids to keep; defaults to all
    #[arg(long)]
    classes: Option<String>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn parse_classes(text: &str) -> RunResult<Vec<usize>> {
    let classes = text
        .split(',')
        .map(|part| part.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| usage("--classes", format!("expected comma-separated class ids, got {text:?}")))?;
    if classes.is_empty() {
        return Err(usage("--classes", "need at least one class id"));
    }
    Ok(classes)
}

fn run_viz(args: VizArgs, command_line: &str) -> RunResult<()> {
    let filter = args.classes.as_deref().map(parse_classes).transpose()?;
    let model = match AnyModel::load(&model_file(&args.model))? {
        AnyModel::Trained(model) => model,
        AnyModel::Baseline(_) => {
            return Err(RunError::Runtime(Error::Argument(
                "--model points at a baseline; viz needs a trained encoder model".into(),
            )))
        }
    };
    let dataset = load_dataset::<Real>(&args.data)?;
    let (encoder, features, labels) = match args.modality {
        ModalityArg::A => (&model.encoder_a, &dataset.mod_a, &dataset.labels_a),
        ModalityArg::B => (&model.encoder_b, &dataset.mod_b, &dataset.labels_b),
    };
    let points = viz_embeddings(encoder, features, labels, filter.as_deref())?;
    ensure_dir(&args.out)?;
    write_coords_csv(&points, &args.out.join("coords.csv"))?;
    let mut manifest = RunManifest::new(command_line, None);
    manifest.record(&args.out, "coords.csv")?;
    manifest.write(&args.out)?;
    println!("projected {} points to {}", points.len(), args.out.display());
    Ok(())
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("query").required(true).multiple(false))]
struct ReconstructArgs {
    /// Model file or directory containing model.txt
    #[arg(long)]
    model: PathBuf,
    /// Dataset directory providing images (modality A) and queries (modality B)
    #[arg(long)]
    data: PathBuf,
    /// Reconstruct from the tag of this class
    #[arg(long, group = "query")]
    class_id: Option<usize>,
    /// Reconstruct from modality B of this dataset row
    #[arg(long, group = "query")]
    query_index: Option<usize>,
    /// Include images scoring strictly above this threshold
    #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
    epsilon: f64,
    /// Image height; defaults to a square layout when d_a is a perfect square
    #[arg(long, requires = "img_cols")]
    img_rows: Option<usize>,
    /// Image width
    #[arg(long, requires = "img_rows")]
    img_cols: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

/// Default raster layout: square when possible, one row otherwise.
fn image_shape(d: usize) -> (usize, usize) {
    let side = (d as f64).sqrt().round() as usize;
    if side * side == d {
        (side, side)
    } else {
        (1, d)
    }
}

fn run_reconstruct(args: ReconstructArgs, command_line: &str) -> RunResult<()> {
    if !args.epsilon.is_finite() {
        return Err(usage("--epsilon", "must be finite"));
    }
    if let (Some(rows), Some(cols)) = (args.img_rows, args.img_cols) {
        if rows == 0 || cols == 0 {
            return Err(usage("--img-rows/--img-cols", "must be positive"));
        }
    }
    let model = AnyModel::load(&model_file(&args.model))?;
    let dataset = load_dataset::<Real>(&args.data)?;
    let query: Vec<Real> = match (args.class_id, args.query_index) {
        (Some(class), None) => {
            let row = dataset
                .labels_b
                .iter()
                .position(|&label| label == class)
                .ok_or_else(|| {
                    Error::EmptySelection(format!("no modality B instance of class {class}"))
                })?;
            dataset.mod_b.row(row).to_vec()
        }
        (None, Some(index)) => {
            if index >= dataset.len() {
                return Err(RunError::Runtime(Error::Argument(format!(
                    "--query-index {index} out of range for {} instances",
                    dataset.len()
                ))));
            }
            dataset.mod_b.row(index).to_vec()
        }
        _ => unreachable!("clap enforces exactly one query flag"),
    };
    let sum = reconstruct(&model, &dataset.mod_a, &query, args.epsilon)?;
    let (rows, cols) = match (args.img_rows, args.img_cols) {
        (Some(rows), Some(cols)) => (rows, cols),
        _ => image_shape(dataset.mod_a.cols()),
    };
    let image = to_gray_image(&sum, rows, cols)?;
    ensure_dir(&args.out)?;
    write_pgm(&image, &args.out.join("recon.pgm"))?;
    let mut manifest = RunManifest::new(command_line, None);
    manifest.record(&args.out, "recon.pgm")?;
    manifest.write(&args.out)?;
    println!("wrote {rows}x{cols} reconstruction to {}", args.out.display());
    Ok(())
}

#[derive(Args)]
struct IdxImportArgs {
    /// IDX image file (magic 0x00000803)
    #[arg(long)]
    images: PathBuf,
    /// IDX label file (magic 0x00000801)
    #[arg(long)]
    labels: PathBuf,
    /// Tag embedding dimension for the pseudo modality B
    #[arg(long, default_value_t = 100)]
    tag_dim: usize,
    /// Keep only the first N instances
    #[arg(long)]
    limit: Option<usize>,
    /// Fraction of rows held out as the test split
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// RNG seed (tag vectors and the split)
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn run_idx_import(args: IdxImportArgs, command_line: &str) -> RunResult<()> {
    if args.tag_dim == 0 {
        return Err(usage("--tag-dim", "must be at least 1"));
    }
    if args.limit == Some(0) {
        return Err(usage("--limit", "must be at least 1"));
    }
    check_fraction(args.test_fraction, "--test-fraction")?;

    let (images, mut labels) = load_idx::<Real>(&args.images, &args.labels)?;
    let images = match args.limit {
        Some(limit) if limit < images.rows() => {
            let keep: Vec<usize> = (0..limit).collect();
            labels.truncate(limit);
            images.select_rows(&keep)
        }
        _ => images,
    };
    let num_classes = labels.iter().max().copied().unwrap_or(0) + 1;
    let mut rng = RngStream::new(args.seed);
    let tags = tag_embed::<Real>(&labels, args.tag_dim, &mut rng)?;
    let full = Dataset::new(images, tags, labels.clone(), labels, num_classes)?;

    let mut manifest = RunManifest::new(command_line, Some(args.seed));
    save_split_dataset(&full, args.test_fraction, &mut rng, &args.out, &mut manifest)
}

//! `moc`: extract timelines, aggregate annotations, run baselines and score
//! predictions from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use moc_core::models::ModelKind;
use moc_core::Label;

#[derive(Debug, Parser)]
#[command(
    name = "moc",
    version,
    about = "Moments-of-change timelines: extraction, annotation, baselines, evaluation"
)]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "MOC_THREADS")]
    threads: Option<usize>,

    /// Reject unknown fields in input files.
    #[arg(long, global = true, env = "MOC_STRICT")]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted change points and labels.
    Synth(SynthArgs),
    /// Detect posting-rate change points and cut timelines around them.
    Extract(ExtractArgs),
    /// Derive majority-vote gold labels from annotations.
    Aggregate(AggregateArgs),
    /// Positive inter-annotator agreement per label.
    Iaa(IaaArgs),
    /// Score predicted labels against gold labels.
    Evaluate(EvaluateArgs),
    /// Produce cross-validated predictions with a baseline model.
    Baseline(BaselineArgs),
    /// Render a metrics report as a table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, env = "MOC_USERS", default_value_t = 500)]
    users: usize,
    #[arg(long, env = "MOC_DAYS", default_value_t = 60)]
    days: usize,
    /// First day (0-based) with the changed posting rate.
    #[arg(long, env = "MOC_CHANGE_DAY", default_value_t = 30)]
    change_day: usize,
    #[arg(long, env = "MOC_BASE_RATE", default_value_t = 1.0)]
    base_rate: f64,
    #[arg(long, env = "MOC_CHANGED_RATE", default_value_t = 8.0)]
    changed_rate: f64,
    /// Label-flip rate of each simulated annotator.
    #[arg(long, env = "MOC_NOISE", value_delimiter = ',', default_value = "0.05,0.08,0.12")]
    noise: Vec<f64>,
    #[arg(long, env = "MOC_SEED", default_value_t = 0)]
    seed: u64,
    /// Receives posts, timelines, gold, annotations, planted changes and an
    /// extraction summary.
    #[arg(long, env = "MOC_OUT_DIR")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long, env = "MOC_POSTS")]
    posts: PathBuf,
    /// Timelines output (JSON Lines).
    #[arg(long, env = "MOC_OUT")]
    out: PathBuf,
    /// Extraction summary output (JSON).
    #[arg(long, env = "MOC_SUMMARY")]
    summary: Option<PathBuf>,
    /// Detected change points output (JSON).
    #[arg(long, env = "MOC_CHANGEPOINTS")]
    changepoints: Option<PathBuf>,
    /// Gamma prior shape.
    #[arg(long, env = "MOC_ALPHA", default_value_t = 1.0)]
    alpha: f64,
    /// Gamma prior rate.
    #[arg(long, env = "MOC_BETA", default_value_t = 1.0)]
    beta: f64,
    #[arg(long, env = "MOC_HAZARD", default_value_t = 0.01)]
    hazard: f64,
    #[arg(long, env = "MOC_R_RESET", default_value_t = 2)]
    r_reset: usize,
    #[arg(long, env = "MOC_MASS_THRESHOLD", default_value_t = 0.5)]
    mass_threshold: f64,
    #[arg(long, env = "MOC_MIN_GAP_DAYS", default_value_t = 7)]
    min_gap_days: usize,
    #[arg(long, env = "MOC_WINDOW_DAYS", default_value_t = 7)]
    window_days: u32,
    #[arg(long, env = "MOC_MIN_POSTS", default_value_t = 10)]
    min_posts: usize,
    #[arg(long, env = "MOC_MAX_POSTS", default_value_t = 150)]
    max_posts: usize,
    /// Keep a random sample of this many timelines.
    #[arg(long, env = "MOC_SAMPLE")]
    sample: Option<usize>,
    /// When sampling, take at most one timeline per user.
    #[arg(long, env = "MOC_ONE_PER_USER")]
    one_per_user: bool,
    #[arg(long, env = "MOC_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct AggregateArgs {
    #[arg(long, env = "MOC_ANNOTATIONS")]
    annotations: PathBuf,
    #[arg(long, env = "MOC_TIMELINES")]
    timelines: PathBuf,
    #[arg(long, env = "MOC_POSTS")]
    posts: PathBuf,
    /// Gold labels output (JSON Lines).
    #[arg(long, env = "MOC_OUT")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IaaArgs {
    #[arg(long, env = "MOC_ANNOTATIONS")]
    annotations: PathBuf,
    /// Agreement table output (JSON); printed to stdout either way.
    #[arg(long, env = "MOC_OUT")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LengthLabel {
    #[value(name = "IS")]
    Is,
    #[value(name = "IE")]
    Ie,
    #[value(name = "O")]
    O,
}

impl From<LengthLabel> for Label {
    fn from(l: LengthLabel) -> Label {
        match l {
            LengthLabel::Is => Label::IS,
            LengthLabel::Ie => Label::IE,
            LengthLabel::O => Label::O,
        }
    }
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long, env = "MOC_GOLD")]
    gold: PathBuf,
    #[arg(long, env = "MOC_PRED")]
    pred: PathBuf,
    /// Window sizes of the windowed metrics.
    #[arg(long, env = "MOC_WINDOWS", value_delimiter = ',', default_value = "0,1,2,3")]
    windows: Vec<usize>,
    /// Labels scored by the windowed and coverage metrics.
    #[arg(long, env = "MOC_LABELS", value_delimiter = ',', default_value = "IS,IE,O", value_parser = parse_label)]
    labels: Vec<Label>,
    /// Report output (JSON); a table is printed to stdout either way.
    #[arg(long, env = "MOC_OUT")]
    out: Option<PathBuf>,
    /// Flat CSV copy of the report.
    #[arg(long, env = "MOC_CSV")]
    csv: Option<PathBuf>,
    /// Include windowed and coverage scores of every timeline.
    #[arg(long, env = "MOC_PER_TIMELINE")]
    per_timeline: bool,
    /// Label whose recall is broken down by gold region length.
    #[arg(long, env = "MOC_LENGTH_LABEL", value_enum, default_value = "IE")]
    length_label: LengthLabel,
    /// `exact`, or ascending lower bounds such as `1,2,4,8`.
    #[arg(long, env = "MOC_LENGTH_BUCKETS", default_value = "exact")]
    length_buckets: String,
}

fn parse_label(s: &str) -> Result<Label, String> {
    s.parse().map_err(|e: moc_core::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetaLoss {
    Ce,
    Focal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FsdModeArg {
    Centroid,
    Nearest,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[arg(
        long,
        env = "MOC_MODEL",
        value_parser = PossibleValuesParser::new(ModelKind::ALL.map(ModelKind::as_str))
            .map(|s| s.parse::<ModelKind>().expect("listed model name"))
    )]
    model: ModelKind,
    #[arg(long, env = "MOC_TIMELINES")]
    timelines: PathBuf,
    #[arg(long, env = "MOC_POSTS")]
    posts: PathBuf,
    /// Gold labels; required by every model except `majority`.
    #[arg(long, env = "MOC_GOLD")]
    gold: Option<PathBuf>,
    /// Predictions output (JSON Lines).
    #[arg(long, env = "MOC_OUT")]
    out: PathBuf,
    /// Neighbouring posts on each side fed to the classifier; defaults to 0
    /// for the tf-idf models and 2 for fsd and scd.
    #[arg(long, env = "MOC_CONTEXT_RADIUS")]
    context_radius: Option<usize>,
    #[arg(long, env = "MOC_FOLDS", default_value_t = 5)]
    folds: usize,
    #[arg(long, env = "MOC_SEED", default_value_t = 0)]
    seed: u64,
    /// Post vectors (JSON Lines) replacing tf-idf for fsd and scd.
    #[arg(long, env = "MOC_VECTORS")]
    vectors: Option<PathBuf>,
    #[arg(long, env = "MOC_EPOCHS", default_value_t = 20)]
    epochs: usize,
    #[arg(long, env = "MOC_BATCH_SIZE", default_value_t = 64)]
    batch_size: usize,
    #[arg(long, env = "MOC_LEARNING_RATE", default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, env = "MOC_L2", default_value_t = 1e-4)]
    l2: f64,
    /// Focal-loss focusing parameter.
    #[arg(long, env = "MOC_GAMMA", default_value_t = 2.0)]
    gamma: f64,
    /// Loss of the fsd and scd classifiers.
    #[arg(long, env = "MOC_LOSS", value_enum, default_value = "ce")]
    loss: MetaLoss,
    #[arg(long, env = "MOC_FSD_MODE", value_enum, default_value = "centroid")]
    fsd_mode: FsdModeArg,
    /// Vocabulary cap of the tf-idf classifiers.
    #[arg(long, env = "MOC_MAX_FEATURES")]
    max_features: Option<usize>,
    /// Vocabulary cap of the dense vectors used by scd.
    #[arg(long, env = "MOC_SCD_DIMS", default_value_t = 64)]
    scd_dims: usize,
    /// Posts of history used by the scd-fp forecaster.
    #[arg(long, env = "MOC_FORECAST_K", default_value_t = 3)]
    forecast_k: usize,
    #[arg(long, env = "MOC_RIDGE_LAMBDA", default_value_t = 1.0)]
    ridge_lambda: f64,
    /// Fold assignment output (JSON).
    #[arg(long, env = "MOC_FOLDS_OUT")]
    folds_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Report written by `evaluate --out`.
    #[arg(long, env = "MOC_INPUT")]
    input: PathBuf,
    /// Write the table here instead of stdout.
    #[arg(long, env = "MOC_OUT")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}

//! `qerank`: batch front end for ingestion, synthesis, training, prediction
//! and evaluation. Exit codes: 0 success, 1 usage error, 2 data error,
//! 3 internal error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qerank_core::config::SelectionMetric;
use qerank_core::eval::Task;
use qerank_core::nn::Activation;
use qerank_core::synth::SynthMode;
use qerank_core::{Criterion, Error};

use commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "qerank", version, about = "Referenceless quality estimation for NLG outputs")]
struct Cli {
    /// Root seed; every random stream of the run derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a ratings or rankings TSV into canonical JSONL.
    Ingest(IngestArgs),
    /// Split a dataset by MR (8:1:1 by default) or into cross-validation folds.
    Split(SplitArgs),
    /// Generate synthetic training instances by corrupting texts.
    Synth(SynthArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Predict ratings for every instance of a dataset.
    Predict(PredictArgs),
    /// Pairwise or n-way ranking with a trained model.
    Rank(RankArgs),
    /// Score a prediction file against gold data.
    Eval(EvalArgs),
    /// Significance test between two systems' predictions.
    Compare(CompareArgs),
    /// Train and evaluate over several seeds and average the metrics.
    Multiseed(MultiseedArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusFormat {
    /// Likert ratings TSV.
    Nem,
    /// Relative rankings TSV.
    E2e,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    Outputs,
    TrainRefs,
    TestRefs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompareTest {
    Williams,
    Bootstrap,
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<SynthMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long, value_enum)]
    pub format: CorpusFormat,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "quality", value_parser = parse_criterion)]
    pub criterion: Criterion,
    /// Replace slot values with placeholders before writing.
    #[arg(long)]
    pub delex: bool,
    /// Delexicalisation rule table (defaults to the built-in rules).
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "8:1:1")]
    pub ratio: String,
    /// Number of cross-validation folds instead of a single split.
    #[arg(long)]
    pub cv: Option<usize>,
    #[arg(long, default_value = "quality", value_parser = parse_criterion)]
    pub criterion: Criterion,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Training data; also the source of the corruption dictionary.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "both", value_parser = parse_mode)]
    pub mode: SynthMode,
    #[arg(long, value_enum, default_value = "outputs")]
    pub sources: SourceKind,
    /// Human references (`mr<TAB>text` with a header line).
    #[arg(long)]
    pub refs: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub max_errors: usize,
    #[arg(long, default_value_t = 5)]
    pub random_pairs: usize,
    /// Write the input instances followed by the synthetic ones.
    #[arg(long)]
    pub append: bool,
    #[arg(long, default_value = "quality", value_parser = parse_criterion)]
    pub criterion: Criterion,
}

#[derive(Args, Debug)]
pub struct ConfigArgs {
    /// `key = value` config file (default: $QE_CONFIG if set).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override any config key, e.g. `--set learning_rate=0.001`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub dropout_keep: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub dense_layers: Option<usize>,
    #[arg(long)]
    pub dense_activation: Option<Activation>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub synthetic_epochs: Option<usize>,
    #[arg(long)]
    pub selection_metric: Option<SelectionMetric>,
    #[arg(long)]
    pub clamp: Option<bool>,
    #[arg(long)]
    pub min_count: Option<usize>,
    #[arg(long)]
    pub delex: Option<bool>,
}

impl ConfigArgs {
    pub fn overrides(&self) -> Vec<(&'static str, String)> {
        fn s<T: ToString>(v: &Option<T>) -> Option<String> {
            v.as_ref().map(T::to_string)
        }
        [
            ("width", s(&self.width)),
            ("dropout_keep", s(&self.dropout_keep)),
            ("batch_size", s(&self.batch_size)),
            ("learning_rate", s(&self.learning_rate)),
            ("dense_layers", s(&self.dense_layers)),
            ("dense_activation", s(&self.dense_activation)),
            ("max_epochs", s(&self.max_epochs)),
            ("synthetic_epochs", s(&self.synthetic_epochs)),
            ("selection_metric", s(&self.selection_metric)),
            ("clamp", s(&self.clamp)),
            ("min_count", s(&self.min_count)),
            ("delex", s(&self.delex)),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Per-epoch log as TSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, default_value = "quality", value_parser = parse_criterion)]
    pub criterion: Criterion,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Prediction TSV (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "quality", value_parser = parse_criterion)]
    pub criterion: Criterion,
}

#[derive(Args, Debug)]
pub struct RankArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Pairwise dataset to decide in bulk.
    #[arg(long, conflicts_with_all = ["mr", "pair", "nbest"])]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub mr: Option<String>,
    /// Two texts; prints the decision and margin.
    #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with = "nbest")]
    pub pair: Vec<String>,
    /// Several texts; prints them best first.
    #[arg(long, num_args = 2..)]
    pub nbest: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "quality", value_parser = parse_criterion)]
    pub criterion: Criterion,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, value_parser = parse_task)]
    pub task: Task,
    /// JSON report path (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "quality", value_parser = parse_criterion)]
    pub criterion: Criterion,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long, value_enum)]
    pub test: CompareTest,
    #[arg(long)]
    pub pred_a: PathBuf,
    #[arg(long)]
    pub pred_b: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "quality", value_parser = parse_criterion)]
    pub criterion: Criterion,
}

#[derive(Args, Debug)]
pub struct MultiseedArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Explicit seeds; otherwise `--runs` seeds derived from `--seed`.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "quality", value_parser = parse_criterion)]
    pub criterion: Criterion,
}

fn dispatch(cli: &Cli) -> commands::CliResult {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Ingest(a) => commands::ingest(a, seed),
        Command::Split(a) => commands::split(a, seed),
        Command::Synth(a) => commands::synth(a, seed),
        Command::Train(a) => commands::train_cmd(a, cli.seed),
        Command::Predict(a) => commands::predict(a, seed),
        Command::Rank(a) => commands::rank(a, seed),
        Command::Eval(a) => commands::eval(a, seed),
        Command::Compare(a) => commands::compare(a, seed),
        Command::Multiseed(a) => commands::multiseed(a, cli.seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Core(e @ Error::Config(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 3 })
        }
    }
}

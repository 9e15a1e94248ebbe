//! `tvb-audit`: sensitivity of fairness audits to one-sided label noise.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "tvb-audit",
    version,
    about = "Fairness audits under target variable bias"
)]
pub struct Cli {
    /// Directory for report files; without it the report goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,

    /// Flat key=value file mirroring the long flags; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for grid evaluations.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Random seed; falls back to TVB_AUDIT_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bounds on fairness metrics of observed data.
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Per-group noise rate estimates from predicted probabilities.
    EstimateNoise(EstimateNoiseArgs),
    /// Synthetic experiments.
    #[command(subcommand)]
    Simulate(SimulateCommand),
}

#[derive(Debug, Subcommand)]
pub enum AuditCommand {
    /// FPR/FNR/PPV bounds over a grid of hidden-positive mass.
    Rates(RatesArgs),
    /// AUC bounds for given hidden-positive masses.
    Auc(AucArgs),
    /// Logistic calibration test envelope.
    CalibLogistic(CalibLogisticArgs),
    /// Chi-squared calibration test and budget searches.
    CalibChisq(CalibChisqArgs),
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Uniform-feature population with a feature-dependent catch probability.
    Example2(Example2Args),
    /// Random-flip retraining experiment measuring signed disparate impact.
    Smdi(Box<SmdiArgs>),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "score")]
    pub score_col: String,
    #[arg(long, default_value = "group")]
    pub group_col: String,
    #[arg(long, default_value = "y_obs")]
    pub label_col: String,
    /// Column holding the binary prediction.
    #[arg(long)]
    pub pred_col: Option<String>,
    /// Column holding precomputed score levels.
    #[arg(long)]
    pub level_col: Option<String>,
    /// Feature columns, comma separated; `col=value` makes an indicator.
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    /// Group assumed to carry hidden positives.
    #[arg(long)]
    pub noisy_group: Option<String>,
    /// Group assumed to be observed without noise.
    #[arg(long)]
    pub baseline_group: Option<String>,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Classify as positive when score > threshold (overrides --pred-col).
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 0.005)]
    pub alpha_step: f64,
    /// Hidden mass among predicted negatives, for a point evaluation.
    #[arg(long, requires = "alpha1")]
    pub alpha0: Option<f64>,
    /// Hidden mass among predicted positives, for a point evaluation.
    #[arg(long, requires = "alpha0")]
    pub alpha1: Option<f64>,
    /// Inverse noise rate for the label-dependent identities.
    #[arg(long, requires = "gamma")]
    pub rho: Option<f64>,
    /// Noise rate for the label-dependent identities.
    #[arg(long, requires = "rho")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AucArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.12])]
    pub alpha: Vec<f64>,
    /// Inverse noise rate for the label-dependent identity.
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CalibLogisticArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.16)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub alpha_step: f64,
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    /// Refits with uniformly placed hidden positives.
    #[arg(long, default_value_t = 0)]
    pub random_reps: usize,
    /// Hidden mass for the random refits.
    #[arg(long, default_value_t = 0.08)]
    pub random_alpha: f64,
    /// Noise rate of the noisy group for the corrected refit.
    #[arg(long)]
    pub gamma_noisy: Option<f64>,
    /// Noise rate of the baseline group for the corrected refit.
    #[arg(long)]
    pub gamma_baseline: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Break,
    Achieve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ContinuityArg {
    Yates,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PropRuleArg {
    HiddenShare,
    ObservedPositives,
}

#[derive(Debug, Args)]
pub struct CalibChisqArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = DirectionArg::Break)]
    pub direction: DirectionArg,
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    /// Proportionality bound on hidden positives per level.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum, default_value_t = PropRuleArg::HiddenShare)]
    pub prop_rule: PropRuleArg,
    /// Optimize at this fixed budget instead of searching for the minimal one.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Granularity of the minimal-budget search.
    #[arg(long, default_value_t = 10, conflicts_with = "budget")]
    pub budget_step: u64,
    /// Number of score levels.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, value_enum, default_value_t = ContinuityArg::Yates)]
    pub continuity: ContinuityArg,
    /// Confidence of the per-level rate intervals.
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Strong,
    Weak,
}

#[derive(Debug, Args)]
pub struct EstimateNoiseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Predicted probabilities; without it a per-group logistic model on
    /// --features (or the score) is fitted.
    #[arg(long)]
    pub prob_col: Option<String>,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Weak)]
    pub estimator: EstimatorArg,
    /// Quantile replacing the supremum in the weak estimator.
    #[arg(long, default_value_t = 0.99)]
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Inc,
    Dec,
    Constant,
}

#[derive(Debug, Args)]
pub struct Example2Args {
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = FamilyArg::Inc)]
    pub family: FamilyArg,
    /// Shape of the inc/dec family.
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    /// Noise rate of the constant family.
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
}

#[derive(Debug, Args)]
pub struct SmdiArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.02, 0.04, 0.06, 0.08, 0.1, 0.12])]
    pub alpha_grid: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Threshold floor; defaults to the threshold balancing false positives
    /// and false negatives on the observed labels.
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let args = match config::config_path(&raw) {
        Some(path) => match config::read_config(path.as_ref()) {
            Ok(pairs) => config::merge(raw, &pairs),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => raw,
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
        {
            eprintln!("error: cannot size thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli, &args[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

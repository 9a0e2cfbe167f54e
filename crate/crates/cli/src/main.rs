mod commands;
mod provenance;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairflip_core::{CriterionKind, CriterionSpec, Method};
use serde::Serialize;

/// Post-process binary classifiers under group-fairness constraints with bias scores.
#[derive(Debug, Parser)]
#[command(name = "fairflip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Sample the four-cell Gaussian mixture.
    Synth(SynthArgs),
    /// Fit the four-class softmax auxiliary model and write joint probabilities.
    TrainAux(TrainAuxArgs),
    /// Compute bias scores from a probability table.
    Score(ScoreArgs),
    /// Fit a modification rule on validation scores.
    Fit(FitArgs),
    /// Apply a rule and write the modified predictions.
    Apply(ApplyArgs),
    /// Evaluate a rule (or the base classifier) on labeled data.
    Eval(EvalArgs),
    /// Fit one rule per delta and report validation (and test) metrics.
    Frontier(FrontierArgs),
    /// Solve the flipping linear program exactly.
    Oracle(OracleArgs),
    /// Add Unif(-alpha, 2*alpha) noise to a probability table.
    Corrupt(CorruptArgs),
    /// Draw a score scatter or a frontier plot as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum CriterionArg {
    Dp,
    Eop,
    Eo,
}

impl From<CriterionArg> for CriterionKind {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Dp => CriterionKind::DemographicParity,
            CriterionArg::Eop => CriterionKind::EqualOpportunity,
            CriterionArg::Eo => CriterionKind::EqualizedOdds,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Threshold,
    Pairs,
    Directions,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Threshold => Method::Threshold,
            MethodArg::Pairs => Method::Pairs,
            MethodArg::Directions => Method::Directions,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum PriorSource {
    Train,
    Val,
}

#[derive(Debug, Clone, Args, Serialize)]
struct CriterionArgs {
    /// Fairness criterion.
    #[arg(long, value_enum)]
    criterion: CriterionArg,
    /// Sensitive attribute column.
    #[arg(long, default_value = "a")]
    attr: String,
    /// Label column.
    #[arg(long, default_value = "y")]
    label: String,
}

impl CriterionArgs {
    fn spec(&self) -> anyhow::Result<CriterionSpec> {
        Ok(CriterionSpec::from_kind(self.criterion.into(), &self.attr)?)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct SearchArgs {
    /// Defaults to `threshold` for one score and `directions` otherwise.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Subsample size for the pairs method.
    #[arg(long = "m", default_value_t = fairflip_core::search::DEFAULT_M)]
    m: usize,
    /// Number of directions for the directions method.
    #[arg(long, default_value_t = fairflip_core::search::DEFAULT_N_DIRS)]
    n_dirs: usize,
    /// Required when the search samples (pairs with M below the sample size, or
    /// directions with more than two scores).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    /// Total sample size; cell proportions follow the 500/100/100/500 counts.
    #[arg(long, default_value_t = 1200)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
struct TrainAuxArgs {
    /// Training file with features `x0, x1, ...`.
    #[arg(long)]
    train: PathBuf,
    /// Files to predict; defaults to the training file.
    #[arg(long = "predict")]
    predict: Vec<PathBuf>,
    /// One output table per predicted file.
    #[arg(long = "out", required = true)]
    out: Vec<PathBuf>,
    /// Where to save the fitted weights.
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long, default_value = "a")]
    attr: String,
    #[arg(long, default_value = "y")]
    label: String,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 5000)]
    iterations: usize,
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    #[arg(long)]
    seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
struct ScoreArgs {
    #[arg(long)]
    probs: PathBuf,
    #[command(flatten)]
    criterion: CriterionArgs,
    /// Training file for group priors.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Validation file for group priors.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Which file the priors come from; defaults to `train` when given.
    #[arg(long, value_enum)]
    prior_source: Option<PriorSource>,
    #[arg(long, default_value_t = fairflip_core::scores::DEFAULT_ETA_FLOOR)]
    eta_floor: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
struct FitArgs {
    #[arg(long)]
    scores: PathBuf,
    /// Labeled validation file.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    criterion: CriterionArgs,
    /// Constraint level in (0, 1], or `inf`.
    #[arg(long, value_parser = parse_delta)]
    delta: f64,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
struct ApplyArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    rule: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    criterion: CriterionArgs,
    /// Rule to apply; the base classifier is evaluated when omitted.
    #[arg(long)]
    rule: Option<PathBuf>,
    /// JSON report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
struct FrontierArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, requires = "test_data")]
    test_scores: Option<PathBuf>,
    #[arg(long, requires = "test_scores")]
    test_data: Option<PathBuf>,
    #[command(flatten)]
    criterion: CriterionArgs,
    /// Comma-separated constraint levels, each in (0, 1] or `inf`.
    #[arg(long, value_delimiter = ',', value_parser = parse_delta, required = true)]
    deltas: Vec<f64>,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: PathBuf,
    /// Also draw the frontier.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct OracleArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    criterion: CriterionArgs,
    #[arg(long, value_parser = parse_delta)]
    delta: f64,
    /// Per-instance κ and rounded flips.
    #[arg(long)]
    out: PathBuf,
    /// Also write the score rule read off the dual.
    #[arg(long)]
    rule_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct CorruptArgs {
    #[arg(long)]
    probs: PathBuf,
    #[command(flatten)]
    criterion: CriterionArgs,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
struct RenderArgs {
    #[command(subcommand)]
    plot: Plot,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Plot {
    /// Scatter of two-dimensional scores, colored by (y, a) cell when data is given.
    Scatter {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "a")]
        attr: String,
        #[arg(long)]
        rule: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy against criterion for a file written by `frontier`.
    Frontier {
        #[arg(long)]
        frontier: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_delta(s: &str) -> Result<f64, String> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("delta must be in (0, 1] or `inf`, got {s}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match commands::run(&cli.command, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

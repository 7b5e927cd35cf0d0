use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "franson",
    version,
    about = "Simulate and analyse Franson-type Bell experiments"
)]
pub struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the target joint table and chained Bell predictions.
    Predict(PredictArgs),
    /// Refine a seed layout into a region model pair.
    Synth(SynthArgs),
    /// Check a region model pair against the target table.
    Validate(ValidateArgs),
    /// Run the event-level simulation and write CSV logs.
    Simulate(SimulateArgs),
    /// Pair, select and evaluate a simulated data set.
    Analyze(AnalyzeArgs),
    /// Run a canned end-to-end configuration.
    Demo(DemoArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Settings per side of the chained expression.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Print the joint table at this phase sum (radians).
    #[arg(long, allow_negative_numbers = true)]
    pub chi: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub visibility: f64,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Seed layout: a file path or a built-in name.
    #[arg(long, default_value = "seeds/default")]
    pub seed: String,
    #[arg(long, default_value_t = 5e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Maximum number of residual evaluations.
    #[arg(long, default_value_t = 20_000)]
    pub budget: usize,
    /// Seed of the random restarts.
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Free parameters: left-curves, curves or all.
    #[arg(long, default_value = "left-curves")]
    pub free: String,
    #[arg(long, default_value = "synth_out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Model pair: a file path or a built-in name.
    #[arg(long, default_value = "reference")]
    pub model: String,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[arg(long, default_value_t = 5e-3)]
    pub tol: f64,
    /// Directory for the report and manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ExperimentArgs {
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, as KEY=VALUE.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Number of emitted pairs; accepts exponent form such as 2e7.
    #[arg(long)]
    pub pairs: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub engine: Option<String>,
    #[arg(long)]
    pub switching: Option<String>,
    /// Use the canonical chained angles for N settings per side.
    #[arg(long)]
    pub n: Option<usize>,
    /// Add reference settings phi0 = psi0 = 0 to both switches.
    #[arg(long)]
    pub reference: bool,
    #[arg(long)]
    pub visibility: Option<f64>,
    /// Log emission tags and hidden variables.
    #[arg(long)]
    pub whitebox: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[arg(long, default_value = "sim_out")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EnsembleArg {
    /// Bound 2N - 1 for all coincidences.
    Coincident,
    /// Ordinary bound 2N - 2.
    LateLate,
}

#[derive(Args, Debug, Clone)]
pub struct SelectionArgs {
    /// Keep non-coincident pairs too.
    #[arg(long)]
    pub all_classes: bool,
    /// Keep only pairs whose early settings are the reference settings.
    #[arg(long)]
    pub early_filter: bool,
    #[arg(long, value_enum, default_value_t = EnsembleArg::Coincident)]
    pub ensemble: EnsembleArg,
    /// Settings per side in the chained expression; all by default.
    #[arg(long)]
    pub chain: Option<usize>,
    /// Pairing window in ticks; 2K by default.
    #[arg(long)]
    pub window: Option<u64>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Directory written by `simulate`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "analysis_out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub selection: SelectionArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DemoKind {
    /// Slow switching: a local model reaches the quantum CHSH value.
    Loophole,
    /// Fast switching with reference filtering: the chained test.
    Nogo,
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    #[arg(value_enum)]
    pub kind: DemoKind,
    /// Emitted pairs per engine; accepts exponent form.
    #[arg(long)]
    pub pairs: Option<String>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Settings per side for the chained test.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Region model used by the local engine.
    #[arg(long, default_value = "reference")]
    pub model: String,
    /// Directory for reports and the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded location.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "nsunlearn", version, about = "Training-free nullspace-projection unlearning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic multi-domain suite.
    Gen(GenArgs),
    /// Build forget matrices and projectors, then write a projection bank.
    Unlearn(UnlearnArgs),
    /// Before/after accuracy report for a bank.
    Eval(EvalArgs),
    /// Membership-inference gap from four accuracies or from a report.
    Mia(MiaArgs),
    /// Finite-difference audit of encoder and synthesis gradients.
    Gradcheck(GradcheckArgs),
    /// Merge eval reports into one table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Storage {
    F32,
    F64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub domains: usize,
    #[arg(long, default_value_t = 7)]
    pub classes: usize,
    /// Samples per (class, domain) cell.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    /// The first N classes form the forget set.
    #[arg(long, default_value_t = 3)]
    pub forget_count: usize,
    #[arg(long, default_value_t = 0.3)]
    pub max_prototype_cosine: f64,
    #[arg(long, default_value_t = 0.4)]
    pub domain_offset: f64,
    #[arg(long, default_value_t = 0.05)]
    pub sample_noise: f64,
    #[arg(long, default_value_t = 128)]
    pub input_dim: usize,
    #[arg(long, default_value_t = 64)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 32)]
    pub embedding_dim: usize,
    /// Precision of stored features.
    #[arg(long, value_enum, default_value_t = Storage::F32)]
    pub storage: Storage,
    /// Output directory; receives manifest.json, data.bin and projection.bin.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Global,
    Selective,
    Complete,
    TextOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GlobalTargetArg {
    Neutral,
    DomainMean,
}

#[derive(Debug, Args)]
pub struct UnlearnArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Defaults to projection.bin next to the manifest.
    #[arg(long)]
    pub projection: Option<PathBuf>,
    /// Defaults to the manifest's mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Comma-separated targeted domains for selective/complete modes.
    #[arg(long, value_delimiter = ',')]
    pub domains: Option<Vec<String>>,
    /// Comma-separated forget classes; defaults to the manifest's.
    #[arg(long, value_delimiter = ',', conflicts_with = "all_classes")]
    pub forget: Option<Vec<String>>,
    /// Forget every class (full-domain erasure with --mode complete).
    #[arg(long)]
    pub all_classes: bool,
    #[arg(long, default_value_t = nullspace_unlearn::DEFAULT_RANK_TOL)]
    pub rel_tol: f64,
    /// One projector over all targeted domains instead of one per domain.
    #[arg(long)]
    pub pooled: bool,
    #[arg(long, value_enum, default_value_t = GlobalTargetArg::Neutral)]
    pub global_target: GlobalTargetArg,
    /// Overrides the manifest's synthesis seed.
    #[arg(long)]
    pub synthesis_seed: Option<u64>,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0.1)]
    pub initial_step: f64,
    #[arg(long, default_value_t = 0.5)]
    pub backtrack: f64,
    #[arg(long, default_value_t = 2.0)]
    pub growth: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub min_step: f64,
    #[arg(long, default_value_t = 0.999)]
    pub target_cosine: f64,
    /// Bank output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Defaults to data.bin next to the manifest.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Bank directory; without it, the manifest's projection is evaluated untouched.
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// Report path (JSON); a CSV is written alongside. Prints JSON when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MiaArgs {
    #[arg(long, requires_all = ["af_forget", "bf_retain", "af_retain"], conflicts_with = "report")]
    pub bf_forget: Option<f64>,
    #[arg(long)]
    pub af_forget: Option<f64>,
    #[arg(long)]
    pub bf_retain: Option<f64>,
    #[arg(long)]
    pub af_retain: Option<f64>,
    /// Eval report to read accuracies from.
    #[arg(long, required_unless_present = "bf_forget")]
    pub report: Option<PathBuf>,
    /// Restrict report output to one domain.
    #[arg(long, requires = "report")]
    pub domain: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Linear,
    Tanh,
    Both,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value_t = VariantArg::Both)]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 50)]
    pub probes: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 128)]
    pub input_dim: usize,
    #[arg(long, default_value_t = 64)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 32)]
    pub embedding_dim: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Eval report JSON files, in table order.
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    /// CSV output; prints to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

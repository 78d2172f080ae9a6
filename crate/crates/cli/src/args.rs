use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "span",
    version,
    about = "Spectral edge-perturbation augmentation toolkit"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Master seed; every random stream derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving outputs and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Tabular output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or normalise a graph.
    Gen(GenArgs),
    /// Optimise a flip-probability scheme for a graph.
    Scheme(SchemeArgs),
    /// Draw augmented views from a scheme.
    Sample(SampleArgs),
    /// Spectra, spectral distances and spectral properties.
    Spectrum(SpectrumArgs),
    /// Inter/intra-cluster structure of an opposite-direction scheme.
    Casestudy(CasestudyArgs),
    /// Spectral change of uniform vs cluster-aware edge dropping.
    Preanalysis(PreanalysisArgs),
    /// Train a contrastive encoder on two-branch views.
    Train(TrainArgs),
    /// Score frozen representations with a linear probe.
    Probe(ProbeArgs),
    /// Run the numerical oracles.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Sbm,
    Geometric,
    Edgelist,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: GenKind,
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    /// Number of SBM blocks.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 0.5)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.05)]
    pub p_out: f64,
    #[arg(long, default_value_t = 0.3)]
    pub radius: f64,
    /// Edge list to normalise (`edgelist` kind).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Node count for `edgelist` when isolated trailing nodes exist.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Also write one-hot degree features.
    #[arg(long)]
    pub features: bool,
    /// Base name of the output files.
    #[arg(long, default_value = "graph")]
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Single,
    Double,
    Opposite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Jitter,
    Uniform,
}

#[derive(Debug, Args, Clone)]
pub struct SchemeOpts {
    #[arg(long, value_enum, default_value_t = ModeArg::Opposite)]
    pub mode: ModeArg,
    /// Budget as a fraction of the edge count; ε = σ_e·2m.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon_ratio: f64,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lr: f64,
    /// Keep only the K lowest and K highest eigenvalues.
    #[arg(long = "K", alias = "spectral-k")]
    pub spectral_k: Option<usize>,
    /// Magnitude of the symmetry-breaking noise.
    #[arg(long, default_value_t = 1e-6)]
    pub noise: f64,
    #[arg(long)]
    pub removal_only: bool,
    #[arg(long, value_enum, default_value_t = InitArg::Jitter)]
    pub init: InitArg,
}

#[derive(Debug, Args)]
pub struct SchemeArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[command(flatten)]
    pub opts: SchemeOpts,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub scheme: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub branch: u8,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(required = true)]
    pub graphs: Vec<PathBuf>,
    /// Pairwise spectral distances.
    #[arg(long)]
    pub compare: bool,
    /// Connectivity, component count, cluster eigengap and diameter bounds.
    #[arg(long)]
    pub properties: bool,
}

#[derive(Debug, Args)]
pub struct CasestudyArgs {
    #[arg(long, value_enum, default_value_t = CaseGraph::Sbm)]
    pub graph_kind: CaseGraph,
    #[arg(long, default_value_t = 40)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 0.8)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.1)]
    pub p_out: f64,
    #[arg(long, default_value_t = 0.3)]
    pub radius: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon_ratio: f64,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CaseGraph {
    Sbm,
    Geometric,
}

#[derive(Debug, Args)]
pub struct PreanalysisArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Cluster labels; spectral clustering is used when absent.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
    pub sigmas: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvArg {
    Gcn,
    Gin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoolArg {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptArg {
    Gd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NegArg {
    Same,
    Opposite,
    Corrupted,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub graph: Vec<PathBuf>,
    /// One scheme JSON per graph.
    #[arg(long, num_args = 1.., conflicts_with = "uniform")]
    pub scheme: Vec<PathBuf>,
    /// Train with uniform edge dropping at this ratio instead of a scheme.
    #[arg(long)]
    pub uniform: Option<f64>,
    /// Feature CSVs, one per graph; one-hot degree features when absent.
    #[arg(long, num_args = 1..)]
    pub features: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = ConvArg::Gcn)]
    pub conv: ConvArg,
    #[arg(long, default_value_t = 0.0)]
    pub gin_epsilon: f64,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.2)]
    pub mask_ratio: f64,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, value_enum, default_value_t = PoolArg::Mean)]
    pub pool: PoolArg,
    #[arg(long, value_enum, default_value_t = OptArg::Gd)]
    pub opt: OptArg,
    #[arg(long, value_enum, default_value_t = NegArg::Corrupted)]
    pub negatives: NegArg,
    /// Draw negatives from every graph in the batch.
    #[arg(long)]
    pub batch_negatives: bool,
    #[arg(long, default_value_t = 1)]
    pub batch_size: usize,
    /// Continue from a checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Trained checkpoint; without it the raw features are probed.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Probe a freshly initialised encoder with the checkpoint's configuration.
    #[arg(long, requires = "checkpoint")]
    pub untrained: bool,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Class labels (logistic probe).
    #[arg(long, required_unless_present = "targets")]
    pub labels: Option<PathBuf>,
    /// Real targets (ridge probe).
    #[arg(long, conflicts_with = "labels")]
    pub targets: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0])]
    pub l2: Vec<f64>,
    /// Also write the probed representations as CSV.
    #[arg(long)]
    pub export_reps: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Grad,
    Proj,
    Eigchange,
    Gcl,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    pub suite: SuiteArg,
    /// Random instances per gradient check.
    #[arg(long, default_value_t = 20)]
    pub grad_instances: usize,
    #[arg(long, default_value_t = 20)]
    pub proj_instances: usize,
    #[arg(long, default_value_t = 200)]
    pub eigchange_instances: usize,
    #[arg(long, default_value_t = 8)]
    pub gcl_instances: usize,
    /// Flip the sign of the analytic gradient (mutation fixture).
    #[arg(long, hide = true)]
    pub inject_sign_error: bool,
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stratify::bart::TreeEnsembleConfig;
use stratify::pipeline::PipelineSettings;
use stratify::profile::ChainConfig;

const PRIOR_DEFAULTS: &str = "\
Stage-2 prior defaults (derived from the data at run time):
  covariate / outcome mean      empirical column means
  covariate / outcome kappa_0   0.01
  NIW degrees of freedom        dimension + 2
  NIW scale matrix              diagonal of empirical variances
  Dirichlet concentration       1 per category
  concentration alpha           Gamma(shape 2, rate 1)
  selection prior on rho        0.5 point mass at 0 + 0.5 Beta(0.5, 0.5)

Stage-1 prior defaults are listed with their flags above.
Exit status: 0 success, 1 configuration error, 2 data error, 3 numerical failure.";

#[derive(Debug, Parser)]
#[command(name = "stratify", version, about = "Two-stage Bayesian patient stratification", after_help = PRIOR_DEFAULTS)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug); RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario dataset, or run a replicated experiment with --fit.
    Simulate(SimulateArgs),
    /// Stage 1 only: impute potential outcomes for every arm.
    FitStage1(Stage1Args),
    /// Stage 2 only: run the profile-regression sampler on imputed outcomes.
    Cluster(ClusterArgs),
    /// Pick the representative clustering and summarise cluster profiles.
    Postprocess(PostprocessArgs),
    /// Compare a predicted partition with the truth.
    Evaluate(EvaluateArgs),
    /// Print a summary of a finished run directory.
    Report(ReportArgs),
    /// Both stages and post-processing, writing every artifact and a manifest.
    #[command(after_help = PRIOR_DEFAULTS)]
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Stage 1: 6000 iterations / 1000 burn-in; stage 2: 2000 / 1000.
    Sim,
    /// Stage 1: 6000 / 1000; stage 2: 40000 / 10000.
    Application,
}

impl Preset {
    pub fn stage2_counts(self) -> (usize, usize) {
        match self {
            Preset::Sim => (2000, 1000),
            Preset::Application => (40000, 10000),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Subject-level CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// TOML schema naming the treatment, outcome and covariate columns.
    #[arg(long)]
    pub schema: PathBuf,
}

/// Stage-1 settings.
#[derive(Debug, Clone, Args)]
pub struct Stage1Flags {
    /// Outcome learner.
    #[arg(long, default_value = "bart")]
    pub learner: String,
    /// Number of trees.
    #[arg(long, default_value_t = 200)]
    pub trees: usize,
    /// Stage-1 iterations [default: 6000 in both presets].
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Stage-1 burn-in [default: 1000 in both presets].
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Tree depth prior base: P(split at depth d) = base (1 + d)^-power.
    #[arg(long, default_value_t = 0.95)]
    pub base: f64,
    /// Tree depth prior power.
    #[arg(long, default_value_t = 2.0)]
    pub power: f64,
    /// Leaf prior shrinkage k.
    #[arg(long, default_value_t = 2.0)]
    pub leaf_k: f64,
    /// Residual variance prior degrees of freedom.
    #[arg(long, default_value_t = 3.0)]
    pub sigma_df: f64,
    /// Prior probability that sigma is below the least-squares estimate.
    #[arg(long, default_value_t = 0.90)]
    pub sigma_quantile: f64,
    /// Minimum subjects per leaf.
    #[arg(long, default_value_t = 5)]
    pub min_leaf: usize,
    /// Candidate cutpoints per continuous covariate.
    #[arg(long, default_value_t = 100)]
    pub numcut: usize,
}

/// Stage-2 settings.
#[derive(Debug, Clone, Args)]
pub struct Stage2Flags {
    /// Stage-2 iterations [default: 2000 (sim), 40000 (application)].
    #[arg(long)]
    pub cluster_iterations: Option<usize>,
    /// Stage-2 burn-in [default: 1000 (sim), 10000 (application)].
    #[arg(long)]
    pub cluster_burnin: Option<usize>,
    /// Clusters in the initial random allocation.
    #[arg(long, default_value_t = 10)]
    pub initial_clusters: usize,
    /// Sample per-cluster covariate selection switches.
    #[arg(long)]
    pub variable_selection: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FitFlags {
    /// Iteration preset.
    #[arg(long, value_enum, default_value_t = Preset::Sim)]
    pub preset: Preset,
    /// Root seed; every random stream derives from it.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Centre and scale continuous covariates before both stages.
    #[arg(long)]
    pub standardize: bool,
    /// Largest cluster count examined [default: min(10, n/10), at least 2].
    #[arg(long)]
    pub k_max: Option<usize>,
    #[command(flatten)]
    pub stage1: Stage1Flags,
    #[command(flatten)]
    pub stage2: Stage2Flags,
}

impl FitFlags {
    pub fn settings(&self) -> PipelineSettings {
        let s1 = &self.stage1;
        let s2 = &self.stage2;
        let stage1_default = TreeEnsembleConfig::default();
        let (it2, burn2) = self.preset.stage2_counts();
        PipelineSettings {
            learner: s1.learner.clone(),
            stage1: TreeEnsembleConfig {
                trees: s1.trees,
                base: s1.base,
                power: s1.power,
                leaf_k: s1.leaf_k,
                sigma_df: s1.sigma_df,
                sigma_quantile: s1.sigma_quantile,
                iterations: s1.iterations.unwrap_or(stage1_default.iterations),
                burn_in: s1.burnin.unwrap_or(stage1_default.burn_in),
                min_leaf: s1.min_leaf,
                numcut: s1.numcut,
                ..stage1_default
            },
            stage2: ChainConfig {
                iterations: s2.cluster_iterations.unwrap_or(it2),
                burn_in: s2.cluster_burnin.unwrap_or(burn2),
                initial_clusters: s2.initial_clusters,
                variable_selection: s2.variable_selection,
                ..ChainConfig::default()
            },
            k_max: self.k_max,
            standardize: self.standardize,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario: 1 (three continuous-covariate clusters) or 2 (four mixed-covariate clusters).
    #[arg(long, default_value_t = 1)]
    pub scenario: u8,
    /// Subjects per dataset (multiple of 3 for scenario 1, of 9 for scenario 2).
    #[arg(long, default_value_t = 450)]
    pub n: usize,
    /// Outcome noise standard deviation.
    #[arg(long, default_value_t = 0.5)]
    pub sigma_y: f64,
    /// Covariate noise standard deviation.
    #[arg(long, default_value_t = 0.5)]
    pub sigma_x: f64,
    /// Within-cluster correlation of X1 and X2 (scenario 1).
    #[arg(long, default_value_t = 0.0)]
    pub rho_x: f64,
    /// Appended covariates unrelated to the clusters (scenario 2).
    #[arg(long, default_value_t = 0)]
    pub noise_covariates: usize,
    /// Number of replicate datasets.
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    /// Fit every replicate and write replicates.csv and aggregate.json.
    #[arg(long)]
    pub fit: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub fit_flags: FitFlags,
}

#[derive(Debug, Args)]
pub struct Stage1Args {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub fit_flags: FitFlags,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Potential-outcome CSV written by fit-stage1.
    #[arg(long)]
    pub potential: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write the similarity matrix as CSV.
    #[arg(long)]
    pub similarity_csv: bool,
    #[command(flatten)]
    pub fit_flags: FitFlags,
}

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    /// Binary similarity matrix written by cluster.
    #[arg(long)]
    pub similarity: PathBuf,
    /// JSON Lines trace written by cluster.
    #[arg(long)]
    pub trace: PathBuf,
    /// Largest cluster count examined [default: min(10, n/10), at least 2].
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted labels CSV (id, label).
    #[arg(long)]
    pub pred: PathBuf,
    /// True labels CSV (id, label).
    #[arg(long)]
    pub truth: PathBuf,
    /// Write the metrics JSON here as well as to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by pipeline or postprocess.
    #[arg(long)]
    pub run_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, required_unless_present = "manifest")]
    pub data: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub schema: Option<PathBuf>,
    /// True labels CSV (id, label); when given, metrics.json is written.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Rerun exactly the run described by this manifest; other fit flags are ignored.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write the similarity matrix as CSV.
    #[arg(long)]
    pub similarity_csv: bool,
    #[command(flatten)]
    pub fit_flags: FitFlags,
}

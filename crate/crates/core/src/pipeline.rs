//! End-to-end two-stage fit with a pluggable outcome learner.

use serde::{Deserialize, Serialize};

use crate::bart::{fit_sum_of_trees, impute_potential_outcomes, PotentialOutcomeMatrix, TreeEnsembleConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::postprocess::{
    default_k_max, parameter_names, select_representative, summarize_profiles, ClusterProfileSummary,
    RepresentativeClustering, SimilarityMatrix,
};
use crate::profile::{run_chain, ChainConfig, ChainOutput, PriorSpec, ProfileData, TraceRecord};
use crate::rng::{derive, STAGE1, STAGE2};

/// A stage-1 model that imputes every subject's outcome under every arm.
pub trait OutcomeLearner: Send + Sync {
    fn name(&self) -> &'static str;
    fn impute(&self, ds: &Dataset, seed: u64) -> Result<PotentialOutcomeMatrix>;
}

/// Single sum-of-trees fit on (treatment, covariates), predicted with the
/// treatment forced to each arm.
pub struct BartLearner {
    pub config: TreeEnsembleConfig,
}

impl OutcomeLearner for BartLearner {
    fn name(&self) -> &'static str {
        "bart"
    }

    fn impute(&self, ds: &Dataset, seed: u64) -> Result<PotentialOutcomeMatrix> {
        let cfg = TreeEnsembleConfig {
            seed,
            ..self.config.clone()
        };
        let post = fit_sum_of_trees(ds, &cfg)?;
        impute_potential_outcomes(&post, ds)
    }
}

/// Names accepted by [`learner_by_name`].
pub const LEARNERS: [&str; 1] = ["bart"];

pub fn learner_by_name(name: &str, config: &TreeEnsembleConfig) -> Result<Box<dyn OutcomeLearner>> {
    match name {
        "bart" => Ok(Box::new(BartLearner { config: config.clone() })),
        other => Err(Error::Config(format!(
            "unknown outcome learner `{other}`; available: {}",
            LEARNERS.join(", ")
        ))),
    }
}

/// Settings of both stages and the post-processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSettings {
    pub learner: String,
    pub stage1: TreeEnsembleConfig,
    pub stage2: ChainConfig,
    /// Largest cluster count examined; `None` uses min(10, ⌊n/10⌋).
    pub k_max: Option<usize>,
    /// Centre and scale continuous covariates before both stages.
    pub standardize: bool,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            learner: "bart".into(),
            stage1: TreeEnsembleConfig::default(),
            stage2: ChainConfig::default(),
            k_max: None,
            standardize: false,
        }
    }
}

impl PipelineSettings {
    pub fn validate(&self) -> Result<()> {
        learner_by_name(&self.learner, &self.stage1)?;
        self.stage1.validate()?;
        self.stage2.validate()?;
        if let Some(k) = self.k_max {
            if k < 2 {
                return Err(Error::Config(format!("k_max must be at least 2, got {k}")));
            }
        }
        Ok(())
    }

    pub fn stage1_seed(seed: u64) -> u64 {
        derive(seed, STAGE1, 0)
    }

    pub fn stage2_seed(seed: u64) -> u64 {
        derive(seed, STAGE2, 0)
    }
}

/// Everything produced by one end-to-end run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub potential: PotentialOutcomeMatrix,
    pub stage2: Stage2Output,
}

#[derive(Debug, Clone)]
pub struct Stage2Output {
    pub data: ProfileData,
    pub prior: PriorSpec,
    pub chain: ChainOutput,
    pub similarity: SimilarityMatrix,
    pub representative: RepresentativeClustering,
    pub profiles: ClusterProfileSummary,
}

fn prepare(ds: &Dataset, settings: &PipelineSettings) -> Dataset {
    if settings.standardize {
        ds.standardized()
    } else {
        ds.clone()
    }
}

/// Stage 1 only.
pub fn run_stage1(ds: &Dataset, settings: &PipelineSettings, seed: u64) -> Result<PotentialOutcomeMatrix> {
    settings.validate()?;
    let ds = prepare(ds, settings);
    learner_by_name(&settings.learner, &settings.stage1)?.impute(&ds, PipelineSettings::stage1_seed(seed))
}

/// The stage-2 sampler alone, given imputed potential outcomes.
pub fn run_cluster_chain(
    ds: &Dataset,
    potential: &PotentialOutcomeMatrix,
    settings: &PipelineSettings,
    seed: u64,
) -> Result<(ProfileData, PriorSpec, ChainOutput)> {
    settings.validate()?;
    let ds = prepare(ds, settings);
    let data = ProfileData::new(&ds, potential)?;
    let prior = PriorSpec::default_for(&data)?;
    let cfg = ChainConfig {
        seed: PipelineSettings::stage2_seed(seed),
        ..settings.stage2.clone()
    };
    let chain = run_chain(&data, &prior, &cfg)?;
    Ok((data, prior, chain))
}

/// Representative clustering and profile summaries of a finished chain.
pub fn summarize_chain(
    trace: &[TraceRecord],
    similarity: &SimilarityMatrix,
    parameters: Vec<String>,
    k_max: Option<usize>,
) -> Result<(RepresentativeClustering, ClusterProfileSummary)> {
    let k_max = k_max.unwrap_or_else(|| default_k_max(similarity.n()));
    let representative = select_representative(similarity, k_max)?;
    let profiles = summarize_profiles(trace, &representative, parameters)?;
    Ok((representative, profiles))
}

/// Stage 2 and post-processing given imputed potential outcomes.
pub fn run_stage2(
    ds: &Dataset,
    potential: &PotentialOutcomeMatrix,
    settings: &PipelineSettings,
    seed: u64,
) -> Result<Stage2Output> {
    let (data, prior, chain) = run_cluster_chain(ds, potential, settings, seed)?;
    let similarity = chain.scores.similarity()?;
    let (representative, profiles) = summarize_chain(&chain.trace, &similarity, parameter_names(&data), settings.k_max)?;
    Ok(Stage2Output {
        data,
        prior,
        chain,
        similarity,
        representative,
        profiles,
    })
}

pub fn run_pipeline(ds: &Dataset, settings: &PipelineSettings, seed: u64) -> Result<PipelineOutput> {
    let potential = run_stage1(ds, settings, seed)?;
    let stage2 = run_stage2(ds, &potential, settings, seed)?;
    Ok(PipelineOutput { potential, stage2 })
}

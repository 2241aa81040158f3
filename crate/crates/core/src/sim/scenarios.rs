use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{CategoryEncoding, CovariateSpec, Dataset, Schema};
use crate::error::{Error, Result};
use crate::rng::{rng_from, SamplerRng};

/// Scenario 1 covariate means, one row per cluster.
pub const SCENARIO1_X_MEANS: [[f64; 3]; 3] = [[2.0, 4.0, 5.0], [4.0, 6.0, 1.0], [6.0, 1.0, 3.0]];
/// Scenario 1 expected potential outcomes E{Y*(a)}, one row per cluster.
pub const SCENARIO1_Y_MEANS: [[f64; 3]; 3] = [[4.0, 4.0, 4.0], [4.0, 7.0, 9.0], [4.0, 6.0, 5.0]];

/// Scenario 2 per-cluster P(X1 = 1).
pub const SCENARIO2_P_X1: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
/// Scenario 2 per-cluster P(X2 = 1).
pub const SCENARIO2_P_X2: [f64; 4] = [0.4, 0.4, 0.6, 0.6];
/// Scenario 2 per-cluster (P(X3 = 0), P(X3 = 1)); X3 = 2 takes the rest.
pub const SCENARIO2_P_X3: [[f64; 2]; 4] = [[0.1, 0.15], [0.2, 0.3], [0.3, 0.15], [0.4, 0.3]];
/// Scenario 2 per-cluster E(X4).
pub const SCENARIO2_X4_MEANS: [f64; 4] = [2.0, 4.0, 8.0, 6.0];
/// Scenario 2 expected potential outcomes, one row per cluster.
pub const SCENARIO2_Y_MEANS: [[f64; 4]; 4] = [
    [2.0, 2.0, 2.0, 2.0],
    [2.0, 5.0, 4.0, 3.0],
    [2.0, 4.0, 5.0, 6.0],
    [3.0, 6.0, 8.0, 8.0],
];
/// Scenario 2 cluster sizes in ninths of n.
pub const SCENARIO2_SIZE_NINTHS: [usize; 4] = [1, 2, 2, 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub scenario: u8,
    pub n: usize,
    pub sigma_y: f64,
    pub sigma_x: f64,
    /// Within-cluster correlation of X1 and X2 (scenario 1).
    pub rho_x: f64,
    /// Appended covariates unrelated to the clusters (scenario 2).
    pub noise_covariates: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: 1,
            n: 450,
            sigma_y: 0.5,
            sigma_x: 0.5,
            rho_x: 0.0,
            noise_covariates: 0,
            replicates: 1,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_y > 0.0 && self.sigma_x > 0.0) || !self.sigma_y.is_finite() || !self.sigma_x.is_finite() {
            return Err(Error::Config("noise standard deviations must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.rho_x) {
            return Err(Error::Config(format!("rho_x must lie in [0, 1), got {}", self.rho_x)));
        }
        if self.replicates == 0 {
            return Err(Error::Config("at least one replicate is required".into()));
        }
        Ok(())
    }
}

/// A simulated dataset with its generating clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub dataset: Dataset,
    /// 1-based generating cluster per subject.
    pub labels: Vec<u32>,
    /// E{Y*(a)} per subject, n × K row-major.
    pub expected_outcomes: Vec<f64>,
}

impl LabeledDataset {
    /// Writes `data.csv`, `schema.toml`, `encodings.csv` and `truth.csv`
    /// (id, cluster, expected outcome per arm) into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.dataset.write(dir.join("data.csv"))?;
        self.dataset.write_encodings(dir.join("encodings.csv"))?;
        let schema_path = dir.join("schema.toml");
        std::fs::write(&schema_path, self.dataset.schema().to_toml_string()).map_err(|e| Error::io(&schema_path, e))?;
        let k = self.dataset.arms();
        let truth_path = dir.join("truth.csv");
        let mut w = csv::Writer::from_path(&truth_path)?;
        let mut header = vec!["id".to_string(), "cluster".into()];
        header.extend((1..=k).map(|a| format!("ey_arm_{a}")));
        w.write_record(&header)?;
        for (i, id) in self.dataset.ids().iter().enumerate() {
            let mut row = vec![id.clone(), self.labels[i].to_string()];
            row.extend(self.expected_outcomes[i * k..(i + 1) * k].iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(&truth_path, e))
    }
}

/// A data-generating design.
pub trait Scenario: Send + Sync {
    fn id(&self) -> u8;
    fn description(&self) -> &'static str;
    fn arms(&self) -> usize;
    /// Expected potential outcomes per true cluster.
    fn outcome_means(&self) -> Vec<Vec<f64>>;
    fn generate(&self, cfg: &ScenarioConfig, seed: u64) -> Result<LabeledDataset>;
}

pub struct ThreeClusterContinuous;
pub struct FourClusterMixed;

impl Scenario for ThreeClusterContinuous {
    fn id(&self) -> u8 {
        1
    }
    fn description(&self) -> &'static str {
        "three equal clusters, three correlated normal covariates, three arms"
    }
    fn arms(&self) -> usize {
        3
    }
    fn outcome_means(&self) -> Vec<Vec<f64>> {
        SCENARIO1_Y_MEANS.iter().map(|r| r.to_vec()).collect()
    }
    fn generate(&self, cfg: &ScenarioConfig, seed: u64) -> Result<LabeledDataset> {
        gen_scenario1(cfg, seed)
    }
}

impl Scenario for FourClusterMixed {
    fn id(&self) -> u8 {
        2
    }
    fn description(&self) -> &'static str {
        "four unequal clusters, binary/categorical/normal covariates, four arms"
    }
    fn arms(&self) -> usize {
        4
    }
    fn outcome_means(&self) -> Vec<Vec<f64>> {
        SCENARIO2_Y_MEANS.iter().map(|r| r.to_vec()).collect()
    }
    fn generate(&self, cfg: &ScenarioConfig, seed: u64) -> Result<LabeledDataset> {
        gen_scenario2(cfg, seed)
    }
}

pub fn scenario_registry() -> Vec<Box<dyn Scenario>> {
    vec![Box::new(ThreeClusterContinuous), Box::new(FourClusterMixed)]
}

pub fn scenario_by_id(id: u8) -> Result<Box<dyn Scenario>> {
    scenario_registry()
        .into_iter()
        .find(|s| s.id() == id)
        .ok_or_else(|| Error::Config(format!("unknown scenario {id}; available: 1, 2")))
}

fn normal(rng: &mut SamplerRng) -> f64 {
    rng.sample(StandardNormal)
}

fn ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

/// Scenario 1: n/3 subjects per cluster, X ~ N(cluster means, σ_X² R) with
/// corr(X1, X2) = ρ_X, A uniform on {1, 2, 3}, Y ~ N(E{Y*(A)}, σ_Y²).
pub fn gen_scenario1(cfg: &ScenarioConfig, seed: u64) -> Result<LabeledDataset> {
    cfg.validate()?;
    if cfg.n == 0 || cfg.n % 3 != 0 {
        return Err(Error::Config(format!("scenario 1 needs n divisible by 3, got {}", cfg.n)));
    }
    let mut rng = rng_from(seed);
    let n = cfg.n;
    let per = n / 3;
    let mut labels = Vec::with_capacity(n);
    let mut treatment = Vec::with_capacity(n);
    let mut outcome = Vec::with_capacity(n);
    let mut continuous = Vec::with_capacity(3 * n);
    let mut expected = Vec::with_capacity(3 * n);
    let r = cfg.rho_x;
    for c in 0..3 {
        for _ in 0..per {
            let a = rng.random_range(1..=3usize);
            let (z1, z2, z3) = (normal(&mut rng), normal(&mut rng), normal(&mut rng));
            let mu = SCENARIO1_X_MEANS[c];
            continuous.push(mu[0] + cfg.sigma_x * z1);
            continuous.push(mu[1] + cfg.sigma_x * (r * z1 + (1.0 - r * r).sqrt() * z2));
            continuous.push(mu[2] + cfg.sigma_x * z3);
            let ey = SCENARIO1_Y_MEANS[c];
            outcome.push(ey[a - 1] + cfg.sigma_y * normal(&mut rng));
            expected.extend_from_slice(&ey);
            treatment.push(a);
            labels.push(c as u32 + 1);
        }
    }
    let schema = Schema {
        id: Some("id".into()),
        treatment: "A".into(),
        arms: 3,
        outcome: "Y".into(),
        utility: None,
        covariates: (1..=3).map(|j| CovariateSpec::continuous(format!("X{j}"))).collect(),
    };
    let dataset = Dataset::from_parts(schema, ids(n), treatment, outcome, None, continuous, Vec::new(), Vec::new())?;
    Ok(LabeledDataset {
        dataset,
        labels,
        expected_outcomes: expected,
    })
}

fn draw_category(rng: &mut SamplerRng, probs: &[f64]) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k as u32 + 1;
        }
    }
    probs.len() as u32
}

fn levels(k: usize) -> Vec<String> {
    (0..k).map(|l| l.to_string()).collect()
}

/// Scenario 2: clusters of n/9, 2n/9, 2n/9, 4n/9 subjects; binary X1, X2,
/// three-level X3, normal X4 with sd σ_X; A uniform on {1..4}. Optional noise
/// covariates alternate N(0, 1) and uniform three-level categories.
pub fn gen_scenario2(cfg: &ScenarioConfig, seed: u64) -> Result<LabeledDataset> {
    cfg.validate()?;
    if cfg.n == 0 || cfg.n % 9 != 0 {
        return Err(Error::Config(format!("scenario 2 needs n divisible by 9, got {}", cfg.n)));
    }
    let mut rng = rng_from(seed);
    let n = cfg.n;
    let noise_cont = cfg.noise_covariates.div_ceil(2);
    let noise_disc = cfg.noise_covariates / 2;
    let p1 = 1 + noise_cont;
    let p2 = 3 + noise_disc;
    let mut labels = Vec::with_capacity(n);
    let mut treatment = Vec::with_capacity(n);
    let mut outcome = Vec::with_capacity(n);
    let mut continuous = Vec::with_capacity(p1 * n);
    let mut discrete = Vec::with_capacity(p2 * n);
    let mut expected = Vec::with_capacity(4 * n);
    for c in 0..4 {
        for _ in 0..SCENARIO2_SIZE_NINTHS[c] * n / 9 {
            let a = rng.random_range(1..=4usize);
            let p1x = SCENARIO2_P_X1[c];
            let p2x = SCENARIO2_P_X2[c];
            let [p30, p31] = SCENARIO2_P_X3[c];
            discrete.push(draw_category(&mut rng, &[1.0 - p1x, p1x]));
            discrete.push(draw_category(&mut rng, &[1.0 - p2x, p2x]));
            discrete.push(draw_category(&mut rng, &[p30, p31, 1.0 - p30 - p31]));
            continuous.push(SCENARIO2_X4_MEANS[c] + cfg.sigma_x * normal(&mut rng));
            for m in 0..cfg.noise_covariates {
                if m % 2 == 0 {
                    continuous.push(normal(&mut rng));
                } else {
                    discrete.push(draw_category(&mut rng, &[1.0 / 3.0; 3]));
                }
            }
            let ey = SCENARIO2_Y_MEANS[c];
            outcome.push(ey[a - 1] + cfg.sigma_y * normal(&mut rng));
            expected.extend_from_slice(&ey);
            treatment.push(a);
            labels.push(c as u32 + 1);
        }
    }
    let mut covariates = vec![
        CovariateSpec::discrete("X1", Some(levels(2))),
        CovariateSpec::discrete("X2", Some(levels(2))),
        CovariateSpec::discrete("X3", Some(levels(3))),
        CovariateSpec::continuous("X4"),
    ];
    let mut encodings: Vec<CategoryEncoding> = [("X1", 2), ("X2", 2), ("X3", 3)]
        .iter()
        .map(|&(name, k)| CategoryEncoding {
            covariate: name.into(),
            levels: levels(k),
        })
        .collect();
    for m in 0..cfg.noise_covariates {
        let name = format!("N{}", m + 1);
        if m % 2 == 0 {
            covariates.push(CovariateSpec::continuous(name));
        } else {
            covariates.push(CovariateSpec::discrete(name.clone(), Some(levels(3))));
            encodings.push(CategoryEncoding {
                covariate: name,
                levels: levels(3),
            });
        }
    }
    let schema = Schema {
        id: Some("id".into()),
        treatment: "A".into(),
        arms: 4,
        outcome: "Y".into(),
        utility: None,
        covariates,
    };
    let dataset = Dataset::from_parts(schema, ids(n), treatment, outcome, None, continuous, discrete, encodings)?;
    Ok(LabeledDataset {
        dataset,
        labels,
        expected_outcomes: expected,
    })
}

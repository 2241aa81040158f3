use crate::bart::PotentialOutcomeMatrix;
use crate::data::{summarize_columns, CategoryEncoding, Dataset, EmpiricalReference};
use crate::error::{Error, Result};

/// Everything the mixture sees about the subjects: continuous and discrete
/// covariates, the imputed outcome vectors and the data-wide reference
/// profile, in flat row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileData {
    n: usize,
    p1: usize,
    arms: usize,
    categories: Vec<usize>,
    continuous: Vec<f64>,
    discrete: Vec<u32>,
    outcome: Vec<f64>,
    reference: EmpiricalReference,
    pub ids: Vec<String>,
    pub continuous_names: Vec<String>,
    pub encodings: Vec<CategoryEncoding>,
}

impl ProfileData {
    pub fn new(ds: &Dataset, y: &PotentialOutcomeMatrix) -> Result<Self> {
        if y.n() != ds.n() {
            return Err(Error::Dimension(format!(
                "potential outcomes cover {} subjects, dataset has {}",
                y.n(),
                ds.n()
            )));
        }
        if y.arms() != ds.arms() {
            return Err(Error::Dimension(format!(
                "potential outcomes have {} arms, schema declares {}",
                y.arms(),
                ds.arms()
            )));
        }
        if let Some(i) = (0..ds.n()).find(|&i| y.ids()[i] != ds.ids()[i]) {
            return Err(Error::Data(format!(
                "subject {} of the potential-outcome file is '{}', dataset has '{}'",
                i + 1,
                y.ids()[i],
                ds.ids()[i]
            )));
        }
        let n = ds.n();
        let p1 = ds.n_continuous();
        let p2 = ds.n_discrete();
        let mut continuous = Vec::with_capacity(n * p1);
        let mut discrete = Vec::with_capacity(n * p2);
        for i in 0..n {
            continuous.extend_from_slice(ds.continuous_row(i));
            discrete.extend_from_slice(ds.discrete_row(i));
        }
        Ok(ProfileData {
            n,
            p1,
            arms: y.arms(),
            categories: ds.categories(),
            continuous,
            discrete,
            outcome: y.values().to_vec(),
            reference: summarize_columns(ds),
            ids: ds.ids().to_vec(),
            continuous_names: ds.schema().continuous().map(|c| c.name.clone()).collect(),
            encodings: ds.encodings().to_vec(),
        })
    }

    /// Builds directly from arrays. Category codes are 1-based.
    pub fn from_parts(
        p1: usize,
        categories: Vec<usize>,
        arms: usize,
        continuous: Vec<f64>,
        discrete: Vec<u32>,
        outcome: Vec<f64>,
    ) -> Result<Self> {
        if arms == 0 || outcome.len() % arms != 0 {
            return Err(Error::Dimension("outcome length is not a multiple of the arm count".into()));
        }
        let n = outcome.len() / arms;
        let p2 = categories.len();
        if continuous.len() != n * p1 || discrete.len() != n * p2 {
            return Err(Error::Dimension("covariate arrays do not match subject count".into()));
        }
        for (idx, &code) in discrete.iter().enumerate() {
            let k = categories[idx % p2.max(1)];
            if code == 0 || code as usize > k {
                return Err(Error::Data(format!("category code {code} outside 1..={k}")));
            }
        }
        let mut reference = EmpiricalReference {
            means: vec![0.0; p1],
            proportions: categories.iter().map(|&k| vec![1.0 / k as f64; k]).collect(),
        };
        if n > 0 {
            for j in 0..p1 {
                reference.means[j] = (0..n).map(|i| continuous[i * p1 + j]).sum::<f64>() / n as f64;
            }
            for (j, &k) in categories.iter().enumerate() {
                let mut counts = vec![0usize; k];
                for i in 0..n {
                    counts[discrete[i * p2 + j] as usize - 1] += 1;
                }
                reference.proportions[j] = counts.iter().map(|&c| c as f64 / n as f64).collect();
            }
        }
        let encodings = categories
            .iter()
            .enumerate()
            .map(|(j, &k)| CategoryEncoding {
                covariate: format!("D{}", j + 1),
                levels: (1..=k).map(|l| l.to_string()).collect(),
            })
            .collect();
        Ok(ProfileData {
            n,
            p1,
            arms,
            categories,
            continuous,
            discrete,
            outcome,
            reference,
            ids: (1..=n).map(|i| i.to_string()).collect(),
            continuous_names: (1..=p1).map(|j| format!("X{j}")).collect(),
            encodings,
        })
    }

    /// No subjects at all: sweeps then sample from the prior.
    pub fn empty(p1: usize, categories: Vec<usize>, arms: usize) -> Self {
        Self::from_parts(p1, categories, arms, Vec::new(), Vec::new(), Vec::new())
            .expect("empty data is consistent")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.categories.len()
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn categories(&self) -> &[usize] {
        &self.categories
    }

    pub fn continuous_row(&self, i: usize) -> &[f64] {
        &self.continuous[i * self.p1..(i + 1) * self.p1]
    }

    pub fn discrete_row(&self, i: usize) -> &[u32] {
        let p2 = self.p2();
        &self.discrete[i * p2..(i + 1) * p2]
    }

    pub fn outcome_row(&self, i: usize) -> &[f64] {
        &self.outcome[i * self.arms..(i + 1) * self.arms]
    }

    pub fn reference(&self) -> &EmpiricalReference {
        &self.reference
    }

    /// Names of every covariate, continuous first, in selection order.
    pub fn covariate_names(&self) -> Vec<String> {
        self.continuous_names
            .iter()
            .cloned()
            .chain(self.encodings.iter().map(|e| e.covariate.clone()))
            .collect()
    }
}

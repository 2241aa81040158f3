use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    pub kind: CovariateKind,
    /// Declared category labels for a discrete covariate, in code order.
    /// When absent the labels are inferred from the data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

impl CovariateSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        CovariateSpec {
            name: name.into(),
            kind: CovariateKind::Continuous,
            levels: None,
        }
    }

    pub fn discrete(name: impl Into<String>, levels: Option<Vec<String>>) -> Self {
        CovariateSpec {
            name: name.into(),
            kind: CovariateKind::Discrete,
            levels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityConfig {
    /// Benefit lost per unit of risk.
    pub tradeoff: f64,
}

impl UtilityConfig {
    pub fn new(tradeoff: f64) -> Result<Self> {
        if !tradeoff.is_finite() || tradeoff < 0.0 {
            return Err(Error::Config(format!(
                "utility trade-off must be finite and non-negative, got {tradeoff}"
            )));
        }
        Ok(UtilityConfig { tradeoff })
    }
}

/// Derive the outcome as `benefit - tradeoff * risk` from two columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilitySpec {
    pub benefit: String,
    pub risk: String,
    pub tradeoff: f64,
}

impl UtilitySpec {
    pub fn config(&self) -> Result<UtilityConfig> {
        UtilityConfig::new(self.tradeoff)
    }
}

/// Column roles of a trial dataset. Lives in its own TOML file so one data
/// file can serve several analyses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub treatment: String,
    /// Number of treatment arms; treatment values must lie in 1..=arms.
    pub arms: usize,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilitySpec>,
    pub covariates: Vec<CovariateSpec>,
}

impl Schema {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Schema =
            toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.covariates.is_empty() {
            return Err(Error::Schema("at least one covariate is required".into()));
        }
        if self.arms < 1 {
            return Err(Error::Schema("arm count must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        let mut names: Vec<&str> = vec![self.treatment.as_str(), self.outcome.as_str()];
        if let Some(id) = &self.id {
            names.push(id);
        }
        if let Some(u) = &self.utility {
            names.push(&u.benefit);
            names.push(&u.risk);
            u.config()?;
        }
        names.extend(self.covariates.iter().map(|c| c.name.as_str()));
        for n in names {
            if !seen.insert(n) {
                return Err(Error::Schema(format!("column name `{n}` used twice")));
            }
        }
        for c in &self.covariates {
            match (c.kind, &c.levels) {
                (CovariateKind::Discrete, Some(levels)) => {
                    if levels.len() < 2 {
                        return Err(Error::Schema(format!(
                            "discrete covariate `{}` needs at least 2 categories",
                            c.name
                        )));
                    }
                    let distinct: HashSet<_> = levels.iter().collect();
                    if distinct.len() != levels.len() {
                        return Err(Error::Schema(format!(
                            "discrete covariate `{}` repeats a category label",
                            c.name
                        )));
                    }
                }
                (CovariateKind::Continuous, Some(_)) => {
                    return Err(Error::Schema(format!(
                        "continuous covariate `{}` cannot declare levels",
                        c.name
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn continuous(&self) -> impl Iterator<Item = &CovariateSpec> {
        self.covariates
            .iter()
            .filter(|c| c.kind == CovariateKind::Continuous)
    }

    pub fn discrete(&self) -> impl Iterator<Item = &CovariateSpec> {
        self.covariates
            .iter()
            .filter(|c| c.kind == CovariateKind::Discrete)
    }

    pub fn n_continuous(&self) -> usize {
        self.continuous().count()
    }

    pub fn n_discrete(&self) -> usize {
        self.discrete().count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &str = r#"
treatment = "A"
arms = 3
outcome = "Y"

[[covariates]]
name = "X1"
kind = "continuous"

[[covariates]]
name = "X2"
kind = "discrete"
levels = ["0", "1"]
"#;

    #[test]
    fn parses_toml() {
        let s = Schema::from_toml_str(SCHEMA).unwrap();
        assert_eq!(s.n_continuous(), 1);
        assert_eq!(s.n_discrete(), 1);
        assert_eq!(Schema::from_toml_str(&s.to_toml_string()).unwrap(), s);
    }

    #[test]
    fn rejects_duplicate_names() {
        let text = SCHEMA.replace("\"X2\"", "\"X1\"");
        assert!(matches!(Schema::from_toml_str(&text), Err(Error::Schema(_))));
    }

    #[test]
    fn rejects_single_level() {
        let text = SCHEMA.replace("[\"0\", \"1\"]", "[\"0\"]");
        assert!(Schema::from_toml_str(&text).is_err());
    }

    #[test]
    fn negative_tradeoff_rejected() {
        assert!(UtilityConfig::new(-1.0).is_err());
        assert!(UtilityConfig::new(f64::INFINITY).is_err());
    }
}

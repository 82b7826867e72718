//! Experiment configuration files.

use std::path::{Path, PathBuf};

use gamblers_core::catalog::{default_catalog, Catalog, CatalogError};
use gamblers_core::finite::FiniteMartingale;
use gamblers_core::fireworks::{dense_capital_set, length_dense_set, Enumerator, MartingaleOrder, PrefixOrder};
use gamblers_core::Rat;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

/// Parses TOML, or JSON when the path ends in `.json`.
pub fn load_file<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: p.clone(),
        source,
    })?;
    let parsed = if p.ends_with(".json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|reason| ConfigError::Parse { path: p, reason })
}

/// The built-in catalog, or the one at `path`.
pub fn load_catalog(path: Option<&Path>) -> Result<Catalog, ConfigError> {
    match path {
        Some(p) => Ok(Catalog::load(p)?),
        None => Ok(default_catalog()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparationConfig {
    /// Strategy catalog; the built-in one when absent.
    pub catalog: Option<PathBuf>,
    /// Minimum length of Δ; construction continues past it until every
    /// catalog strategy has been introduced.
    pub depth: usize,
    /// Stages whose gaps come from threshold estimation.
    pub stages: usize,
    pub estimation_seeds: usize,
    pub evaluation_seeds: usize,
    /// Counter bound `N_e` for every requirement.
    pub counter_threshold: u64,
    pub rounds: usize,
    pub budget_growth: u64,
    /// Gap of the stages after the estimated ones.
    pub tail_gap: usize,
    pub master_seed: u64,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        SeparationConfig {
            catalog: None,
            depth: 2000,
            stages: 4,
            estimation_seeds: 200,
            evaluation_seeds: 500,
            counter_threshold: 8,
            rounds: 64,
            budget_growth: 256,
            tail_gap: 32,
            master_seed: 20_240_601,
        }
    }
}

impl SeparationConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: SeparationConfig = load_file(path)?;
        if let (Some(c), Some(dir)) = (&cfg.catalog, path.parent()) {
            if c.is_relative() {
                cfg.catalog = Some(dir.join(c));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.estimation_seeds < 30 {
            return fail("estimation_seeds must be at least 30");
        }
        if self.stages == 0 {
            return fail("stages must be positive");
        }
        if self.counter_threshold == 0 || self.rounds == 0 || self.budget_growth == 0 || self.tail_gap == 0 {
            return fail("counter_threshold, rounds, budget_growth and tail_gap must be positive");
        }
        Ok(())
    }
}

/// One requirement of a fireworks run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RequirementSpec {
    /// Capital above `target` on some prefix of a catalog sequence.
    Capital {
        sequence: String,
        target: Rat,
        threshold: Option<u64>,
    },
    /// Length at least `n`.
    Length { n: usize, threshold: Option<u64> },
}

impl RequirementSpec {
    fn threshold(&self) -> Option<u64> {
        match self {
            RequirementSpec::Capital { threshold, .. } | RequirementSpec::Length { threshold, .. } => *threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequirementsFile {
    #[serde(default = "default_threshold")]
    pub threshold: u64,
    #[serde(default = "default_growth")]
    pub budget_growth: u64,
    #[serde(default)]
    pub requirements: Vec<RequirementSpec>,
}

fn default_threshold() -> u64 {
    8
}

fn default_growth() -> u64 {
    64
}

impl RequirementsFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        load_file(path)
    }

    pub fn thresholds(&self) -> Vec<u64> {
        self.requirements
            .iter()
            .map(|r| r.threshold().unwrap_or(self.threshold))
            .collect()
    }

    pub fn martingale_requirements(
        &self,
        catalog: &Catalog,
    ) -> Result<Vec<Box<dyn Enumerator<FiniteMartingale>>>, ConfigError> {
        self.requirements
            .iter()
            .map(|r| -> Result<Box<dyn Enumerator<FiniteMartingale>>, ConfigError> {
                Ok(match r {
                    RequirementSpec::Capital { sequence, target, .. } => {
                        if target < &Rat::one() {
                            return Err(ConfigError::Invalid(format!("capital target {target} below 1")));
                        }
                        Box::new(dense_capital_set(catalog.sequence(sequence)?, target.clone()))
                    }
                    RequirementSpec::Length { n, .. } => Box::new(length_dense_set(MartingaleOrder, *n)),
                })
            })
            .collect()
    }

    pub fn prefix_requirements(&self) -> Result<Vec<Box<dyn Enumerator<gamblers_core::BitString>>>, ConfigError> {
        self.requirements
            .iter()
            .map(|r| match r {
                RequirementSpec::Length { n, .. } => {
                    Ok(Box::new(length_dense_set(PrefixOrder, *n)) as Box<dyn Enumerator<_>>)
                }
                RequirementSpec::Capital { .. } => Err(ConfigError::Invalid(
                    "capital requirements need the martingale order".into(),
                )),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separation_defaults_are_valid() {
        SeparationConfig::default().validate().unwrap();
        let small = SeparationConfig {
            estimation_seeds: 10,
            ..SeparationConfig::default()
        };
        assert!(small.validate().is_err());
    }

    #[test]
    fn requirements_parse() {
        let f: RequirementsFile = toml::from_str(
            r#"
            threshold = 4
            [[requirements]]
            kind = "capital"
            sequence = "zeros"
            target = "3"
            [[requirements]]
            kind = "length"
            n = 10
            threshold = 2
            "#,
        )
        .unwrap();
        assert_eq!(f.thresholds(), vec![4, 2]);
        let reqs = f.martingale_requirements(&default_catalog()).unwrap();
        assert_eq!(reqs[0].id(), "capital>3/1@zeros");
        assert!(f.prefix_requirements().is_err());
    }
}

//! Experiment plans: a set of labeled conditions, each pointing at a
//! scenario file, repeated for a number of trials.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub label: String,
    /// Scenario file, relative to the plan file.
    pub scenario: PathBuf,
}

fn default_count() -> usize {
    4
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_count")]
    pub trials: usize,
    /// Gait cycles per trial kept by `analyze`.
    #[serde(default = "default_count")]
    pub cycles: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(rename = "condition", default)]
    pub conditions: Vec<Condition>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("plan.trials must be >= 1".into()));
        }
        if self.cycles == 0 {
            return Err(Error::Config("plan.cycles must be >= 1".into()));
        }
        if self.conditions.is_empty() {
            return Err(Error::Config("plan has no [[condition]] entries".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.conditions {
            if c.label.is_empty() || c.label.contains(['/', '\\']) {
                return Err(Error::Config(format!(
                    "invalid condition label {:?}",
                    c.label
                )));
            }
            if !seen.insert(c.label.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate condition label {:?}",
                    c.label
                )));
            }
        }
        Ok(())
    }

    /// Parses a plan. Relative scenario and output paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, origin: &Path, base_dir: Option<&Path>) -> Result<Self> {
        let mut plan: ExperimentPlan = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
        if let Some(dir) = base_dir {
            for c in &mut plan.conditions {
                if c.scenario.is_relative() {
                    c.scenario = dir.join(&c.scenario);
                }
            }
            if plan.out.is_relative() {
                plan.out = dir.join(&plan.out);
            }
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path, path.parent())
    }

    /// Loads and validates every scenario, in plan order.
    pub fn load_scenarios(&self) -> Result<Vec<(String, ScenarioConfig)>> {
        self.conditions
            .iter()
            .map(|c| Ok((c.label.clone(), ScenarioConfig::from_file(&c.scenario)?)))
            .collect()
    }
}

/// Seed for trial `trial`. Depends on the global seed and the trial index
/// only, so every condition sees the same noise realization per trial.
pub fn trial_seed(global: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(global);
    rng.set_stream(trial as u64 + 1);
    rng.next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_relative_paths() {
        let text = "[[condition]]\nlabel = \"free\"\nscenario = \"s/free.toml\"\n";
        let plan =
            ExperimentPlan::from_toml_str(text, Path::new("p.toml"), Some(Path::new("/base")))
                .unwrap();
        assert_eq!(plan.trials, 4);
        assert_eq!(plan.cycles, 4);
        assert_eq!(plan.seed, 0);
        assert_eq!(plan.out, Path::new("/base/out"));
        assert_eq!(plan.conditions[0].scenario, Path::new("/base/s/free.toml"));
    }

    #[test]
    fn rejects_bad_plans() {
        let dup = "[[condition]]\nlabel=\"a\"\nscenario=\"x\"\n[[condition]]\nlabel=\"a\"\nscenario=\"y\"\n";
        assert!(ExperimentPlan::from_toml_str(dup, Path::new("p"), None).is_err());
        let zero = "trials = 0\n[[condition]]\nlabel=\"a\"\nscenario=\"x\"\n";
        assert!(ExperimentPlan::from_toml_str(zero, Path::new("p"), None).is_err());
        assert!(ExperimentPlan::from_toml_str("", Path::new("p"), None).is_err());
        let err = ExperimentPlan::from_toml_str("trials = \"x\"\n", Path::new("p.toml"), None)
            .unwrap_err();
        assert!(err.to_string().contains("p.toml"));
    }

    #[test]
    fn trial_seeds_are_distinct_and_stable() {
        let seeds: BTreeSet<u64> = (0..100).map(|k| trial_seed(7, k)).collect();
        assert_eq!(seeds.len(), 100);
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
        assert_ne!(trial_seed(7, 3), trial_seed(8, 3));
    }
}

//! Scenario files: TOML with `[human]`, `[robot]`, `[coupling]`,
//! `[controller]` and `[trial]` sections, all quantities in SI units.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::ControllerConfig;
use crate::coupling::CouplingParams;
use crate::error::{Error, Result};
use crate::gait::JointCurves;
use crate::human::HumanConfig;
use crate::robot::RobotParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Physics step, s.
    pub dt_physics: f64,
    /// Recorder rate, Hz.
    pub record_rate: f64,
    /// Controller rate, Hz.
    pub controller_rate: f64,
    /// Fixed trial length, s. Takes precedence over `distance`.
    pub duration: Option<f64>,
    /// Forward pelvis progress that ends the trial, m.
    pub distance: Option<f64>,
    /// Guard for distance-terminated trials, s.
    pub max_time: f64,
    pub seed: u64,
    /// Scripted loss of leg support at this time, s.
    pub collapse_at: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_physics: 0.001,
            record_rate: 50.0,
            controller_rate: 100.0,
            duration: None,
            distance: Some(10.0),
            max_time: 60.0,
            seed: 0,
            collapse_at: None,
        }
    }
}

fn steps_per(dt: f64, rate: f64) -> Option<u64> {
    let ratio = 1.0 / (dt * rate);
    let n = ratio.round();
    ((ratio - n).abs() < 1e-9 * n.max(1.0) && n >= 1.0).then_some(n as u64)
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_physics > 0.0 && self.dt_physics.is_finite()) {
            return Err(Error::Config("trial.dt_physics must be > 0".into()));
        }
        if steps_per(self.dt_physics, self.record_rate).is_none() {
            return Err(Error::Config(format!(
                "trial.record_rate {} Hz does not divide the physics rate",
                self.record_rate
            )));
        }
        if steps_per(self.dt_physics, self.controller_rate).is_none() {
            return Err(Error::Config(format!(
                "trial.controller_rate {} Hz does not divide the physics rate",
                self.controller_rate
            )));
        }
        match (self.duration, self.distance) {
            (None, None) => {
                return Err(Error::Config("trial needs a duration or a distance".into()))
            }
            (Some(d), _) if !(d >= 0.0) => {
                return Err(Error::Config("trial.duration must be >= 0".into()))
            }
            (_, Some(d)) if !(d > 0.0) => {
                return Err(Error::Config("trial.distance must be > 0".into()))
            }
            _ => {}
        }
        if !(self.max_time > 0.0) {
            return Err(Error::Config("trial.max_time must be > 0".into()));
        }
        Ok(())
    }

    /// Physics steps per recorded sample.
    pub fn record_every(&self) -> u64 {
        steps_per(self.dt_physics, self.record_rate).unwrap_or(1)
    }

    /// Physics steps per controller tick.
    pub fn control_every(&self) -> u64 {
        steps_per(self.dt_physics, self.controller_rate).unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub human: HumanConfig,
    pub robot: RobotParams,
    pub coupling: CouplingParams,
    pub controller: ControllerConfig,
    pub trial: SimConfig,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.human.validate()?;
        self.robot.validate()?;
        self.coupling.validate()?;
        self.controller.validate()?;
        self.trial.validate()
    }

    /// Parses TOML text. Relative `fourier_csv` paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, origin: &Path, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
        check_human_keys(text, origin)?;
        if let Some(csv) = cfg.human.fourier_csv.clone() {
            let path = match base_dir {
                Some(dir) if csv.is_relative() => dir.join(csv),
                _ => csv,
            };
            cfg.human.gait.curves = JointCurves::from_csv(&path)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path, path.parent())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_default()
    }
}

/// `[human]` flattens two structs, which serde cannot combine with
/// `deny_unknown_fields`, so its keys are checked here.
fn check_human_keys(text: &str, origin: &Path) -> Result<()> {
    let doc: toml::Table = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
    let Some(toml::Value::Table(human)) = doc.get("human") else {
        return Ok(());
    };
    let probe = HumanConfig {
        pd_damping: Some([0.0; 6]),
        fourier_csv: Some(PathBuf::new()),
        ..HumanConfig::default()
    };
    let known = toml::Table::try_from(&probe).map_err(|e| Error::parse(origin, e))?;
    match human.keys().find(|k| !known.contains_key(*k)) {
        Some(k) => Err(Error::parse(
            origin,
            format!("unknown field `{k}` in [human]"),
        )),
        None => Ok(()),
    }
}

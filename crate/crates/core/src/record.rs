//! Recorded trials: fixed-column CSV plus a JSON sidecar with the resolved scenario.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::{Joint, LegAngles};
use crate::scenario::ScenarioConfig;

/// Column names in file order. Angles are in radians except the joint
/// angles, which are in degrees.
pub const COLUMNS: [&str; 42] = [
    "t",
    "pelvis_x",
    "pelvis_y",
    "pelvis_z",
    "pelvis_roll",
    "pelvis_pitch",
    "pelvis_yaw",
    "hip_l",
    "knee_l",
    "ankle_l",
    "hip_r",
    "knee_r",
    "ankle_r",
    "heel_l_x",
    "heel_l_y",
    "heel_l_z",
    "heel_r_x",
    "heel_r_y",
    "heel_r_z",
    "base_x",
    "base_y",
    "base_heading",
    "base_vx",
    "base_vy",
    "base_yaw_rate",
    "q_tx",
    "q_ty",
    "q_tz",
    "q_rx",
    "q_ry",
    "q_rz",
    "f_x",
    "f_y",
    "f_z",
    "tau_x",
    "tau_y",
    "tau_z",
    "cmd_vx",
    "cmd_vy",
    "cmd_yaw_rate",
    "phase",
    "lock",
];

pub(crate) const HEADER_COMMENT: &str =
    "# hitlsim trial record. SI units; joint angles in degrees, \
pelvis/base angles in rad; q = coupling displacement (attachment frame), \
f/tau = interaction wrench on the pelvis (attachment frame), cmd = base-frame \
velocity command, lock = fall intervention flag.";

/// One recorded sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sample {
    pub t: f64,
    /// `[x, y, z, roll, pitch, yaw]`.
    pub pelvis: [f64; 6],
    pub left: LegAngles,
    pub right: LegAngles,
    /// Heel position per leg, world frame.
    pub heel_left: [f64; 3],
    pub heel_right: [f64; 3],
    /// `[x, y, heading, vx, vy, yaw_rate]`.
    pub base: [f64; 6],
    pub q: [f64; 6],
    pub wrench: [f64; 6],
    /// `[vx, vy, yaw_rate]`.
    pub command: [f64; 3],
    pub phase: f64,
    pub lock: bool,
}

impl Sample {
    pub fn to_row(&self) -> [f64; COLUMNS.len()] {
        let mut row = [0.0; COLUMNS.len()];
        let mut i = 0;
        let mut put = |vals: &[f64]| {
            row[i..i + vals.len()].copy_from_slice(vals);
            i += vals.len();
        };
        put(&[self.t]);
        put(&self.pelvis);
        put(&[self.left.hip, self.left.knee, self.left.ankle]);
        put(&[self.right.hip, self.right.knee, self.right.ankle]);
        put(&self.heel_left);
        put(&self.heel_right);
        put(&self.base);
        put(&self.q);
        put(&self.wrench);
        put(&self.command);
        put(&[self.phase, if self.lock { 1.0 } else { 0.0 }]);
        row
    }

    pub fn from_row(row: &[f64]) -> Option<Self> {
        if row.len() != COLUMNS.len() {
            return None;
        }
        let six = |a: usize| -> [f64; 6] { row[a..a + 6].try_into().unwrap() };
        let three = |a: usize| -> [f64; 3] { row[a..a + 3].try_into().unwrap() };
        let leg = |a: usize| LegAngles {
            hip: row[a],
            knee: row[a + 1],
            ankle: row[a + 2],
        };
        Some(Self {
            t: row[0],
            pelvis: six(1),
            left: leg(7),
            right: leg(10),
            heel_left: three(13),
            heel_right: three(16),
            base: six(19),
            q: six(25),
            wrench: six(31),
            command: three(37),
            phase: row[40],
            lock: row[41] != 0.0,
        })
    }

    pub fn joint(&self, joint: Joint, left: bool) -> f64 {
        if left {
            self.left.get(joint)
        } else {
            self.right.get(joint)
        }
    }
}

/// Trial metadata written to the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub label: String,
    pub trial: usize,
    pub seed: u64,
    pub robot_present: bool,
    pub samples: usize,
    pub scenario: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub meta: RecordMeta,
    pub samples: Vec<Sample>,
}

impl TrialRecord {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.meta.scenario.trial.record_rate
    }

    /// Extracts one column by name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = COLUMNS.iter().position(|c| *c == name)?;
        Some(self.samples.iter().map(|s| s.to_row()[idx]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 + self.samples.len() * 400);
        out.push_str(HEADER_COMMENT);
        out.push('\n');
        out.push_str(&COLUMNS.join(","));
        out.push('\n');
        for s in &self.samples {
            for (i, v) in s.to_row().iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                // Display gives the shortest string that parses back to the same value
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).unwrap_or_default()
    }

    /// File stem used by [`TrialRecord::save`].
    pub fn stem(&self) -> String {
        format!("{}_trial{}", self.meta.label, self.meta.trial)
    }

    /// Writes `<label>_trial<k>.csv` and the `.json` sidecar into `dir`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{}.csv", self.stem()));
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let json = csv.with_extension("json");
        std::fs::write(&json, self.sidecar_json()).map_err(|e| Error::io(&json, e))?;
        Ok(csv)
    }

    pub fn parse_csv(text: &str, origin: &Path) -> Result<Vec<Sample>> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(origin, "missing header row"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != COLUMNS {
            return Err(Error::parse(origin, "unexpected column layout"));
        }
        let mut samples = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(origin, format!("row {}: {e}", n + 1)))?;
            let sample = Sample::from_row(&row).ok_or_else(|| {
                Error::parse(
                    origin,
                    format!("row {}: expected {} values", n + 1, COLUMNS.len()),
                )
            })?;
            samples.push(sample);
        }
        Ok(samples)
    }

    /// Loads a CSV record and its sidecar (same stem, `.json`).
    pub fn load(csv: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(csv).map_err(|e| Error::io(csv, e))?;
        let samples = Self::parse_csv(&text, csv)?;
        let json = csv.with_extension("json");
        let meta_text = std::fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let meta: RecordMeta =
            serde_json::from_str(&meta_text).map_err(|e| Error::parse(&json, e))?;
        Ok(Self { meta, samples })
    }
}

//! Parametric gait generator and sagittal leg kinematics.
//!
//! The phase `φ ∈ [0, 1)` spans one stride. Left heel strike is at `φ = 0`,
//! right heel strike at `φ = 0.5`. Joint angles are in degrees with hip and
//! knee flexion and ankle dorsiflexion positive.

use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HIP_BOUNDS: (f64, f64) = (-30.0, 50.0);
pub const KNEE_BOUNDS: (f64, f64) = (-5.0, 80.0);
pub const ANKLE_BOUNDS: (f64, f64) = (-30.0, 30.0);

/// Truncated Fourier series over one gait cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    pub mean: f64,
    /// `(cos, sin)` amplitude for harmonics 1..=N.
    pub harmonics: Vec<(f64, f64)>,
}

impl FourierSeries {
    pub fn new(mean: f64, harmonics: Vec<(f64, f64)>) -> Self {
        Self { mean, harmonics }
    }

    pub fn eval(&self, phase: f64) -> f64 {
        self.harmonics
            .iter()
            .enumerate()
            .fold(self.mean, |acc, (i, &(a, b))| {
                let w = TAU * (i + 1) as f64 * phase;
                acc + a * w.cos() + b * w.sin()
            })
    }
}

/// Sagittal joint-angle curves for one leg, referenced to that leg's heel strike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointCurves {
    pub hip: FourierSeries,
    pub knee: FourierSeries,
    pub ankle: FourierSeries,
}

impl Default for JointCurves {
    // Normative sagittal curves (ranges ≈ 45°, 60°, 25°) with the heel's
    // forward excursion peaking at φ = 0.
    fn default() -> Self {
        Self {
            hip: FourierSeries::new(
                8.599,
                vec![
                    (22.221, 0.242),
                    (0.314, -0.415),
                    (0.272, 0.051),
                    (0.032, 0.11),
                ],
            ),
            knee: FourierSeries::new(
                19.19,
                vec![
                    (1.294, -19.34),
                    (-16.166, 3.228),
                    (-1.827, 5.954),
                    (1.699, -1.521),
                ],
            ),
            ankle: FourierSeries::new(
                0.501,
                vec![
                    (-3.908, 1.722),
                    (6.655, 0.81),
                    (0.67, -3.205),
                    (-1.775, 0.514),
                ],
            ),
        }
    }
}

impl JointCurves {
    pub fn series(&self, joint: Joint) -> &FourierSeries {
        match joint {
            Joint::Hip => &self.hip,
            Joint::Knee => &self.knee,
            Joint::Ankle => &self.ankle,
        }
    }

    pub fn eval(&self, phase: f64) -> LegAngles {
        LegAngles {
            hip: self.hip.eval(phase),
            knee: self.knee.eval(phase),
            ankle: self.ankle.eval(phase),
        }
    }

    /// Loads coefficients from CSV rows `joint,harmonic,cos,sin`. Harmonic 0
    /// carries the mean in the `cos` column. A header row is allowed.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut curves = JointCurves {
            hip: FourierSeries::new(0.0, Vec::new()),
            knee: FourierSeries::new(0.0, Vec::new()),
            ankle: FourierSeries::new(0.0, Vec::new()),
        };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("joint") {
                continue;
            }
            let bad = |m: &str| Error::parse(path, format!("line {}: {m}", lineno + 1));
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(bad("expected 4 columns"));
            }
            let joint: Joint = cols[0].parse().map_err(|_| bad("unknown joint"))?;
            let h: usize = cols[1].parse().map_err(|_| bad("bad harmonic index"))?;
            let a: f64 = cols[2].parse().map_err(|_| bad("bad cosine amplitude"))?;
            let b: f64 = cols[3].parse().map_err(|_| bad("bad sine amplitude"))?;
            let s = match joint {
                Joint::Hip => &mut curves.hip,
                Joint::Knee => &mut curves.knee,
                Joint::Ankle => &mut curves.ankle,
            };
            if h == 0 {
                s.mean = a;
            } else {
                if s.harmonics.len() < h {
                    s.harmonics.resize(h, (0.0, 0.0));
                }
                s.harmonics[h - 1] = (a, b);
            }
        }
        Ok(curves)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Joint {
    Hip,
    Knee,
    Ankle,
}

impl Joint {
    pub const ALL: [Joint; 3] = [Joint::Hip, Joint::Knee, Joint::Ankle];

    pub fn name(self) -> &'static str {
        match self {
            Joint::Hip => "hip",
            Joint::Knee => "knee",
            Joint::Ankle => "ankle",
        }
    }

    pub fn bounds(self) -> (f64, f64) {
        match self {
            Joint::Hip => HIP_BOUNDS,
            Joint::Knee => KNEE_BOUNDS,
            Joint::Ankle => ANKLE_BOUNDS,
        }
    }
}

impl std::str::FromStr for Joint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hip" => Ok(Joint::Hip),
            "knee" => Ok(Joint::Knee),
            "ankle" => Ok(Joint::Ankle),
            other => Err(Error::Config(format!("unknown joint `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LegAngles {
    pub hip: f64,
    pub knee: f64,
    pub ankle: f64,
}

impl LegAngles {
    pub fn get(&self, joint: Joint) -> f64 {
        match joint {
            Joint::Hip => self.hip,
            Joint::Knee => self.knee,
            Joint::Ankle => self.ankle,
        }
    }

    pub fn clamped(self) -> Self {
        let c = |v: f64, (lo, hi): (f64, f64)| v.clamp(lo, hi);
        Self {
            hip: c(self.hip, HIP_BOUNDS),
            knee: c(self.knee, KNEE_BOUNDS),
            ankle: c(self.ankle, ANKLE_BOUNDS),
        }
    }

    pub fn within_bounds(&self) -> bool {
        Joint::ALL.iter().all(|&j| {
            let (lo, hi) = j.bounds();
            let v = self.get(j);
            v >= lo && v <= hi
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitParams {
    /// Preferred walking speed, m/s.
    pub v_pref: f64,
    /// Stride length at `v_pref`, m.
    pub stride_length: f64,
    /// Lateral pelvis sway amplitude, m (one period per stride).
    pub lateral_amplitude: f64,
    /// Vertical pelvis excursion amplitude, m (one period per step).
    pub vertical_amplitude: f64,
    /// Pelvis `[obliquity, tilt, rotation]` amplitudes, rad.
    pub rotation_amplitude: [f64; 3],
    pub thigh: f64,
    pub shank: f64,
    pub foot: f64,
    /// Height of the ankle joint above the sole, m.
    pub ankle_height: f64,
    /// Distance between hip joint centres, m.
    pub hip_width: f64,
    pub body_mass: f64,
    /// Joint-angle curves; loaded from `fourier_csv` when given in a scenario.
    pub curves: JointCurves,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            v_pref: 1.12,
            stride_length: 1.17,
            lateral_amplitude: 0.02,
            vertical_amplitude: 0.02,
            rotation_amplitude: [0.05, 0.03, 0.06],
            thigh: 0.45,
            shank: 0.45,
            foot: 0.26,
            ankle_height: 0.08,
            hip_width: 0.18,
            body_mass: 95.0,
            curves: JointCurves::default(),
        }
    }
}

impl GaitParams {
    /// Steps per minute implied by speed and stride.
    pub fn cadence(&self) -> f64 {
        120.0 * self.v_pref / self.stride_length
    }

    /// Strides per second.
    pub fn stride_frequency(&self) -> f64 {
        self.v_pref / self.stride_length
    }

    /// Pelvis height when standing upright.
    pub fn standing_height(&self) -> f64 {
        self.thigh + self.shank + self.ankle_height
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v_pref", self.v_pref),
            ("stride_length", self.stride_length),
            ("thigh", self.thigh),
            ("shank", self.shank),
            ("foot", self.foot),
            ("body_mass", self.body_mass),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("human.{name} must be > 0")));
            }
        }
        if self.lateral_amplitude < 0.0 || self.vertical_amplitude < 0.0 || self.ankle_height < 0.0
        {
            return Err(Error::Config("human amplitudes must be >= 0".into()));
        }
        Ok(())
    }
}

/// Reference posture at one phase of the cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefPose {
    /// `[forward, lateral, vertical]` pelvis offset from the cycle start and
    /// the mean walking height. Forward grows linearly to one stride.
    pub pelvis_offset: Vector3<f64>,
    pub pelvis_rpy: Vector3<f64>,
    pub left: LegAngles,
    pub right: LegAngles,
}

pub fn gait_reference(phase: f64, p: &GaitParams) -> Result<RefPose> {
    if !(0.0..1.0).contains(&phase) {
        return Err(Error::PhaseOutOfRange(phase));
    }
    Ok(reference_unchecked(phase, p))
}

pub(crate) fn pelvis_offset(phase: f64, p: &GaitParams) -> Vector3<f64> {
    let w = TAU * phase;
    Vector3::new(
        p.stride_length * phase,
        p.lateral_amplitude * (2.0 * w).sin(),
        -p.vertical_amplitude * (2.0 * w).cos(),
    )
}

pub(crate) fn pelvis_rpy(phase: f64, p: &GaitParams) -> Vector3<f64> {
    let w = TAU * phase;
    let [roll, pitch, yaw] = p.rotation_amplitude;
    Vector3::new(roll * w.sin(), pitch * (2.0 * w).cos(), yaw * w.cos())
}

pub(crate) fn reference_unchecked(phase: f64, p: &GaitParams) -> RefPose {
    RefPose {
        pelvis_offset: pelvis_offset(phase, p),
        pelvis_rpy: pelvis_rpy(phase, p),
        left: p.curves.eval(phase),
        right: p.curves.eval(contralateral(phase)),
    }
}

/// Phase of the opposite leg.
pub fn contralateral(phase: f64) -> f64 {
    let s = phase + 0.5;
    if s >= 1.0 {
        s - 1.0
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootPoints {
    pub knee: Vector3<f64>,
    pub ankle: Vector3<f64>,
    pub heel: Vector3<f64>,
    pub toe: Vector3<f64>,
}

/// Planar leg geometry in the sagittal plane of a hip joint. Returned points
/// are `(forward, down-negative vertical)` offsets from the hip joint.
pub fn sagittal_chain(angles: &LegAngles, p: &GaitParams) -> [(f64, f64); 4] {
    let hip = angles.hip.to_radians();
    let shank_angle = hip - angles.knee.to_radians();
    let foot_angle = shank_angle + angles.ankle.to_radians();
    let knee = (p.thigh * hip.sin(), -p.thigh * hip.cos());
    let ankle = (
        knee.0 + p.shank * shank_angle.sin(),
        knee.1 - p.shank * shank_angle.cos(),
    );
    let (dir_x, dir_z) = (foot_angle.cos(), foot_angle.sin());
    let (nx, nz) = (-dir_z, dir_x);
    let heel_back = 0.25 * p.foot;
    let sole = (ankle.0 - p.ankle_height * nx, ankle.1 - p.ankle_height * nz);
    let heel = (sole.0 - heel_back * dir_x, sole.1 - heel_back * dir_z);
    let toe = (
        sole.0 + (p.foot - heel_back) * dir_x,
        sole.1 + (p.foot - heel_back) * dir_z,
    );
    [knee, ankle, heel, toe]
}

/// World positions of knee, ankle, heel and toe for one leg. The sagittal
/// plane follows the pelvis heading.
pub fn leg_forward_kinematics(
    angles: &LegAngles,
    p: &GaitParams,
    pelvis_position: &Vector3<f64>,
    heading: f64,
    side: Side,
) -> FootPoints {
    let (c, s) = (heading.cos(), heading.sin());
    let half = match side {
        Side::Left => 0.5 * p.hip_width,
        Side::Right => -0.5 * p.hip_width,
    };
    let hip = pelvis_position + Vector3::new(-s * half, c * half, 0.0);
    let to_world = |(fwd, up): (f64, f64)| hip + Vector3::new(c * fwd, s * fwd, up);
    let [knee, ankle, heel, toe] = sagittal_chain(angles, p);
    FootPoints {
        knee: to_world(knee),
        ankle: to_world(ankle),
        heel: to_world(heel),
        toe: to_world(toe),
    }
}

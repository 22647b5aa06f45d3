//! Pelvis point-mass walker driven toward the generated gait, with explicit
//! strategies for adapting to sustained interaction forces.

use std::f64::consts::TAU;
use std::path::PathBuf;

use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::{self, contralateral, GaitParams, LegAngles};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdaptationKind {
    #[default]
    None,
    /// Slow down and shorten the stride under backward drag.
    Conservative,
    /// Hold speed and push harder against drag.
    Aggressive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptationPolicy {
    #[serde(rename = "adaptation")]
    pub kind: AdaptationKind,
    /// Speed-reduction gain, fraction of `v_pref` lost per `f_ref` of drag.
    pub c_v: f64,
    /// Reference force, N.
    pub f_ref: f64,
    /// Tracking-stiffness gain per `f_ref` of drag.
    pub c_p: f64,
    /// Joint distortion gain `[hip, knee, ankle]`, deg/N.
    pub distortion_gain: [f64; 3],
    /// Time constant of the interaction-force memory, s.
    pub tau_lp: f64,
}

impl Default for AdaptationPolicy {
    fn default() -> Self {
        Self {
            kind: AdaptationKind::None,
            c_v: 0.5,
            f_ref: 50.0,
            c_p: 1.0,
            distortion_gain: [0.05; 3],
            tau_lp: 0.5,
        }
    }
}

impl AdaptationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_v >= 0.0 && self.c_p >= 0.0 && self.f_ref > 0.0 && self.tau_lp > 0.0) {
            return Err(Error::Config(
                "adaptation gains must be >= 0 with f_ref > 0 and tau_lp > 0".into(),
            ));
        }
        Ok(())
    }

    /// Effective walking speed for a filtered forward force (negative = drag).
    pub fn effective_speed(&self, v_pref: f64, f_lp: f64) -> f64 {
        match self.kind {
            AdaptationKind::Conservative => {
                let drag = (-f_lp).max(0.0);
                v_pref * (1.0 - self.c_v * drag / self.f_ref).max(0.3)
            }
            AdaptationKind::None | AdaptationKind::Aggressive => v_pref,
        }
    }

    /// Multiplier on forward tracking stiffness.
    pub fn stiffness_scale(&self, f_lp: f64) -> f64 {
        match self.kind {
            AdaptationKind::Aggressive => 1.0 + self.c_p * f_lp.abs() / self.f_ref,
            AdaptationKind::None | AdaptationKind::Conservative => 1.0,
        }
    }
}

/// Human-side scenario section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HumanConfig {
    #[serde(flatten)]
    pub gait: GaitParams,
    #[serde(flatten)]
    pub policy: AdaptationPolicy,
    /// Pelvis tracking stiffness `[x, y, z]` N/m and `[roll, pitch, yaw]` N·m/rad.
    pub pd_stiffness: [f64; 6],
    /// Tracking damping; critical damping when omitted.
    pub pd_damping: Option<[f64; 6]>,
    /// Generalized rotational inertia of the pelvis-trunk, kg·m².
    pub inertia: [f64; 3],
    /// Linear speed ramp at gait start, s.
    pub ramp_time: f64,
    /// Per-cycle joint-angle noise, deg (1-σ).
    pub joint_noise: f64,
    /// Stationary 1-σ of the process driving the walking-direction wander, rad.
    pub heading_wander: f64,
    /// Time constant of each of the two wander filter stages, s.
    pub wander_time: f64,
    /// Optional CSV of Fourier coefficients replacing the default curves.
    pub fourier_csv: Option<PathBuf>,
    pub gait_drive: bool,
}

impl Default for HumanConfig {
    fn default() -> Self {
        Self {
            gait: GaitParams::default(),
            policy: AdaptationPolicy::default(),
            pd_stiffness: [3000.0, 3000.0, 20000.0, 400.0, 400.0, 400.0],
            pd_damping: None,
            inertia: [6.0, 6.0, 3.0],
            ramp_time: 1.0,
            joint_noise: 0.0,
            heading_wander: 0.05,
            wander_time: 3.0,
            fourier_csv: None,
            gait_drive: true,
        }
    }
}

impl HumanConfig {
    pub fn validate(&self) -> Result<()> {
        self.gait.validate()?;
        self.policy.validate()?;
        if self.pd_stiffness.iter().any(|k| !(*k >= 0.0)) {
            return Err(Error::Config("pd_stiffness must be >= 0".into()));
        }
        if let Some(d) = &self.pd_damping {
            if d.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Config("pd_damping must be >= 0".into()));
            }
        }
        if self.inertia.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("inertia must be > 0".into()));
        }
        if !(self.ramp_time >= 0.0 && self.joint_noise >= 0.0 && self.heading_wander >= 0.0) {
            return Err(Error::Config(
                "ramp_time, joint_noise and heading_wander must be >= 0".into(),
            ));
        }
        if !(self.wander_time > 0.0) {
            return Err(Error::Config("wander_time must be > 0".into()));
        }
        Ok(())
    }

    fn mass_for_axis(&self, axis: usize) -> f64 {
        if axis < 3 {
            self.gait.body_mass
        } else {
            self.inertia[axis - 3]
        }
    }

    /// PD gains for one axis given a stiffness multiplier.
    pub fn pd_gains(&self, axis: usize, scale: f64) -> (f64, f64) {
        let k = self.pd_stiffness[axis] * scale;
        let d = match &self.pd_damping {
            Some(d) => d[axis] * scale.sqrt(),
            None => 2.0 * (k * self.mass_for_axis(axis)).sqrt(),
        };
        (k, d)
    }
}

/// Reference pelvis pose in the world: position and `[roll, pitch, yaw]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldRef {
    pub position: Vector3<f64>,
    pub rpy: Vector3<f64>,
}

impl WorldRef {
    fn axis(&self, i: usize) -> f64 {
        if i < 3 {
            self.position[i]
        } else {
            self.rpy[i - 3]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// `[roll, pitch (trunk tilt), yaw]`.
    pub rpy: Vector3<f64>,
    pub rpy_rate: Vector3<f64>,
    pub phase: f64,
    /// Completed strides.
    pub cycles: u64,
    /// Reference distance walked along the path since the start, m.
    pub progress: f64,
    /// Reference path point, horizontal offset from `origin`.
    pub path: Vector2<f64>,
    /// Walking direction of the reference path, rad.
    pub path_heading: f64,
    /// Ornstein-Uhlenbeck process the path heading follows through a low-pass.
    pub wander_drive: f64,
    /// Walking line origin: start position at mean pelvis height.
    pub origin: Vector3<f64>,
    /// Currently adapted gait parameters.
    pub params: GaitParams,
    pub stiffness_scale: f64,
    /// Low-passed forward interaction force, N (negative = drag).
    pub f_lp: f64,
    pub ref_prev: WorldRef,
    pub ref_cur: WorldRef,
    pub left: LegAngles,
    pub right: LegAngles,
    /// Per-cycle joint offsets `[hip, knee, ankle]` for each leg.
    pub noise: [[f64; 3]; 2],
    /// Legs no longer bear weight.
    pub collapsed: bool,
}

pub(crate) fn world_ref(
    origin: &Vector3<f64>,
    path: &Vector2<f64>,
    heading: f64,
    phase: f64,
    p: &GaitParams,
) -> WorldRef {
    let off = gait::pelvis_offset(phase, p);
    let (c, s) = (heading.cos(), heading.sin());
    WorldRef {
        position: origin + Vector3::new(path[0] - s * off[1], path[1] + c * off[1], off[2]),
        rpy: gait::pelvis_rpy(phase, p) + Vector3::new(0.0, 0.0, heading),
    }
}

impl HumanState {
    /// Standing on the reference at `φ = 0`, at rest when a start ramp is
    /// used, otherwise already moving with the reference.
    pub fn initial(cfg: &HumanConfig, origin: Vector3<f64>, dt: f64) -> Self {
        let params = cfg.gait.clone();
        let cur = world_ref(&origin, &Vector2::zeros(), 0.0, 0.0, &params);
        let prev = if cfg.ramp_time > 0.0 || !cfg.gait_drive {
            cur
        } else {
            let rate = params.stride_frequency();
            let back = 1.0 - rate * dt;
            let path = Vector2::new(-params.stride_length * rate * dt, 0.0);
            world_ref(&origin, &path, 0.0, back, &params)
        };
        let ref_vel = (cur.position - prev.position) / dt;
        let ref_rate = (cur.rpy - prev.rpy) / dt;
        let left = params.curves.eval(0.0);
        let right = params.curves.eval(0.5);
        Self {
            position: cur.position,
            velocity: ref_vel,
            rpy: cur.rpy,
            rpy_rate: ref_rate,
            phase: 0.0,
            cycles: 0,
            progress: 0.0,
            path: Vector2::zeros(),
            path_heading: 0.0,
            wander_drive: 0.0,
            origin,
            params,
            stiffness_scale: 1.0,
            f_lp: 0.0,
            ref_prev: prev,
            ref_cur: cur,
            left,
            right,
            noise: [[0.0; 3]; 2],
            collapsed: false,
        }
    }

    pub fn kinetic_energy(&self, cfg: &HumanConfig) -> f64 {
        0.5 * cfg.gait.body_mass * self.velocity.norm_squared()
            + (0..3)
                .map(|i| 0.5 * cfg.inertia[i] * self.rpy_rate[i] * self.rpy_rate[i])
                .sum::<f64>()
    }

    /// Pelvis tracking error relative to the current reference.
    pub fn tracking_error(&self) -> Vector3<f64> {
        self.ref_cur.position - self.position
    }

    pub fn check_finite(&self, t: f64) -> Result<()> {
        let fields: [(&str, &[f64]); 5] = [
            ("human.position", self.position.as_slice()),
            ("human.velocity", self.velocity.as_slice()),
            ("human.rpy", self.rpy.as_slice()),
            ("human.rpy_rate", self.rpy_rate.as_slice()),
            ("human.f_lp", std::slice::from_ref(&self.f_lp)),
        ];
        for (name, vals) in fields {
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState {
                    field: name.into(),
                    t,
                });
            }
        }
        Ok(())
    }
}

/// First-order low-pass of the forward interaction force.
pub fn update_force_memory(f_lp: f64, force_x: f64, tau: f64, dt: f64) -> f64 {
    let alpha = 1.0 - (-dt / tau).exp();
    f_lp + alpha * (force_x - f_lp)
}

/// Gait parameters and forward stiffness multiplier adapted to the filtered
/// interaction force held in `state`.
pub fn adapt(
    state: &HumanState,
    baseline: &GaitParams,
    policy: &AdaptationPolicy,
) -> (GaitParams, f64) {
    let mut p = baseline.clone();
    let v_eff = policy.effective_speed(baseline.v_pref, state.f_lp);
    if v_eff != baseline.v_pref {
        p.stride_length = baseline.stride_length * (v_eff / baseline.v_pref).sqrt();
        p.v_pref = v_eff;
    }
    (p, policy.stiffness_scale(state.f_lp))
}

/// Loads from the coupling acting on the pelvis this step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PelvisLoads {
    pub force: Vector3<f64>,
    /// Generalized torque on `[roll, pitch, yaw]`.
    pub torque: Vector3<f64>,
}

fn distortion(gain: &[f64; 3], f_lp: f64, phase: f64) -> [f64; 3] {
    let s = (TAU * phase).sin();
    [gain[0] * f_lp * s, gain[1] * f_lp * s, gain[2] * f_lp * s]
}

fn leg_angles(
    p: &GaitParams,
    policy: &AdaptationPolicy,
    f_lp: f64,
    phase: f64,
    noise: &[f64; 3],
) -> LegAngles {
    let base = p.curves.eval(phase);
    let d = distortion(&policy.distortion_gain, f_lp, phase);
    LegAngles {
        hip: base.hip + d[0] + noise[0],
        knee: base.knee + d[1] + noise[1],
        ankle: base.ankle + d[2] + noise[2],
    }
    .clamped()
}

/// Walker model: configuration plus the step function.
#[derive(Debug, Clone)]
pub struct Walker {
    pub cfg: HumanConfig,
}

impl Walker {
    pub fn new(cfg: HumanConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    fn ramp(&self, t: f64) -> f64 {
        if self.cfg.ramp_time > 0.0 {
            (t / self.cfg.ramp_time).clamp(0.0, 1.0)
        } else {
            1.0
        }
    }

    /// Advances the pelvis by one semi-implicit Euler step.
    ///
    /// `t` is the time at the start of the step. Forces come from the state at
    /// `t`; velocities update first, then positions from the new velocities.
    /// The reference is fed forward with its discrete second difference so an
    /// unperturbed walker that starts on the reference stays on it.
    pub fn step<R: Rng>(
        &self,
        state: &HumanState,
        loads: &PelvisLoads,
        t: f64,
        dt: f64,
        rng: &mut R,
    ) -> Result<HumanState> {
        let cfg = &self.cfg;
        let m = cfg.gait.body_mass;
        let mut next = state.clone();

        // forward = along the walking direction
        let (c, s) = (state.path_heading.cos(), state.path_heading.sin());
        let forward = c * loads.force[0] + s * loads.force[1];
        next.f_lp = update_force_memory(state.f_lp, forward, cfg.policy.tau_lp, dt);
        let (params, scale) = adapt(&next, &cfg.gait, &cfg.policy);

        let driving = cfg.gait_drive && !state.collapsed;
        let mut generalized = [0.0; 6];
        if driving {
            let rate = self.ramp(t + dt) * params.stride_frequency();
            let mut phase = state.phase + rate * dt;
            if phase >= 1.0 {
                phase -= 1.0;
                next.cycles += 1;
                if cfg.joint_noise > 0.0 {
                    for leg in next.noise.iter_mut() {
                        for v in leg.iter_mut() {
                            *v = cfg.joint_noise * rng.sample::<f64, _>(StandardNormal);
                        }
                    }
                }
            }
            next.phase = phase;
            let ds = params.stride_length * rate * dt;
            next.progress = state.progress + ds;
            if cfg.heading_wander > 0.0 {
                let tau = cfg.wander_time;
                let xi: f64 = rng.sample(StandardNormal);
                next.wander_drive = state.wander_drive * (1.0 - dt / tau)
                    + cfg.heading_wander * (2.0 * dt / tau).sqrt() * xi;
                next.path_heading =
                    state.path_heading + (next.wander_drive - state.path_heading) * dt / tau;
            }
            let dir = Vector2::new(next.path_heading.cos(), next.path_heading.sin());
            next.path = state.path + ds * dir;
            let ref_next = world_ref(&state.origin, &next.path, next.path_heading, phase, &params);
            let (prev, cur) = (&state.ref_prev, &state.ref_cur);
            for i in 0..6 {
                let k_scale = if i == 0 { scale } else { 1.0 };
                let (k, d) = cfg.pd_gains(i, k_scale);
                let inertia = cfg.mass_for_axis(i);
                let accel_ff = (ref_next.axis(i) - 2.0 * cur.axis(i) + prev.axis(i)) / (dt * dt);
                let ref_vel = (cur.axis(i) - prev.axis(i)) / dt;
                let (pos, vel) = if i < 3 {
                    (state.position[i], state.velocity[i])
                } else {
                    (state.rpy[i - 3], state.rpy_rate[i - 3])
                };
                generalized[i] = inertia * accel_ff + k * (cur.axis(i) - pos) + d * (ref_vel - vel);
            }
            next.ref_prev = *cur;
            next.ref_cur = ref_next;
        } else {
            next.ref_prev = state.ref_cur;
        }

        // legs carry body weight unless collapsed
        let support = if state.collapsed { 0.0 } else { m * GRAVITY };
        generalized[2] += support - m * GRAVITY;

        for i in 0..3 {
            let f = generalized[i] + loads.force[i];
            next.velocity[i] = state.velocity[i] + f / m * dt;
            next.position[i] = state.position[i] + next.velocity[i] * dt;
            let tau = generalized[i + 3] + loads.torque[i];
            next.rpy_rate[i] = state.rpy_rate[i] + tau / cfg.inertia[i] * dt;
            next.rpy[i] = state.rpy[i] + next.rpy_rate[i] * dt;
        }

        next.params = params;
        next.stiffness_scale = scale;
        next.left = leg_angles(
            &next.params,
            &cfg.policy,
            next.f_lp,
            next.phase,
            &next.noise[0],
        );
        next.right = leg_angles(
            &next.params,
            &cfg.policy,
            next.f_lp,
            contralateral(next.phase),
            &next.noise[1],
        );
        next.check_finite(t + dt)?;
        Ok(next)
    }
}

//! Follow-me controllers: a PID benchmark and a speed-adaptive
//! feedforward-plus-proportional law with its walking-speed estimator.
//!
//! Axes are `x` (forward), `y` (lateral, left positive) and heading.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::coupling::CouplingState;
use crate::error::{Error, Result};
use crate::robot::VelocityCommand;

/// Tracking errors in the attachment frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackingError {
    pub ex: f64,
    pub ey: f64,
    pub etheta: f64,
}

impl TrackingError {
    fn axis(&self, i: usize) -> f64 {
        [self.ex, self.ey, self.etheta][i]
    }
}

/// The robot's job is to keep the interface at neutral, so the tracking
/// error is the coupling displacement itself.
pub fn tracking_error(state: &CouplingState) -> TrackingError {
    TrackingError {
        ex: state.q[0],
        ey: state.q[1],
        etheta: state.q[5],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidGains {
    /// `[x, y, heading]`, 1/s.
    pub kp: [f64; 3],
    /// 1/s².
    pub ki: [f64; 3],
    /// Dimensionless.
    pub kd: [f64; 3],
    /// Bound on the error integral, m·s (rad·s for heading).
    pub integral_clamp: [f64; 3],
    /// Output limits `[vx, vy, yaw_rate]`.
    pub output_limit: [f64; 3],
    /// Corner frequency of the derivative filter, Hz.
    pub derivative_cutoff: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: [2.0, 2.0, 2.0],
            ki: [0.5, 0.5, 0.5],
            kd: [0.1, 0.1, 0.1],
            integral_clamp: [1.0, 1.0, 1.0],
            output_limit: [1.8, 1.0, 1.0],
            derivative_cutoff: 10.0,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<()> {
        let gains_ok = self
            .kp
            .iter()
            .chain(&self.ki)
            .chain(&self.kd)
            .all(|g| *g >= 0.0);
        let clamp_ok = self.integral_clamp.iter().all(|c| *c > 0.0);
        let lim_ok = self.output_limit.iter().all(|l| *l > 0.0);
        if !(gains_ok && clamp_ok && lim_ok && self.derivative_cutoff > 0.0) {
            return Err(Error::Config(
                "pid gains must be >= 0, clamps/limits/cutoff > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
struct PidAxis {
    integral: f64,
    filtered: f64,
    primed: bool,
}

/// Three independent PID loops with conditional-integration anti-windup and
/// derivative on the low-pass-filtered error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pid {
    pub gains: PidGains,
    axes: [PidAxis; 3],
}

impl Pid {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            axes: Default::default(),
        }
    }

    pub fn integral(&self, axis: usize) -> f64 {
        self.axes[axis].integral
    }

    pub fn reset(&mut self) {
        self.axes = Default::default();
    }

    /// One controller tick with period `dt`.
    pub fn step(&mut self, err: &TrackingError, dt: f64) -> VelocityCommand {
        let g = &self.gains;
        let alpha = 1.0 - (-std::f64::consts::TAU * g.derivative_cutoff * dt).exp();
        let mut out = [0.0; 3];
        for (i, ax) in self.axes.iter_mut().enumerate() {
            let e = err.axis(i);
            let prev = ax.filtered;
            ax.filtered = if ax.primed {
                prev + alpha * (e - prev)
            } else {
                e
            };
            let deriv = if ax.primed {
                (ax.filtered - prev) / dt
            } else {
                0.0
            };
            ax.primed = true;

            let lim = g.output_limit[i];
            let pd = g.kp[i] * e + g.kd[i] * deriv;
            let candidate = (ax.integral + e * dt).clamp(-g.integral_clamp[i], g.integral_clamp[i]);
            let unsat = pd + g.ki[i] * candidate;
            // integrate only while it does not push further into saturation
            let winding = unsat.abs() > lim && unsat.signum() == e.signum();
            if !winding {
                ax.integral = candidate;
            }
            out[i] = (pd + g.ki[i] * ax.integral).clamp(-lim, lim);
        }
        VelocityCommand {
            vx: out[0],
            vy: out[1],
            yaw_rate: out[2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveGains {
    /// `[x, y, heading]`, 1/s.
    pub kp: [f64; 3],
    /// Speed-estimator time constant, s.
    pub tau_v: f64,
    pub output_limit: [f64; 3],
}

impl Default for AdaptiveGains {
    fn default() -> Self {
        Self {
            kp: [2.0, 2.0, 2.0],
            tau_v: 0.3,
            output_limit: [1.8, 1.0, 1.0],
        }
    }
}

impl AdaptiveGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp.iter().all(|k| *k >= 0.0)
            && self.tau_v > 0.0
            && self.output_limit.iter().all(|l| *l > 0.0))
        {
            return Err(Error::Config(
                "adaptive gains: kp >= 0, tau_v > 0, limits > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Filtered finite-difference estimate of the pelvis planar velocity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpeedEstimator {
    pub tau: f64,
    last: Option<Vector2<f64>>,
    estimate: Option<Vector2<f64>>,
}

impl SpeedEstimator {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            last: None,
            estimate: None,
        }
    }

    /// Adds a position sample taken `dt` after the previous one.
    pub fn push(&mut self, position: Vector2<f64>, dt: f64) {
        if let Some(last) = self.last {
            let raw = (position - last) / dt;
            self.estimate = Some(match self.estimate {
                None => raw,
                Some(prev) => prev + (1.0 - (-dt / self.tau).exp()) * (raw - prev),
            });
        }
        self.last = Some(position);
    }

    pub fn estimate(&self) -> Result<Vector2<f64>> {
        self.estimate.ok_or(Error::InsufficientHistory)
    }
}

/// Speed estimate from a uniformly sampled position history.
pub fn speed_estimate(history: &[Vector2<f64>], dt: f64, tau_v: f64) -> Result<Vector2<f64>> {
    if history.len() < 2 {
        return Err(Error::InsufficientHistory);
    }
    let mut est = SpeedEstimator::new(tau_v);
    for p in history {
        est.push(*p, dt);
    }
    est.estimate()
}

/// Velocity feedforward plus proportional centering. `v_hat` is expressed in
/// the base frame.
pub fn adaptive_step(
    err: &TrackingError,
    v_hat: Vector2<f64>,
    g: &AdaptiveGains,
) -> VelocityCommand {
    let lim = g.output_limit;
    VelocityCommand {
        vx: (v_hat[0] + g.kp[0] * err.ex).clamp(-lim[0], lim[0]),
        vy: (v_hat[1] + g.kp[1] * err.ey).clamp(-lim[1], lim[1]),
        yaw_rate: (g.kp[2] * err.etheta).clamp(-lim[2], lim[2]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    #[default]
    Pid,
    Adaptive,
    /// Base holds still.
    None,
}

/// `[controller]` scenario section.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    #[serde(rename = "type")]
    pub kind: ControllerKind,
    pub pid: PidGains,
    pub adaptive: AdaptiveGains,
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        self.pid.validate()?;
        self.adaptive.validate()
    }
}

/// Stateful controller driven at the controller rate.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    Pid(Pid),
    Adaptive {
        gains: AdaptiveGains,
        estimator: SpeedEstimator,
    },
    Idle,
}

impl Controller {
    pub fn from_config(cfg: &ControllerConfig) -> Self {
        match cfg.kind {
            ControllerKind::Pid => Controller::Pid(Pid::new(cfg.pid.clone())),
            ControllerKind::Adaptive => Controller::Adaptive {
                gains: cfg.adaptive.clone(),
                estimator: SpeedEstimator::new(cfg.adaptive.tau_v),
            },
            ControllerKind::None => Controller::Idle,
        }
    }

    /// One tick. `pelvis_xy` is the world pelvis position and `heading` the
    /// base heading used to express the speed estimate in the base frame.
    pub fn tick(
        &mut self,
        err: &TrackingError,
        pelvis_xy: Vector2<f64>,
        heading: f64,
        dt: f64,
    ) -> VelocityCommand {
        match self {
            Controller::Pid(pid) => pid.step(err, dt),
            Controller::Adaptive { gains, estimator } => {
                estimator.push(pelvis_xy, dt);
                let v_world = estimator.estimate().unwrap_or_else(|_| Vector2::zeros());
                let v_base = nalgebra::Rotation2::new(-heading) * v_world;
                adaptive_step(err, v_base, gains)
            }
            Controller::Idle => VelocityCommand::default(),
        }
    }
}

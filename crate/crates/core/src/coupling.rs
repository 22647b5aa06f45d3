//! Six-DoF spring-damper interface between the human pelvis and the robot
//! attachment frame.
//!
//! Coordinates `q = [q_tx, q_ty, q_tz, q_rx, q_ry, q_rz]` are three prismatic
//! displacements (m) followed by three revolute displacements (rad), all
//! expressed in the attachment frame. Inside the joint limits the wrench on the
//! pelvis is the linear law `-(k∘q + d∘q̇)`; past a limit a unilateral penalty
//! pushes the coordinate back inside.

use nalgebra::{Matrix3, Rotation3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec6 = Vector6<f64>;

/// Above this pitch the intrinsic XYZ decomposition loses precision.
pub const GIMBAL_WARN_RAD: f64 = 1.4;

/// Width of the band (fraction of the limit span) over which limit damping fades in.
const LIMIT_DAMPING_RAMP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingParams {
    /// `[k_tx, k_ty, k_tz]` in N/m, `[k_rx, k_ry, k_rz]` in N·m/rad.
    pub stiffness: [f64; 6],
    /// `[d_tx, d_ty, d_tz]` in N·s/m, `[d_rx, d_ry, d_rz]` in N·m·s/rad.
    pub damping: [f64; 6],
    pub q_min: [f64; 6],
    pub q_max: [f64; 6],
    /// Limit-layer stiffness as a multiple of the axis stiffness.
    pub limit_stiffness_factor: f64,
    /// Limit-layer damping as a multiple of the axis damping.
    pub limit_damping_factor: f64,
}

impl Default for CouplingParams {
    fn default() -> Self {
        Self {
            stiffness: [800.0, 800.0, 2000.0, 50.0, 50.0, 30.0],
            damping: [60.0, 60.0, 120.0, 5.0, 5.0, 3.0],
            q_min: [-0.05, -0.05, -0.05, -0.15, -0.15, -0.15],
            q_max: [0.05, 0.05, 0.05, 0.15, 0.15, 0.15],
            limit_stiffness_factor: 2000.0,
            limit_damping_factor: 200.0,
        }
    }
}

impl CouplingParams {
    pub fn validate(&self) -> Result<()> {
        for i in 0..6 {
            let (k, d, lo, hi) = (
                self.stiffness[i],
                self.damping[i],
                self.q_min[i],
                self.q_max[i],
            );
            if !(k.is_finite() && k >= 0.0) || !(d.is_finite() && d >= 0.0) {
                return Err(Error::Config(format!(
                    "coupling axis {i}: stiffness and damping must be finite and >= 0"
                )));
            }
            if !(lo < 0.0 && hi > 0.0 && lo.is_finite() && hi.is_finite()) {
                return Err(Error::Config(format!(
                    "coupling axis {i}: limits must satisfy q_min < 0 < q_max"
                )));
            }
        }
        if !(self.limit_stiffness_factor >= 0.0 && self.limit_damping_factor >= 0.0) {
            return Err(Error::Config("limit factors must be >= 0".into()));
        }
        Ok(())
    }

    pub fn limit_stiffness(&self, axis: usize) -> f64 {
        self.limit_stiffness_factor * self.stiffness[axis]
    }

    pub fn limit_damping(&self, axis: usize) -> f64 {
        self.limit_damping_factor * self.damping[axis]
    }

    pub fn span(&self, axis: usize) -> f64 {
        self.q_max[axis] - self.q_min[axis]
    }

    /// Parameters with stiffness and damping scaled, as used while the arm is
    /// locked. The limit layer keeps its absolute stiffness and damping.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut p = self.clone();
        for i in 0..6 {
            p.stiffness[i] *= factor;
            p.damping[i] *= factor;
        }
        if factor > 0.0 {
            p.limit_stiffness_factor /= factor;
            p.limit_damping_factor /= factor;
        }
        p
    }

    /// Signed distance past the nearest limit (zero inside).
    pub fn overrun(&self, axis: usize, q: f64) -> f64 {
        if q > self.q_max[axis] {
            q - self.q_max[axis]
        } else if q < self.q_min[axis] {
            q - self.q_min[axis]
        } else {
            0.0
        }
    }

    /// Stored elastic energy, including the limit layer.
    pub fn potential_energy(&self, q: &Vec6) -> f64 {
        (0..6)
            .map(|i| {
                let o = self.overrun(i, q[i]);
                0.5 * self.stiffness[i] * q[i] * q[i] + 0.5 * self.limit_stiffness(i) * o * o
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CouplingState {
    pub q: Vec6,
    pub qdot: Vec6,
}

/// Wrench `[F_x, F_y, F_z, τ_x, τ_y, τ_z]` acting on the human pelvis, in the
/// attachment frame. The robot attachment receives the negation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InteractionWrench(pub Vec6);

impl InteractionWrench {
    pub fn zero() -> Self {
        Self(Vec6::zeros())
    }

    pub fn on_human(&self) -> Vec6 {
        self.0
    }

    pub fn on_robot(&self) -> Vec6 {
        -self.0
    }

    pub fn force(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn torque(&self) -> Vector3<f64> {
        Vector3::new(self.0[3], self.0[4], self.0[5])
    }
}

/// Interaction wrench on the human for the given displacement state.
pub fn coupling_wrench(state: &CouplingState, p: &CouplingParams) -> InteractionWrench {
    let mut f = Vec6::zeros();
    for i in 0..6 {
        let q = state.q[i];
        let qd = state.qdot[i];
        let mut gen = p.stiffness[i] * q + p.damping[i] * qd;
        let o = p.overrun(i, q);
        if o != 0.0 {
            gen += p.limit_stiffness(i) * o;
            if o * qd > 0.0 {
                let ramp = (o.abs() / (LIMIT_DAMPING_RAMP * p.span(i))).min(1.0);
                gen += p.limit_damping(i) * qd * ramp;
            }
        }
        f[i] = -gen;
    }
    InteractionWrench(f)
}

/// Pose of a rigid frame. Orientation is `Rz(yaw)·Ry(pitch)·Rx(roll)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vector3<f64>,
    /// `[roll, pitch, yaw]` in rad.
    pub rpy: Vector3<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, rpy: Vector3<f64>) -> Self {
        Self { position, rpy }
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.rpy[0], self.rpy[1], self.rpy[2])
    }
}

/// Intrinsic X-Y-Z Euler angles `(a, b, c)` with `R = Rx(a)·Ry(b)·Rz(c)`.
pub fn intrinsic_xyz(r: &Rotation3<f64>) -> Vector3<f64> {
    let m = r.matrix();
    let b = m[(0, 2)].clamp(-1.0, 1.0).asin();
    let a = (-m[(1, 2)]).atan2(m[(2, 2)]);
    let c = (-m[(0, 1)]).atan2(m[(0, 0)]);
    Vector3::new(a, b, c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    /// Coupling coordinates (velocities not included).
    pub q: Vec6,
    /// Set when `|q_ry|` is close enough to ±π/2 that the rotational coordinates degrade.
    pub gimbal_warning: bool,
}

/// Displacement of the pelvis frame relative to the attachment frame.
pub fn relative_pose(pelvis: &Pose, attachment: &Pose) -> RelativePose {
    let ra = attachment.rotation();
    let qt = ra.inverse() * (pelvis.position - attachment.position);
    let qr = intrinsic_xyz(&(ra.inverse() * pelvis.rotation()));
    let gimbal_warning = qr[1].abs() > GIMBAL_WARN_RAD;
    if gimbal_warning {
        log::warn!("relative pitch {:.3} rad near gimbal singularity", qr[1]);
    }
    RelativePose {
        q: Vec6::new(qt[0], qt[1], qt[2], qr[0], qr[1], qr[2]),
        gimbal_warning,
    }
}

/// Pelvis kinematic state used to build the coupling coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PelvisKinematics {
    pub pose: Pose,
    /// World-frame linear velocity.
    pub velocity: Vector3<f64>,
    /// Time derivative of `[roll, pitch, yaw]`.
    pub rpy_rate: Vector3<f64>,
}

/// Kinematic state of a planar attachment frame (yaw-only orientation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttachmentKinematics {
    pub position: Vector3<f64>,
    pub yaw: f64,
    /// World-frame linear velocity of the attachment point.
    pub velocity: Vector3<f64>,
    pub yaw_rate: f64,
    /// Attachment point relative to the base centre, in the base frame.
    pub lever: Vector3<f64>,
}

impl AttachmentKinematics {
    pub fn pose(&self) -> Pose {
        Pose::new(self.position, Vector3::new(0.0, 0.0, self.yaw))
    }
}

/// Coupling coordinates, their rates, and the rotational Jacobian
/// `∂q_r/∂[roll, pitch, yaw]` of the pelvis. Because the attachment only yaws,
/// `∂q_r/∂ψ_robot` is the negated last column of that Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CouplingKinematics {
    pub state: CouplingState,
    pub rot_jacobian: Matrix3<f64>,
}

fn relative_rotation(rpy: &Vector3<f64>, yaw: f64) -> Vector3<f64> {
    let rel = Rotation3::from_euler_angles(rpy[0], rpy[1], rpy[2] - yaw);
    intrinsic_xyz(&rel)
}

pub fn coupling_kinematics(
    pelvis: &PelvisKinematics,
    att: &AttachmentKinematics,
) -> CouplingKinematics {
    let rel = relative_pose(&pelvis.pose, &att.pose());
    let ra_t = Rotation3::from_axis_angle(&Vector3::z_axis(), -att.yaw);
    let qt = Vector3::new(rel.q[0], rel.q[1], rel.q[2]);
    let omega = Vector3::new(0.0, 0.0, att.yaw_rate);
    // d/dt [R^T (p_h - p_a)], with the attachment point riding on the rotating base.
    let qt_dot = ra_t * (pelvis.velocity - att.velocity) - omega.cross(&qt);

    let h = 1e-6;
    let mut jac = Matrix3::zeros();
    for c in 0..3 {
        let mut plus = pelvis.pose.rpy;
        let mut minus = pelvis.pose.rpy;
        plus[c] += h;
        minus[c] -= h;
        let col =
            (relative_rotation(&plus, att.yaw) - relative_rotation(&minus, att.yaw)) / (2.0 * h);
        jac.set_column(c, &col);
    }
    let qr_dot = jac * (pelvis.rpy_rate - Vector3::new(0.0, 0.0, att.yaw_rate));

    CouplingKinematics {
        state: CouplingState {
            q: rel.q,
            qdot: Vec6::new(
                qt_dot[0], qt_dot[1], qt_dot[2], qr_dot[0], qr_dot[1], qr_dot[2],
            ),
        },
        rot_jacobian: jac,
    }
}

/// Generalized loads produced by one interaction wrench.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppliedLoads {
    /// World-frame force on the pelvis.
    pub human_force: Vector3<f64>,
    /// Generalized torque on the pelvis `[roll, pitch, yaw]` coordinates.
    pub human_torque: Vector3<f64>,
    /// World-frame planar force on the robot base.
    pub robot_force: Vector3<f64>,
    /// Yaw torque on the robot base about its centre.
    pub robot_yaw_torque: f64,
}

/// Maps the attachment-frame wrench onto both bodies. The robot side receives
/// the negated wrench; its yaw moment uses the lever from the base centre to
/// the pelvis so the mapping is power-consistent with [`coupling_kinematics`].
pub fn apply_wrench(
    wrench: &InteractionWrench,
    kin: &CouplingKinematics,
    att: &AttachmentKinematics,
) -> AppliedLoads {
    let ra = Rotation3::from_axis_angle(&Vector3::z_axis(), att.yaw);
    let f_h = wrench.force();
    let tau_h = wrench.torque();
    let f_r = -f_h;
    let tau_r = -tau_h;
    let q = kin.state.q;
    let lever = Vector3::new(att.lever[0] + q[0], att.lever[1] + q[1], 0.0);
    let lever_moment = lever[0] * f_r[1] - lever[1] * f_r[0];
    let rot_yaw = kin.rot_jacobian.column(2).dot(&tau_r);
    AppliedLoads {
        human_force: ra * f_h,
        human_torque: kin.rot_jacobian.transpose() * tau_h,
        robot_force: ra * Vector3::new(f_r[0], f_r[1], 0.0),
        robot_yaw_torque: lever_moment + rot_yaw,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn state(q: [f64; 6], qd: [f64; 6]) -> CouplingState {
        CouplingState {
            q: Vec6::from_row_slice(&q),
            qdot: Vec6::from_row_slice(&qd),
        }
    }

    #[test]
    fn neutral_pose_has_zero_wrench() {
        let w = coupling_wrench(&CouplingState::default(), &CouplingParams::default());
        assert_eq!(w.0, Vec6::zeros());
    }

    #[test]
    fn linear_law_on_forward_axis() {
        let p = CouplingParams::default();
        let w = coupling_wrench(
            &state([0.02, 0., 0., 0., 0., 0.], [0.1, 0., 0., 0., 0., 0.]),
            &p,
        );
        assert!((w.0[0].abs() - 22.0).abs() < 1e-12);
        assert!(w.0[0] < 0.0);
    }

    #[test]
    fn limit_layer_adds_force_past_bound() {
        let p = CouplingParams::default();
        let at_limit = coupling_wrench(
            &state([0.05, 0., 0., 0., 0., 0.], [0.1, 0., 0., 0., 0., 0.]),
            &p,
        );
        let past = coupling_wrench(
            &state([0.051, 0., 0., 0., 0., 0.], [0.1, 0., 0., 0., 0., 0.]),
            &p,
        );
        let linear_at_bound = 800.0 * 0.05 + 60.0 * 0.1;
        assert!((at_limit.0[0].abs() - linear_at_bound).abs() < 1e-9);
        assert!(past.0[0].abs() > linear_at_bound);
    }

    #[test]
    fn limit_layer_is_continuous_at_boundary() {
        let p = CouplingParams::default();
        let eps = 1e-14;
        let a = coupling_wrench(
            &state([0.05 - eps, 0., 0., 0., 0., 0.], [0.3, 0., 0., 0., 0., 0.]),
            &p,
        );
        let b = coupling_wrench(
            &state([0.05 + eps, 0., 0., 0., 0., 0.], [0.3, 0., 0., 0., 0., 0.]),
            &p,
        );
        assert!((a.0[0] - b.0[0]).abs() < 1e-3);
    }

    #[test]
    fn scaled_identity_factor_is_noop() {
        let p = CouplingParams::default();
        assert_eq!(p.scaled(1.0), p);
    }

    #[test]
    fn scaling_keeps_limit_layer() {
        let p = CouplingParams::default();
        let locked = p.scaled(50.0);
        assert_eq!(locked.stiffness[0], 50.0 * p.stiffness[0]);
        for i in 0..6 {
            assert!(
                (locked.limit_stiffness(i) - p.limit_stiffness(i)).abs()
                    < 1e-6 * p.limit_stiffness(i)
            );
            assert!(
                (locked.limit_damping(i) - p.limit_damping(i)).abs() < 1e-6 * p.limit_damping(i)
            );
        }
    }

    #[test]
    fn coincident_frames_give_zero_q() {
        let pose = Pose::new(Vector3::new(1.0, 2.0, 0.9), Vector3::new(0.0, 0.0, 0.4));
        let rel = relative_pose(&pose, &pose);
        assert!(rel.q.norm() < 1e-15);
    }

    #[test]
    fn translation_along_heading() {
        let yaw = 0.7;
        let att = Pose::new(Vector3::new(1.0, -1.0, 0.95), Vector3::new(0.0, 0.0, yaw));
        let pel = Pose::new(
            att.position + Vector3::new(yaw.cos(), yaw.sin(), 0.0) * 0.03,
            att.rpy,
        );
        let q = relative_pose(&pel, &att).q;
        assert!((q[0] - 0.03).abs() < 1e-15);
        for i in 1..6 {
            assert!(q[i].abs() < 1e-15, "axis {i}: {}", q[i]);
        }
    }

    #[test]
    fn relative_yaw_recovered() {
        let att = Pose::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 0.3));
        let pel = Pose::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 0.4));
        let q = relative_pose(&pel, &att).q;
        assert!((q[5] - 0.1).abs() < 1e-9);
        assert!(q[3].abs() < 1e-12 && q[4].abs() < 1e-12);
    }

    #[test]
    fn intrinsic_xyz_round_trip() {
        let (a, b, c) = (0.2, -0.3, 0.5);
        let r = Rotation3::from_axis_angle(&Vector3::x_axis(), a)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), b)
            * Rotation3::from_axis_angle(&Vector3::z_axis(), c);
        let e = intrinsic_xyz(&r);
        assert!((e - Vector3::new(a, b, c)).norm() < 1e-12);
    }

    #[test]
    fn gimbal_warning_near_singularity() {
        let att = Pose::default();
        let pel = Pose::new(Vector3::zeros(), Vector3::new(0.0, FRAC_PI_2 - 0.05, 0.0));
        assert!(relative_pose(&pel, &att).gimbal_warning);
        assert!(!relative_pose(&Pose::default(), &att).gimbal_warning);
    }

    #[test]
    fn coupling_rate_matches_finite_difference() {
        let pel = PelvisKinematics {
            pose: Pose::new(
                Vector3::new(0.52, 0.01, 0.97),
                Vector3::new(0.04, -0.02, 0.1),
            ),
            velocity: Vector3::new(1.1, 0.05, -0.02),
            rpy_rate: Vector3::new(0.2, -0.1, 0.3),
        };
        let att = AttachmentKinematics {
            position: Vector3::new(0.5, 0.0, 0.95),
            yaw: 0.05,
            velocity: Vector3::new(1.0, 0.02, 0.0),
            yaw_rate: 0.1,
            lever: Vector3::new(0.35, 0.0, 0.0),
        };
        let kin = coupling_kinematics(&pel, &att);
        let h = 1e-6;
        let advance = |s: f64| {
            let p = Pose::new(
                pel.pose.position + pel.velocity * s,
                pel.pose.rpy + pel.rpy_rate * s,
            );
            let a = Pose::new(
                att.position + att.velocity * s,
                Vector3::new(0.0, 0.0, att.yaw + att.yaw_rate * s),
            );
            relative_pose(&p, &a).q
        };
        let fd = (advance(h) - advance(-h)) / (2.0 * h);
        assert!(
            (fd - kin.state.qdot).norm() < 1e-6,
            "{fd} vs {}",
            kin.state.qdot
        );
    }

    #[test]
    fn invalid_limits_rejected() {
        let mut p = CouplingParams::default();
        p.q_min[2] = 0.01;
        assert!(p.validate().is_err());
        let mut p = CouplingParams::default();
        p.damping[0] = -1.0;
        assert!(p.validate().is_err());
    }
}

//! World state, the fixed-step loop and trial recording.

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::control::{tracking_error, Controller};
use crate::coupling::{
    apply_wrench, coupling_kinematics, coupling_wrench, CouplingKinematics, CouplingParams,
    CouplingState, InteractionWrench, PelvisKinematics, Pose, GIMBAL_WARN_RAD,
};
use crate::error::{Error, Result};
use crate::gait::{leg_forward_kinematics, Side};
use crate::human::{HumanState, PelvisLoads, Walker};
use crate::record::{RecordMeta, Sample, TrialRecord};
use crate::robot::{BaseLoad, FallDetector, RobotState, VelocityCommand};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub t: f64,
    pub steps: u64,
    pub human: HumanState,
    pub robot: RobotState,
    pub coupling: CouplingState,
    /// Wrench the coupling exerts on the pelvis in the current state.
    pub wrench: InteractionWrench,
    /// Command held since the last controller tick.
    pub command: VelocityCommand,
    pub lock_engaged: bool,
}

/// One trial in progress: world state plus the stateful pieces around it.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub scenario: ScenarioConfig,
    walker: Walker,
    world: WorldState,
    kin: CouplingKinematics,
    controller: Controller,
    detector: FallDetector,
    rng: ChaCha8Rng,
    gimbal_warned: bool,
}

impl Simulation {
    /// Places the walker at the origin on its reference and, when present,
    /// the robot with its attachment point at the pelvis.
    pub fn new(scenario: ScenarioConfig) -> Result<Self> {
        scenario.validate()?;
        let dt = scenario.trial.dt_physics;
        let standing = scenario.human.gait.standing_height();
        let human = HumanState::initial(&scenario.human, Vector3::new(0.0, 0.0, standing), dt);
        let target = Vector3::new(human.position[0], human.position[1], 0.0);
        let robot = RobotState::aligned_to(&target, 0.0, &scenario.robot);
        let walker = Walker::new(scenario.human.clone())?;
        let controller = Controller::from_config(&scenario.controller);
        let rng = ChaCha8Rng::seed_from_u64(scenario.trial.seed);
        let mut sim = Self {
            walker,
            world: WorldState {
                t: 0.0,
                steps: 0,
                human,
                robot,
                coupling: CouplingState::default(),
                wrench: InteractionWrench::zero(),
                command: VelocityCommand::default(),
                lock_engaged: false,
            },
            kin: CouplingKinematics::default(),
            controller,
            detector: FallDetector::default(),
            rng,
            gimbal_warned: false,
            scenario,
        };
        sim.refresh_coupling();
        Ok(sim)
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    /// Replaces the world state, e.g. to start from custom initial conditions.
    pub fn set_world(&mut self, world: WorldState) {
        self.world = world;
        self.refresh_coupling();
    }

    pub fn robot_present(&self) -> bool {
        self.scenario.robot.present
    }

    /// Coupling parameters in force, stiffened while the lock is engaged.
    pub fn effective_coupling(&self) -> CouplingParams {
        if self.world.lock_engaged {
            self.scenario
                .coupling
                .scaled(self.scenario.robot.lock_factor)
        } else {
            self.scenario.coupling.clone()
        }
    }

    /// Fall intervention: stiffens the interface and brakes the base. Latched.
    pub fn intervene(&mut self) {
        if !self.world.lock_engaged {
            log::info!("fall intervention engaged at t = {:.3} s", self.world.t);
        }
        self.world.lock_engaged = true;
        self.world.command = VelocityCommand::default();
        self.refresh_coupling();
    }

    fn refresh_coupling(&mut self) {
        if !self.robot_present() {
            self.kin = CouplingKinematics::default();
            self.world.coupling = CouplingState::default();
            self.world.wrench = InteractionWrench::zero();
            return;
        }
        let h = &self.world.human;
        let pelvis = PelvisKinematics {
            pose: Pose::new(h.position, h.rpy),
            velocity: h.velocity,
            rpy_rate: h.rpy_rate,
        };
        let att = self.world.robot.attachment(&self.scenario.robot);
        self.kin = coupling_kinematics(&pelvis, &att);
        self.world.coupling = self.kin.state;
        self.world.wrench = coupling_wrench(&self.kin.state, &self.effective_coupling());
        if !self.gimbal_warned && self.kin.state.q[4].abs() > GIMBAL_WARN_RAD {
            log::warn!(
                "relative pitch near gimbal lock at t = {:.3} s",
                self.world.t
            );
            self.gimbal_warned = true;
        }
    }

    /// Kinetic energy of both bodies plus the coupling potential.
    pub fn mechanical_energy(&self) -> f64 {
        let w = &self.world;
        let mut e = w.human.kinetic_energy(&self.scenario.human);
        if self.robot_present() {
            e += w.robot.kinetic_energy(&self.scenario.robot);
            e += self.effective_coupling().potential_energy(&w.coupling.q);
        }
        e
    }

    /// Advances the world by one physics step.
    pub fn step(&mut self) -> Result<()> {
        let trial = &self.scenario.trial;
        let dt = trial.dt_physics;
        let n = self.world.steps;
        let present = self.robot_present();

        if present && !self.world.lock_engaged && n.is_multiple_of(trial.control_every()) {
            let err = tracking_error(&self.world.coupling);
            let h = &self.world.human;
            self.world.command = self.controller.tick(
                &err,
                Vector2::new(h.position[0], h.position[1]),
                self.world.robot.heading,
                dt * trial.control_every() as f64,
            );
        }

        let (human_loads, base_load) = if present {
            let att = self.world.robot.attachment(&self.scenario.robot);
            let loads = apply_wrench(&self.world.wrench, &self.kin, &att);
            (
                PelvisLoads {
                    force: loads.human_force,
                    torque: loads.human_torque,
                },
                BaseLoad {
                    force: Vector2::new(loads.robot_force[0], loads.robot_force[1]),
                    torque: loads.robot_yaw_torque,
                },
            )
        } else {
            (PelvisLoads::default(), BaseLoad::default())
        };

        let t = self.world.t;
        let t_next = (n + 1) as f64 * dt;
        let mut human = self
            .walker
            .step(&self.world.human, &human_loads, t, dt, &mut self.rng)?;
        if let Some(tc) = trial.collapse_at {
            if t_next >= tc {
                human.collapsed = true;
            }
        }
        let robot = if present {
            let r = crate::robot::base_step(
                &self.world.robot,
                &self.world.command,
                &base_load,
                &self.scenario.robot,
                self.world.lock_engaged,
                dt,
            )?;
            r.check_finite(t_next)?;
            r
        } else {
            self.world.robot
        };

        let fell = present
            && self.detector.update(
                &human,
                self.scenario.human.gait.standing_height(),
                &self.scenario.robot.fall,
                dt,
            );

        self.world.human = human;
        self.world.robot = robot;
        self.world.steps = n + 1;
        self.world.t = t_next;
        if fell && !self.world.lock_engaged {
            self.intervene();
        } else {
            self.refresh_coupling();
        }
        check_wrench(&self.world.wrench, t_next)
    }

    /// The current state as a recorded sample.
    pub fn sample(&self) -> Sample {
        let w = &self.world;
        let h = &w.human;
        let p = &self.scenario.human.gait;
        let heading = h.rpy[2];
        let heel = |angles, side| {
            let pts = leg_forward_kinematics(angles, p, &h.position, heading, side);
            pts.heel.into()
        };
        let r = &w.robot;
        Sample {
            t: w.t,
            pelvis: [
                h.position[0],
                h.position[1],
                h.position[2],
                h.rpy[0],
                h.rpy[1],
                h.rpy[2],
            ],
            left: h.left,
            right: h.right,
            heel_left: heel(&h.left, Side::Left),
            heel_right: heel(&h.right, Side::Right),
            base: [r.x, r.y, r.heading, r.vx, r.vy, r.yaw_rate],
            q: w.coupling.q.into(),
            wrench: w.wrench.0.into(),
            command: [w.command.vx, w.command.vy, w.command.yaw_rate],
            phase: h.phase,
            lock: w.lock_engaged,
        }
    }

    /// Horizontal pelvis distance from the start position.
    pub fn progress(&self) -> f64 {
        let d = self.world.human.position - self.world.human.origin;
        d[0].hypot(d[1])
    }
}

fn check_wrench(w: &InteractionWrench, t: f64) -> Result<()> {
    if w.0.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState {
            field: "coupling.wrench".into(),
            t,
        })
    }
}

/// Runs one trial to its termination condition and records it.
pub fn run_trial(scenario: &ScenarioConfig) -> Result<TrialRecord> {
    run_labeled_trial(scenario, "trial", 0)
}

pub fn run_labeled_trial(
    scenario: &ScenarioConfig,
    label: &str,
    trial: usize,
) -> Result<TrialRecord> {
    let mut sim = Simulation::new(scenario.clone())?;
    let cfg = &scenario.trial;
    let every = cfg.record_every();
    let end_step = cfg.duration.map(|d| (d / cfg.dt_physics).round() as u64);
    let guard_step = (cfg.max_time / cfg.dt_physics).round() as u64;

    let mut samples = vec![sim.sample()];
    loop {
        sim.step()?;
        let n = sim.world().steps;
        if n % every != 0 {
            continue;
        }
        samples.push(sim.sample());
        match (end_step, cfg.distance) {
            (Some(end), _) if n >= end => break,
            (None, Some(dist)) if sim.progress() >= dist => break,
            _ => {}
        }
        if end_step.is_none() && n >= guard_step {
            return Err(Error::TerminationNotReached {
                max_time: cfg.max_time,
                progress: sim.progress(),
            });
        }
    }
    log::debug!(
        "{label} trial {trial}: {} samples, {:.2} s",
        samples.len(),
        sim.world().t
    );
    Ok(TrialRecord {
        meta: RecordMeta {
            label: label.to_string(),
            trial,
            seed: cfg.seed,
            robot_present: scenario.robot.present,
            samples: samples.len(),
            scenario: scenario.clone(),
        },
        samples,
    })
}

use nalgebra::{DVector, Vector3};
use thiserror::Error;

use super::{
    arm_manipulability, build_problem, damping_factor, desired_spatial_velocity, home_posture_velocity,
    joint_limit_velocity_bounds, relative_position_rows, ArmTask, ControllerConfig, ProblemInputs,
};
use crate::kinematics::{KinematicChain, KinematicsError, Pose, Side};
use crate::layout::{DecisionLayout, Task};
use crate::obstacles::{
    cluster_tactile, constraint_rows, controlled_parts, project_proximity, project_visual, self_collision_points,
    static_obstacle_points, CollisionPoint, CollisionSet, ObstacleError, SensorEvent,
};
use crate::qp::{write_problem, QpError, QpProblem, QpSolver, QpStatus};
use crate::trajectory::{TargetMode, TrajectoryError, TrajectorySampler};

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("problem assembly: {0}")]
    Assembly(String),
    #[error("relative-position rows need dual mode")]
    NotDual,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Obstacle(#[from] ObstacleError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("non-finite value at tick {tick}\n{dump}")]
    NonFinite { tick: u64, dump: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmTarget {
    pub pose: Pose,
    pub mode: TargetMode,
}

/// Everything carried from one tick to the next.
#[derive(Debug, Clone)]
pub struct ControlState {
    pub q: Vec<f64>,
    pub collisions: CollisionSet,
    samplers: [TrajectorySampler; 2],
    solver: QpSolver,
    pub tick: u64,
    /// Keep the assembled problems in the step output.
    pub capture_problems: bool,
}

impl ControlState {
    pub fn new(q: Vec<f64>, config: &ControllerConfig) -> Result<Self, ControlError> {
        let sampler = TrajectorySampler::new(config.period, config.min_horizon)?;
        Ok(Self {
            q,
            collisions: CollisionSet::new(),
            samplers: [sampler.clone(), sampler],
            solver: QpSolver::new(config.qp.into()),
            tick: 0,
            capture_problems: false,
        })
    }

    pub fn sampler(&self, side: Side) -> &TrajectorySampler {
        &self.samplers[side.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// Status of the solve whose result was applied (the relaxed one after a fallback).
    pub status: QpStatus,
    pub first_status: QpStatus,
    /// The primary position constraint was relaxed.
    pub fallback: bool,
    /// Both solves failed and the robot was held still.
    pub frozen: bool,
    pub mu: f64,
    /// Manipulability of each controlled arm, primary first.
    pub manipulability: Vec<f64>,
    /// Slack values, primary position, primary orientation, then secondary.
    pub slack: Vec<f64>,
    pub collision_points: usize,
    /// Smallest observed robot-obstacle distance among the active points, m.
    pub min_collision_distance: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Largest residual of the obstacle rows at the applied velocity (positive = violated).
    pub obstacle_violation: f64,
    /// Integration had to clamp a joint into its limits.
    pub limit_clamped: bool,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Joint velocities, global joint order; uncontrolled joints are zero.
    pub q_dot: Vec<f64>,
    pub q: Vec<f64>,
    /// Pose handed to the QP for each controlled arm.
    pub sampled: Vec<(Side, Pose)>,
    pub points: Vec<CollisionPoint>,
    pub diagnostics: StepDiagnostics,
    pub problem: Option<QpProblem>,
    pub relaxed_problem: Option<QpProblem>,
}

fn non_finite(tick: u64, q: &[f64], problem: Option<&QpProblem>) -> ControlError {
    let mut dump = format!("q = {q:?}\n");
    if let Some(p) = problem {
        dump.push_str(&write_problem(p));
    }
    ControlError::NonFinite { tick, dump }
}

/// One control tick: update obstacles, sample the next poses, solve, fall
/// back if needed, and integrate.
pub fn control_step(
    state: &mut ControlState,
    config: &ControllerConfig,
    chain: &KinematicChain,
    targets: &[(Side, ArmTarget)],
    events: &[SensorEvent],
    static_samples: &[Vector3<f64>],
) -> Result<StepOutput, ControlError> {
    let tick = state.tick;
    if state.q.iter().any(|v| !v.is_finite()) {
        return Err(non_finite(tick, &state.q, None));
    }
    let mode = config.mode;
    let layout = DecisionLayout::new(chain, mode);
    let frames = chain.frames(&state.q)?;
    let params = &config.avoidance;

    // obstacles
    let mut visual = Vec::new();
    let mut proximity = Vec::new();
    let mut tactile = Vec::new();
    for e in events {
        e.validate()?;
        match e {
            SensorEvent::Visual(k) => visual.push(k.clone()),
            SensorEvent::Proximity(r) => proximity.push(r.clone()),
            SensorEvent::Tactile(c) => tactile.push(c.clone()),
        }
    }
    let parts = controlled_parts(mode);
    let mut fresh = project_visual(&visual, chain, &frames, params, &parts);
    fresh.extend(project_proximity(&proximity, chain, &frames, params)?);
    fresh.extend(cluster_tactile(&tactile, chain, &frames, params));
    fresh.retain(|p| parts.contains(&p.part));
    state.collisions.update(fresh, config.period, params.survival_time);
    let mut points: Vec<CollisionPoint> = state.collisions.iter().cloned().collect();
    points.extend(self_collision_points(chain, &frames, params, mode));
    points.extend(static_obstacle_points(static_samples, chain, &frames, params, mode));
    let obstacle_rows = constraint_rows(&points, chain, &frames, params, &layout);

    // tasks
    let mut tasks = Vec::new();
    let mut sampled = Vec::new();
    let mut manip = Vec::new();
    for side in mode.arms() {
        let current = frames.end_effector_pose(side);
        let target = targets
            .iter()
            .find(|(s, _)| *s == side)
            .map(|(_, t)| *t)
            .unwrap_or(ArmTarget { pose: current, mode: TargetMode::Streamed });
        let next = state.samplers[side.index()].sample_next_pose(&current, &target.pose, target.mode)?;
        let (nu_pos, nu_ori) = desired_spatial_velocity(&current, &next, config.period);
        tasks.push(ArmTask { side, nu_pos, nu_ori, jacobian: chain.end_effector_jacobian(&frames, side) });
        sampled.push((side, next));
        manip.push(arm_manipulability(chain, &frames, side));
    }
    let mu = manip.iter().map(|w| damping_factor(*w, config.manipulability_threshold)).fold(0.0, f64::max);

    let thresholds = config.limit_thresholds(chain);
    let (lo, hi) = joint_limit_velocity_bounds(&state.q, chain, &thresholds);
    let home_velocity = home_posture_velocity(&state.q, &config.home, config.home_horizon, &lo, &hi);
    let relative_rows = match &config.relative_position {
        Some(d) => Some(relative_position_rows(chain, &frames, &layout, &Vector3::from(*d), config.period)?),
        None => None,
    };
    let inputs = ProblemInputs {
        layout: &layout,
        chain,
        mu,
        tasks,
        velocity_lower: lo,
        velocity_upper: hi,
        home_velocity,
        relative_rows,
        obstacle_rows,
    };

    let problem = build_problem(&inputs, config, false)?;
    let first = state.solver.solve(&problem)?;
    let mut fallback = false;
    let mut frozen = false;
    let mut relaxed_problem = None;
    let mut applied = first.clone();
    if first.status != QpStatus::Optimal {
        fallback = true;
        let relaxed = build_problem(&inputs, config, true)?;
        let second = state.solver.solve(&relaxed)?;
        if second.status != QpStatus::Optimal {
            frozen = true;
            state.solver.reset();
        }
        applied = second;
        relaxed_problem = Some(relaxed);
    }
    let x = if frozen { DVector::zeros(layout.n()) } else { applied.x.clone() };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(non_finite(tick, &state.q, Some(relaxed_problem.as_ref().unwrap_or(&problem))));
    }

    let mut q_dot = vec![0.0; chain.dof()];
    for (c, &j) in layout.joints().iter().enumerate() {
        q_dot[j] = x[c];
    }
    let mut limit_clamped = false;
    let mut q = state.q.clone();
    for (j, joint) in chain.joints().enumerate() {
        let next = q[j] + q_dot[j] * config.period;
        let clamped = next.clamp(joint.lower, joint.upper);
        if clamped != next && (clamped - next).abs() > config.qp.tol * config.period {
            limit_clamped = true;
        }
        q[j] = clamped;
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(non_finite(tick, &state.q, Some(&problem)));
    }

    let (a_in, b_in) = &inputs.obstacle_rows;
    let obstacle_violation = (0..a_in.nrows())
        .map(|r| a_in.row(r).transpose().dot(&x) - b_in[r])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut slack = Vec::new();
    for side in mode.arms() {
        for t in [Task::Position, Task::Orientation] {
            let s0 = layout.slack(side, t).expect("controlled arm has slack columns");
            slack.extend(x.rows(s0, 3).iter());
        }
    }
    let diagnostics = StepDiagnostics {
        status: if frozen { applied.status } else { QpStatus::Optimal },
        first_status: first.status,
        fallback,
        frozen,
        mu,
        manipulability: manip,
        slack,
        collision_points: points.len(),
        min_collision_distance: points.iter().map(|p| p.distance).fold(f64::INFINITY, f64::min),
        iterations: first.iterations + if fallback { applied.iterations } else { 0 },
        kkt_residual: applied.kkt_residual,
        obstacle_violation,
        limit_clamped,
    };
    state.q = q.clone();
    state.tick += 1;
    Ok(StepOutput {
        q_dot,
        q,
        sampled,
        points,
        diagnostics,
        problem: state.capture_problems.then_some(problem),
        relaxed_problem: if state.capture_problems { relaxed_problem } else { None },
    })
}

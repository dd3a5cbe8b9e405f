//! Per-tick differential-kinematics QP.
//!
//! Decision vector `[q_dot; lambda]` with `nu - lambda = J q_dot` per
//! controlled arm, cost
//! `1/2 mu q_dot' W_q q_dot + 1/2 lambda' W_l lambda + 1/2 c_h |q_dot - q_dot_h|^2_{W_q}`,
//! joint-limit shaped velocity bounds and one half-space row per collision point.

mod config;
mod step;

pub use config::{
    ConfigError, ControllerConfig, JointLimitShaping, LimitThresholds, QpConfig, SlackBounds, SlackWeights,
    CONFIG_FORMAT_VERSION,
};
pub use step::{control_step, ArmTarget, ControlError, ControlState, StepDiagnostics, StepOutput};

use nalgebra::{DMatrix, DVector, Vector3};

use crate::kinematics::rotation::log_map;
use crate::kinematics::{JacobianBlocks, KinematicChain, Pose, RobotFrames, Side};
use crate::layout::{DecisionLayout, Task};
use crate::qp::QpProblem;

/// `((x_t - x_c) / t_s, log(R_t R_c') / t_s)`
pub fn desired_spatial_velocity(current: &Pose, next: &Pose, period: f64) -> (Vector3<f64>, Vector3<f64>) {
    let v = (next.position - current.position) / period;
    let w = log_map(&(next.rotation() * current.rotation().inverse())).0 / period;
    (v, w)
}

/// `(1 - w/w0)^2 + 0.01` below the threshold, `0.01` above.
pub fn damping_factor(omega: f64, omega0: f64) -> f64 {
    if omega < omega0 {
        (1.0 - omega / omega0).powi(2) + 0.01
    } else {
        0.01
    }
}

/// `(c_min, c_max)`: 0 at the limit, a linear ramp between the thresholds and 1 in the flat middle.
pub fn limit_factors(q: f64, t: &LimitThresholds) -> (f64, f64) {
    let [g_l, g_h, big_g_l, big_g_h] = *t;
    let c_min = if q < g_l {
        0.0
    } else if q <= g_h {
        (q - g_l) / (g_h - g_l)
    } else {
        1.0
    };
    let c_max = if q > big_g_h {
        0.0
    } else if q >= big_g_l {
        (q - big_g_h) / (big_g_l - big_g_h)
    } else {
        1.0
    };
    (c_min, c_max)
}

/// Velocity bounds `(-v_max c_min(q), v_max c_max(q))` of every joint.
pub fn joint_limit_velocity_bounds(q: &[f64], chain: &KinematicChain, thresholds: &[LimitThresholds]) -> (Vec<f64>, Vec<f64>) {
    let mut lo = Vec::with_capacity(q.len());
    let mut hi = Vec::with_capacity(q.len());
    for ((qi, t), joint) in q.iter().zip(thresholds).zip(chain.joints()) {
        let (c_min, c_max) = limit_factors(*qi, t);
        lo.push(-joint.max_velocity * c_min);
        hi.push(joint.max_velocity * c_max);
    }
    (lo, hi)
}

/// `clamp((q_home - q) / T_home, lo, hi)`
pub fn home_posture_velocity(q: &[f64], home: &[f64], horizon: f64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    q.iter()
        .zip(home)
        .zip(lo.iter().zip(hi))
        .map(|((qi, hi_), (l, h))| ((hi_ - qi) / horizon).clamp(*l, *h))
        .collect()
}

/// Manipulability of an arm's end-effector position over torso and arm joints.
pub fn arm_manipulability(chain: &KinematicChain, frames: &RobotFrames, side: Side) -> f64 {
    let jp = chain.end_effector_jacobian(frames, side).position();
    crate::kinematics::manipulability(&DMatrix::from_column_slice(3, jp.ncols(), jp.as_slice()))
}

/// Velocity task of one arm.
#[derive(Debug, Clone)]
pub struct ArmTask {
    pub side: Side,
    pub nu_pos: Vector3<f64>,
    pub nu_ori: Vector3<f64>,
    pub jacobian: JacobianBlocks,
}

/// Everything `build_problem` needs, already in decision-column order.
#[derive(Debug, Clone)]
pub struct ProblemInputs<'a> {
    pub layout: &'a DecisionLayout,
    pub chain: &'a KinematicChain,
    pub mu: f64,
    /// Primary first.
    pub tasks: Vec<ArmTask>,
    /// Global joint order.
    pub velocity_lower: Vec<f64>,
    pub velocity_upper: Vec<f64>,
    pub home_velocity: Vec<f64>,
    pub relative_rows: Option<(DMatrix<f64>, DVector<f64>)>,
    pub obstacle_rows: (DMatrix<f64>, DVector<f64>),
}

fn slack_block(config: &ControllerConfig, primary: bool, task: Task) -> (f64, f64) {
    let (w, e) = (&config.slack_weights, &config.slack_bounds);
    match (primary, task) {
        (true, Task::Position) => (w.primary_position, e.primary_position),
        (true, Task::Orientation) => (w.primary_orientation, e.primary_orientation),
        (false, Task::Position) => (w.secondary_position, e.secondary_position),
        (false, Task::Orientation) => (w.secondary_orientation, e.secondary_orientation),
    }
}

/// Assembles the QP. `relax_primary` lifts the bound on the primary position slack.
pub fn build_problem(inputs: &ProblemInputs<'_>, config: &ControllerConfig, relax_primary: bool) -> Result<QpProblem, ControlError> {
    let layout = inputs.layout;
    let chain = inputs.chain;
    let n = layout.n();
    let nj = layout.n_joints();
    let dim = |what: &str| ControlError::Assembly(what.to_string());
    let global = chain.dof();
    if inputs.velocity_lower.len() != global || inputs.velocity_upper.len() != global || inputs.home_velocity.len() != global {
        return Err(dim("joint vectors must cover every joint"));
    }
    if inputs.tasks.len() != layout.mode.arms().len() {
        return Err(dim("one task per controlled arm"));
    }
    if inputs.obstacle_rows.0.ncols() != n && inputs.obstacle_rows.0.nrows() > 0 {
        return Err(dim("obstacle rows width"));
    }

    let mut h = DMatrix::zeros(n, n);
    let mut g = DVector::zeros(n);
    let mut lb = DVector::zeros(n);
    let mut ub = DVector::zeros(n);
    for (c, &j) in layout.joints().iter().enumerate() {
        let w = config.joint_weights[j];
        h[(c, c)] = (inputs.mu + config.home_weight) * w;
        g[c] = -config.home_weight * w * inputs.home_velocity[j];
        lb[c] = inputs.velocity_lower[j];
        ub[c] = inputs.velocity_upper[j];
    }

    let rows = 6 * inputs.tasks.len() + inputs.relative_rows.as_ref().map_or(0, |r| r.0.nrows());
    let mut a_eq = DMatrix::zeros(rows, n);
    let mut b_eq = DVector::zeros(rows);
    for (rank, task) in inputs.tasks.iter().enumerate() {
        let primary = rank == 0;
        if task.jacobian.side != Some(task.side) {
            return Err(dim("task Jacobian belongs to another arm"));
        }
        for (t, (jt, ja, nu)) in [
            (Task::Position, (&task.jacobian.torso_pos, &task.jacobian.arm_pos, &task.nu_pos)),
            (Task::Orientation, (&task.jacobian.torso_ori, &task.jacobian.arm_ori, &task.nu_ori)),
        ] {
            let r0 = 6 * rank + if t == Task::Position { 0 } else { 3 };
            let s0 = layout.slack(task.side, t).ok_or_else(|| dim("slack block missing"))?;
            let (w, eps) = slack_block(config, primary, t);
            let eps = if primary && t == Task::Position && relax_primary { f64::INFINITY } else { eps };
            for r in 0..3 {
                for k in 0..jt.ncols() {
                    a_eq[(r0 + r, layout.column(k).ok_or_else(|| dim("torso column"))?)] = jt[(r, k)];
                }
                for k in 0..ja.ncols() {
                    let c = layout.column(chain.arm_joint_index(task.side, k)).ok_or_else(|| dim("arm column"))?;
                    a_eq[(r0 + r, c)] = ja[(r, k)];
                }
                a_eq[(r0 + r, s0 + r)] = -1.0;
                b_eq[r0 + r] = nu[r];
                h[(s0 + r, s0 + r)] = w;
                lb[s0 + r] = -eps;
                ub[s0 + r] = eps;
            }
        }
    }
    if let Some((ar, br)) = &inputs.relative_rows {
        if ar.ncols() != n {
            return Err(dim("relative-position rows width"));
        }
        let r0 = 6 * inputs.tasks.len();
        a_eq.view_mut((r0, 0), (ar.nrows(), n)).copy_from(ar);
        b_eq.rows_mut(r0, br.len()).copy_from(br);
    }
    debug_assert!(nj <= n);
    let (a_in, b_in) = inputs.obstacle_rows.clone();
    let a_in = if a_in.nrows() == 0 { DMatrix::zeros(0, n) } else { a_in };
    Ok(QpProblem { h, g, a_eq, b_eq, a_in, b_in, lb, ub })
}

/// Velocity-level rows keeping `x_primary - x_secondary = d_rel`.
pub fn relative_position_rows(
    chain: &KinematicChain,
    frames: &RobotFrames,
    layout: &DecisionLayout,
    d_rel: &Vector3<f64>,
    period: f64,
) -> Result<(DMatrix<f64>, DVector<f64>), ControlError> {
    let secondary = layout.mode.secondary().ok_or(ControlError::NotDual)?;
    let primary = layout.mode.primary();
    let jp = chain.end_effector_jacobian(frames, primary);
    let js = chain.end_effector_jacobian(frames, secondary);
    let mut a = DMatrix::zeros(3, layout.n());
    for r in 0..3 {
        for k in 0..chain.torso_dof() {
            a[(r, k)] = jp.torso_pos[(r, k)] - js.torso_pos[(r, k)];
        }
        for k in 0..chain.arm_dof() {
            let cp = layout.column(chain.arm_joint_index(primary, k)).expect("dual layout has both arms");
            let cs = layout.column(chain.arm_joint_index(secondary, k)).expect("dual layout has both arms");
            a[(r, cp)] = jp.arm_pos[(r, k)];
            a[(r, cs)] = -js.arm_pos[(r, k)];
        }
    }
    let xp = frames.end_effector(primary).translation.vector;
    let xs = frames.end_effector(secondary).translation.vector;
    let b = (d_rel - (xp - xs)) / period;
    Ok((a, DVector::from_column_slice(b.as_slice())))
}

//! Closed-loop replay of a scenario, one control tick at a time.

use std::path::Path;

use nalgebra::{DVector, Vector3};

use super::metrics::{summarize, ArmMetrics, Phase, Summary, TickMetrics};
use super::scenario::{resolve, CircleSpec, DiscreteTarget, Overrides, Resolved, Scenario};
use super::SimError;
use crate::controller::{control_step, ArmTarget, ControlError, ControlState, ControllerConfig, StepOutput};
use crate::kinematics::rotation::geodesic_angle;
use crate::kinematics::{BodyPart, BodyPartKind, KinematicChain, LinkId, Pose, RobotFrames, Side};
use crate::obstacles::closest_pair;
use crate::obstacles::{surface_distance, KeypointKind, SensorEvent, VisualKeypoint};
use crate::qp::write_problem;
use crate::qp::QpStatus;
use crate::trajectory::TargetMode;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Stop after this many ticks instead of the scenario duration.
    pub ticks: Option<u64>,
    /// Keep the QP of tick 0 and of every tick that needed the fallback.
    pub capture_qp: bool,
}

#[derive(Debug)]
pub struct RunOutput {
    pub ticks: Vec<TickMetrics>,
    /// `None` only when the run stopped before its first tick completed.
    pub summary: Option<Summary>,
    /// The hard error that ended the run early, if any.
    pub error: Option<ControlError>,
    /// `(tick, problem text)` pairs collected under `capture_qp`.
    pub qp_dumps: Vec<(u64, String)>,
}

enum Script {
    None,
    Discrete { targets: Vec<DiscreteTarget>, index: usize, phase: Phase, since: u64, until: u64 },
    Circle(CircleSpec),
}

/// What one arm is asked to do at one tick.
struct Command {
    phase: Phase,
    target: i64,
    /// Pose the errors are measured against.
    goal: Option<Pose>,
    send: Option<ArmTarget>,
}

fn ticks_for(seconds: f64, period: f64) -> u64 {
    (seconds / period - 1e-9).ceil().max(0.0) as u64
}

impl Script {
    /// Advances timers that expire at tick `k` and returns the command for it.
    fn command(&mut self, k: u64, config: &ControllerConfig) -> Command {
        let t = k as f64 * config.period;
        let discrete = TargetMode::Discrete { speed: config.cartesian_speed };
        match self {
            Script::None => Command { phase: Phase::Idle, target: -1, goal: None, send: None },
            Script::Discrete { targets, index, phase, since, until } => {
                loop {
                    let expired = match phase {
                        Phase::Reach => k - *since >= ticks_for(targets[*index].timeout, config.period),
                        Phase::Dwell => k >= *until,
                        _ => false,
                    };
                    if !expired {
                        break;
                    }
                    *index += 1;
                    *since = k;
                    if *index == targets.len() {
                        *index -= 1;
                        *phase = Phase::Hold;
                    } else {
                        *phase = Phase::Reach;
                    }
                }
                let pose = targets[*index].pose();
                Command {
                    phase: *phase,
                    target: *index as i64,
                    goal: Some(pose),
                    send: Some(ArmTarget { pose, mode: discrete }),
                }
            }
            Script::Circle(c) => {
                if t < c.start {
                    let pose = c.pose(c.start);
                    Command { phase: Phase::LeadIn, target: 0, goal: Some(pose), send: Some(ArmTarget { pose, mode: discrete }) }
                } else {
                    let next = c.pose(t + config.period);
                    Command {
                        phase: Phase::Track,
                        target: 0,
                        goal: Some(c.pose(t)),
                        send: Some(ArmTarget { pose: next, mode: TargetMode::Streamed }),
                    }
                }
            }
        }
    }

    /// Called after the errors of tick `k` are known.
    fn on_reached(&mut self, k: u64, scenario: &Scenario, period: f64) {
        if let Script::Discrete { targets, index, phase, since, until } = self {
            *phase = Phase::Dwell;
            *until = if scenario.advance_on_reach {
                k + ticks_for(scenario.dwell, period)
            } else {
                *since + ticks_for(targets[*index].timeout, period)
            };
        }
    }
}

fn arm_samples(chain: &KinematicChain, frames: &RobotFrames, side: Side) -> Vec<Vector3<f64>> {
    [BodyPartKind::UpperArm, BodyPartKind::Forearm, BodyPartKind::Hand]
        .iter()
        .flat_map(|&kind| chain.sample_positions(frames, BodyPart::arm(side, kind)))
        .collect()
}

fn end_effector_speed(chain: &KinematicChain, frames: &RobotFrames, side: Side, q_dot: &[f64]) -> f64 {
    let j = chain.end_effector_jacobian(frames, side).position();
    let cols = chain.chain_joints(LinkId::Arm(side, chain.arm_dof() - 1));
    let v = DVector::from_iterator(cols.len(), cols.iter().map(|&c| q_dot[c]));
    (j * v).norm()
}

fn collisions_text(out: &StepOutput) -> String {
    out.points
        .iter()
        .map(|p| format!("{}/{}/{}/{}", p.source.name(), p.part, p.tag, p.threat))
        .collect::<Vec<_>>()
        .join(";")
}

/// Runs a scenario that has already been resolved.
pub fn run_resolved(scenario: &Scenario, resolved: &Resolved, options: &RunOptions) -> RunOutput {
    let Resolved { chain, config, initial, static_samples } = resolved;
    let period = config.period;
    let n_ticks = options.ticks.unwrap_or_else(|| ticks_for(scenario.duration, period));
    let mut scripts = [Script::None, Script::None];
    for side in config.mode.arms() {
        let targets: Vec<DiscreteTarget> = scenario.targets.iter().filter(|t| t.arm == side).cloned().collect();
        scripts[side.index()] = if let Some(c) = scenario.circles.iter().find(|c| c.arm == side) {
            Script::Circle(c.clone())
        } else if targets.is_empty() {
            Script::None
        } else {
            Script::Discrete { targets, index: 0, phase: Phase::Reach, since: 0, until: 0 }
        };
    }
    let all_parts: Vec<BodyPart> = chain.parts().iter().map(|s| s.part).collect();

    let mut out = RunOutput { ticks: Vec::new(), summary: None, error: None, qp_dumps: Vec::new() };
    let mut state = match ControlState::new(initial.clone(), config) {
        Ok(s) => s,
        Err(e) => {
            out.error = Some(e);
            return out;
        }
    };
    state.capture_problems = options.capture_qp;
    let mut next_event = 0;

    for k in 0..n_ticks {
        let t = k as f64 * period;
        let q = state.q.clone();
        let frames = match chain.frames(&q) {
            Ok(f) => f,
            Err(e) => {
                out.error = Some(e.into());
                break;
            }
        };

        let mut events: Vec<SensorEvent> = Vec::new();
        while next_event < scenario.events.len() && scenario.events[next_event].time <= t + 1e-9 * period {
            events.push(scenario.events[next_event].event.clone());
            next_event += 1;
        }
        let obstacles: Vec<Vector3<f64>> = scenario
            .moving_obstacles
            .iter()
            .filter(|o| o.active(t))
            .map(|o| o.position_at_tick(k, period))
            .collect();
        events.extend(obstacles.iter().map(|p| {
            SensorEvent::Visual(VisualKeypoint { position: [p.x, p.y, p.z], kind: KeypointKind::Body })
        }));

        let mut commands = Vec::new();
        let mut targets = Vec::new();
        for side in Side::BOTH {
            let c = scripts[side.index()].command(k, config);
            if let Some(send) = c.send {
                targets.push((side, send));
            }
            commands.push(c);
        }

        let step = match control_step(&mut state, config, chain, &targets, &events, static_samples) {
            Ok(s) => s,
            Err(e) => {
                out.error = Some(e);
                break;
            }
        };
        let d = &step.diagnostics;
        if options.capture_qp && (k == 0 || d.fallback) {
            if let Some(p) = &step.problem {
                out.qp_dumps.push((k, write_problem(p)));
            }
            if let Some(p) = &step.relaxed_problem {
                out.qp_dumps.push((k, write_problem(p)));
            }
        }

        let mut arms = Vec::with_capacity(2);
        for side in Side::BOTH {
            let c = &commands[side.index()];
            let pose = frames.end_effector_pose(side);
            let (position_error, orientation_error) = match &c.goal {
                Some(g) => ((pose.position - g.position).norm(), geodesic_angle(&pose.rotation(), &g.rotation())),
                None => (f64::NAN, f64::NAN),
            };
            let reached = c.phase == Phase::Reach
                && position_error <= scenario.tolerance.position
                && orientation_error <= scenario.tolerance.orientation;
            if reached {
                scripts[side.index()].on_reached(k, scenario, period);
            }
            arms.push(ArmMetrics {
                position: pose.position.into(),
                orientation: pose.orientation.into(),
                phase: c.phase,
                target: c.target,
                position_error,
                orientation_error,
                reached,
                speed: end_effector_speed(chain, &frames, side, &step.q_dot),
            });
        }
        let right = arms.pop().expect("two arms");
        let left = arms.pop().expect("two arms");

        let mut slack = [f64::NAN; 12];
        for (s, v) in slack.iter_mut().zip(&d.slack) {
            *s = *v;
        }
        let inter_arm = closest_pair(&arm_samples(chain, &frames, Side::Left), &arm_samples(chain, &frames, Side::Right))
            .map_or(f64::INFINITY, |(dist, _, _)| dist);
        out.ticks.push(TickMetrics {
            tick: k,
            time: t,
            arms: [left, right],
            min_obstacle_distance: surface_distance(chain, &frames, &all_parts, &obstacles),
            inter_arm_distance: inter_arm,
            status: d.status,
            first_status: d.first_status,
            fallback: d.fallback,
            frozen: d.frozen,
            mu: d.mu,
            iterations: d.iterations,
            kkt_residual: d.kkt_residual,
            obstacle_violation: d.obstacle_violation,
            q,
            q_dot: step.q_dot.clone(),
            slack,
            collisions: collisions_text(&step),
        });
        debug_assert!(d.status == QpStatus::Optimal || d.frozen);
    }
    if let Some(ControlError::NonFinite { tick, dump }) = &out.error {
        out.qp_dumps.push((*tick, dump.clone()));
    }
    out.summary = summarize(&out.ticks, config.mode.primary()).ok();
    out
}

/// Resolves the scenario's references against `base` and runs it. Reference
/// problems are reported before any tick executes.
pub fn run_scenario(
    scenario: &Scenario,
    base: Option<&Path>,
    overrides: &Overrides,
    options: &RunOptions,
) -> Result<RunOutput, SimError> {
    let resolved = resolve(scenario, base, overrides)?;
    Ok(run_resolved(scenario, &resolved, options))
}

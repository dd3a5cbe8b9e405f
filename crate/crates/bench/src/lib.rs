//! Fixtures shared by the benchmarks.

use nalgebra::Vector3;
use wbreact_core::builtin::{home_posture, icub_like_model};
use wbreact_core::controller::{control_step, ArmTarget, ControlState, ControllerConfig};
use wbreact_core::kinematics::{KinematicChain, Pose, Side};
use wbreact_core::layout::ControlMode;
use wbreact_core::obstacles::{KeypointKind, SensorEvent, VisualKeypoint};
use wbreact_core::qp::QpProblem;
use wbreact_core::trajectory::TargetMode;

pub struct Fixture {
    pub chain: KinematicChain,
    pub config: ControllerConfig,
    pub state: ControlState,
    pub targets: Vec<(Side, ArmTarget)>,
    pub events: Vec<SensorEvent>,
}

/// A controller at home with a discrete reach 5 cm forward per arm and,
/// if `obstacle`, a keypoint near the right hand.
pub fn fixture(mode: ControlMode, obstacle: bool) -> Fixture {
    let chain = icub_like_model();
    let config = ControllerConfig { mode, ..ControllerConfig::default() };
    let q = home_posture();
    let frames = chain.frames(&q).expect("home posture is valid");
    let targets = mode
        .arms()
        .into_iter()
        .map(|side| {
            let home = frames.end_effector_pose(side);
            let pose = Pose { position: home.position + Vector3::new(-0.05, 0.0, 0.03), ..home };
            (side, ArmTarget { pose, mode: TargetMode::Discrete { speed: config.cartesian_speed } })
        })
        .collect();
    let events = if obstacle {
        let p = frames.end_effector_pose(Side::Right).position + Vector3::new(-0.08, 0.05, 0.0);
        vec![SensorEvent::Visual(VisualKeypoint { position: [p.x, p.y, p.z], kind: KeypointKind::Body })]
    } else {
        Vec::new()
    };
    let state = ControlState::new(q, &config).expect("default config is valid");
    Fixture { chain, config, state, targets, events }
}

/// The QP assembled on the first tick of `fixture(mode, obstacle)`.
pub fn captured_problem(mode: ControlMode, obstacle: bool) -> QpProblem {
    let mut f = fixture(mode, obstacle);
    f.state.capture_problems = true;
    let out = control_step(&mut f.state, &f.config, &f.chain, &f.targets, &f.events, &[]).expect("first tick");
    out.problem.expect("captured")
}

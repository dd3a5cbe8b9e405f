use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wbreact_core::builtin::{home_posture, icub_like_model};
use wbreact_core::controller::{control_step, ArmTarget, ControlState, ControllerConfig};
use wbreact_core::kinematics::{BodyPart, BodyPartKind, KinematicChain, Pose, Side};
use wbreact_core::layout::ControlMode;
use wbreact_core::obstacles::{retreat_rhs, KeypointKind, SensorEvent, Source, VisualKeypoint};
use wbreact_core::qp::QpStatus;
use wbreact_core::trajectory::TargetMode;

fn config(mode: ControlMode) -> ControllerConfig {
    ControllerConfig { mode, ..ControllerConfig::default() }
}

fn hand_pose(chain: &KinematicChain, q: &[f64], side: Side) -> Pose {
    chain.frames(q).unwrap().end_effector_pose(side)
}

fn streamed(pose: Pose) -> ArmTarget {
    ArmTarget { pose, mode: TargetMode::Streamed }
}

fn shifted(pose: Pose, by: Vector3<f64>) -> Pose {
    Pose { position: pose.position + by, ..pose }
}

fn keypoint(p: Vector3<f64>) -> SensorEvent {
    SensorEvent::Visual(VisualKeypoint { position: [p.x, p.y, p.z], kind: KeypointKind::Body })
}

/// Outermost sample of the right hand and the outward direction there.
fn hand_tip(chain: &KinematicChain, q: &[f64]) -> (Vector3<f64>, Vector3<f64>) {
    let frames = chain.frames(q).unwrap();
    let centre = frames.end_effector_pose(Side::Right).position;
    let samples = chain.sample_positions(&frames, BodyPart::arm(Side::Right, BodyPartKind::Hand));
    let tip = samples
        .iter()
        .copied()
        .max_by(|a, b| (a - centre).norm().total_cmp(&(b - centre).norm()))
        .unwrap();
    (tip, (tip - centre).normalize())
}

#[test]
fn holding_the_home_pose_needs_no_motion() {
    let chain = icub_like_model();
    for mode in [ControlMode::Single { arm: Side::Right }, ControlMode::Dual { primary: Side::Right }] {
        let config = config(mode);
        let q = config.home.clone();
        let mut state = ControlState::new(q.clone(), &config).unwrap();
        let targets: Vec<_> = mode.arms().into_iter().map(|s| (s, streamed(hand_pose(&chain, &q, s)))).collect();
        let out = control_step(&mut state, &config, &chain, &targets, &[], &[]).unwrap();
        assert_eq!(out.diagnostics.status, QpStatus::Optimal);
        assert!(out.q_dot.iter().all(|v| v.abs() < 1e-6), "{:?}", out.q_dot);
    }
}

#[test]
fn threatened_hand_retreats() {
    let chain = icub_like_model();
    let config = config(ControlMode::Single { arm: Side::Right });
    let q = home_posture();
    let (tip, out_dir) = hand_tip(&chain, &q);
    let mut state = ControlState::new(q.clone(), &config).unwrap();
    let target = streamed(hand_pose(&chain, &q, Side::Right));
    let events = [keypoint(tip + 0.002 * out_dir)];
    let out = control_step(&mut state, &config, &chain, &[(Side::Right, target)], &events, &[]).unwrap();
    let d = &out.diagnostics;
    assert_eq!(d.status, QpStatus::Optimal);
    let point = out
        .points
        .iter()
        .find(|p| p.source == Source::Visual && p.part.kind == BodyPartKind::Hand)
        .expect("hand point");
    let rhs = retreat_rhs(point, &config.avoidance);
    assert!(rhs < -0.3, "rhs {rhs}");
    // hand point velocity along the obstacle direction, from the integrated step
    let before = chain.frames(&q).unwrap().point(point.link, &point.local);
    let after = chain.frames(&out.q).unwrap().point(point.link, &point.local);
    let approach = point.direction.dot(&((after - before) / config.period));
    assert!(approach <= rhs + 1e-3, "approach {approach} vs allowed {rhs}");
    assert!(d.obstacle_violation <= config.qp.tol * 10.0);
}

#[test]
fn blocked_primary_falls_back_to_the_relaxed_problem() {
    let chain = icub_like_model();
    let config = config(ControlMode::Single { arm: Side::Right });
    let q = home_posture();
    let (tip, out_dir) = hand_tip(&chain, &q);
    let mut state = ControlState::new(q.clone(), &config).unwrap();
    // demand 1 m/s straight into a keypoint 1 cm away
    let target = streamed(shifted(hand_pose(&chain, &q, Side::Right), 0.01 * out_dir));
    let events = [keypoint(tip + 0.01 * out_dir)];
    let out = control_step(&mut state, &config, &chain, &[(Side::Right, target)], &events, &[]).unwrap();
    let d = &out.diagnostics;
    assert_ne!(d.first_status, QpStatus::Optimal);
    assert!(d.fallback);
    assert_eq!(d.status, QpStatus::Optimal);
    assert!(!d.frozen);
    assert!(d.slack[..3].iter().any(|v| v.abs() > 1e-6), "relaxed slack {:?}", d.slack);
}

#[test]
fn joint_limits_hold_under_random_streaming() {
    let chain = icub_like_model();
    let config = config(ControlMode::Dual { primary: Side::Right });
    let (lo, hi) = (chain.lower_limits(), chain.upper_limits());
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut state = ControlState::new(home_posture(), &config).unwrap();
    let mut goals = [Vector3::zeros(); 2];
    for k in 0..1500 {
        if k % 150 == 0 {
            for g in &mut goals {
                *g = Vector3::new(rng.random_range(-0.6..0.2), rng.random_range(-0.6..0.6), rng.random_range(-0.4..0.6));
            }
        }
        let targets: Vec<_> = Side::BOTH
            .iter()
            .map(|&s| {
                let pose = hand_pose(&chain, &state.q, s);
                let step = goals[s.index()] - pose.position;
                let step = step * (0.005 / step.norm().max(0.005));
                (s, streamed(shifted(pose, step)))
            })
            .collect();
        let out = control_step(&mut state, &config, &chain, &targets, &[], &[]).unwrap();
        assert!(!out.diagnostics.limit_clamped, "tick {k}");
        for (j, v) in state.q.iter().enumerate() {
            let slop = config.qp.tol * config.period;
            assert!(*v >= lo[j] - slop && *v <= hi[j] + slop, "tick {k} joint {j}: {v}");
        }
    }
}

#[test]
fn primary_position_is_exact_without_fallback() {
    let chain = icub_like_model();
    let config = config(ControlMode::Dual { primary: Side::Right });
    let mut state = ControlState::new(home_posture(), &config).unwrap();
    for k in 0..300 {
        let t = k as f64 * config.period;
        let wobble = Vector3::new(0.0, 0.03 * (2.0 * t).sin(), 0.03 * (2.0 * t).cos() - 0.03);
        let targets: Vec<_> = Side::BOTH
            .iter()
            .map(|&s| {
                let home = hand_pose(&chain, &config.home, s);
                let sign = if s == Side::Right { 1.0 } else { -1.0 };
                (s, streamed(shifted(home, sign * wobble)))
            })
            .collect();
        let out = control_step(&mut state, &config, &chain, &targets, &[], &[]).unwrap();
        let d = &out.diagnostics;
        if d.status == QpStatus::Optimal && !d.fallback {
            assert!(d.slack[..3].iter().all(|v| *v == 0.0), "tick {k}: {:?}", &d.slack[..3]);
        }
    }
}

#[test]
fn identical_inputs_give_identical_bits() {
    let chain = icub_like_model();
    let config = config(ControlMode::Dual { primary: Side::Right });
    let run = || {
        let mut state = ControlState::new(home_posture(), &config).unwrap();
        let mut trace = Vec::new();
        for k in 0..200 {
            let targets: Vec<_> = Side::BOTH
                .iter()
                .map(|&s| {
                    let pose = hand_pose(&chain, &config.home, s);
                    (s, ArmTarget { pose: shifted(pose, Vector3::new(0.05, 0.0, 0.05)), mode: TargetMode::Discrete { speed: 0.1 } })
                })
                .collect();
            let events = [keypoint(Vector3::new(-0.3, 0.25 - 0.002 * k as f64, 0.1))];
            let out = control_step(&mut state, &config, &chain, &targets, &events, &[]).unwrap();
            trace.extend(out.q.iter().map(|v| v.to_bits()));
        }
        trace
    };
    assert_eq!(run(), run());
}

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use wbreact_core::builtin::{home_posture, icub_like_model};
use wbreact_core::controller::ControllerConfig;
use wbreact_core::kinematics::{BodyPart, KinematicChain, Side};
use wbreact_core::layout::ControlMode;
use wbreact_core::obstacles::surface_distance;
use wbreact_core::sim::{
    experiment, read_csv, run_scenario, write_csv, DiscreteTarget, MovingObstacle, Overrides, RunOptions, Scenario,
    SimError, EXPERIMENTS,
};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(s: &Scenario, ticks: Option<u64>) -> wbreact_core::sim::RunOutput {
    run_scenario(s, None, &Overrides::default(), &RunOptions { ticks, capture_qp: false }).unwrap()
}

fn csv_bytes(out: &wbreact_core::sim::RunOutput) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(&mut buf, &out.ticks).unwrap();
    buf
}

fn home_target(side: Side, timeout: f64) -> DiscreteTarget {
    let pose = icub_like_model().frames(&home_posture()).unwrap().end_effector_pose(side);
    let angle = pose.orientation.norm();
    let axis = pose.orientation / angle;
    DiscreteTarget {
        arm: side,
        position: pose.position.into(),
        orientation: [axis.x, axis.y, axis.z, angle],
        timeout,
    }
}

#[test]
fn bundled_scenario_files_match_the_generators() {
    for name in EXPERIMENTS {
        let path = repo().join(format!("scenarios/exp{name}.toml"));
        let file = Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(file, experiment(name).unwrap(), "{name}");
    }
}

#[test]
fn bundled_config_file_matches_the_default() {
    let path = repo().join("data/default_config.toml");
    assert_eq!(ControllerConfig::load(path).unwrap(), ControllerConfig::default());
}

#[test]
fn holding_the_start_pose_reaches_everything() {
    let mut s = Scenario::new("hold", 2.0, 0);
    s.mode = Some(ControlMode::Single { arm: Side::Right });
    s.targets.push(home_target(Side::Right, 1.0));
    let out = run(&s, None);
    assert!(out.error.is_none());
    let summary = out.summary.unwrap();
    assert_eq!(summary.ticks, 200);
    assert_eq!(summary.targets_reached, 1);
    assert_eq!(summary.reach_rate, 1.0);
    assert_eq!(summary.min_obstacle_distance, f64::INFINITY);
    assert_eq!(summary.solver_success_fraction, 1.0);
}

#[test]
fn logged_pose_is_forward_kinematics_of_logged_q() {
    let out = run(&experiment("4").unwrap(), Some(600));
    let chain = icub_like_model();
    for t in &out.ticks {
        let frames = chain.frames(&t.q).unwrap();
        for side in Side::BOTH {
            let pose = frames.end_effector_pose(side);
            let logged = &t.arms[side.index()];
            assert!((pose.position - Vector3::from(logged.position)).amax() < 1e-12, "tick {}", t.tick);
            assert!((pose.orientation - Vector3::from(logged.orientation)).amax() < 1e-12, "tick {}", t.tick);
        }
    }
}

#[test]
fn logged_q_follows_the_applied_velocity() {
    let out = run(&experiment("2").unwrap(), Some(300));
    for w in out.ticks.windows(2) {
        for j in 0..w[0].q.len() {
            let predicted = w[0].q[j] + w[0].q_dot[j] * 0.01;
            assert!((w[1].q[j] - predicted).abs() < 1e-12, "tick {} joint {j}", w[0].tick);
        }
    }
}

#[test]
fn moving_obstacle_is_where_its_velocity_puts_it() {
    let mut s = Scenario::new("drift", 1.0, 0);
    s.mode = Some(ControlMode::Single { arm: Side::Right });
    s.targets.push(home_target(Side::Right, 1.0));
    let (start, velocity) = ([-0.6, -0.3, 0.3], [0.05, 0.02, -0.05]);
    s.moving_obstacles.push(MovingObstacle { start, velocity, from: 0.0, until: 0.5 });
    let out = run(&s, None);
    let chain: KinematicChain = icub_like_model();
    let parts: Vec<BodyPart> = chain.parts().iter().map(|p| p.part).collect();
    for t in &out.ticks {
        let frames = chain.frames(&t.q).unwrap();
        let expect = if t.time < 0.5 {
            let secs = t.tick as f64 * 0.01;
            let p = Vector3::from(start) + secs * Vector3::from(velocity);
            surface_distance(&chain, &frames, &parts, &[p])
        } else {
            f64::INFINITY
        };
        assert_eq!(t.min_obstacle_distance, expect, "tick {}", t.tick);
    }
}

#[test]
fn csv_survives_a_round_trip() {
    let out = run(&experiment("5-2").unwrap(), Some(120));
    let bytes = csv_bytes(&out);
    let back = read_csv(bytes.as_slice()).unwrap();
    let mut again = Vec::new();
    write_csv(&mut again, &back).unwrap();
    assert_eq!(bytes, again);
}

#[test]
fn runs_are_bit_identical() {
    for name in ["3", "5-3"] {
        let s = experiment(name).unwrap();
        assert_eq!(csv_bytes(&run(&s, Some(400))), csv_bytes(&run(&s, Some(400))), "{name}");
    }
}

#[test]
fn unresolvable_references_fail_before_running() {
    let mut s = Scenario::new("bad", 1.0, 0);
    s.model = "no/such/model.toml".into();
    let err = run_scenario(&s, Some(Path::new("/nonexistent")), &Overrides::default(), &RunOptions::default());
    assert!(matches!(err, Err(SimError::Model(..))), "{err:?}");

    let mut s = Scenario::new("bad", 1.0, 0);
    s.config = "builtin:nothing".into();
    assert!(run_scenario(&s, None, &Overrides::default(), &RunOptions::default()).is_err());

    let s = Scenario::new("bad", 1.0, 0);
    let overrides = Overrides { model: None, config: Some("/nonexistent/config.toml".into()) };
    assert!(run_scenario(&s, None, &overrides, &RunOptions::default()).is_err());
}

#[test]
fn malformed_scenarios_are_rejected() {
    assert!(Scenario::from_toml_str("name = \"x\"\nduration = 1.0\n").is_err());
    let good = experiment("2").unwrap().to_toml_string().unwrap();
    assert!(Scenario::from_toml_str(&good.replace("duration = 36.0", "duration = -1.0")).is_err());
    assert!(Scenario::from_toml_str(&format!("{good}\nsurprise = 1\n")).is_err());
}

#[test]
fn targets_for_an_uncontrolled_arm_are_rejected() {
    let mut s = Scenario::new("wrong-arm", 1.0, 0);
    s.mode = Some(ControlMode::Single { arm: Side::Right });
    s.targets.push(home_target(Side::Left, 1.0));
    assert!(run_scenario(&s, None, &Overrides::default(), &RunOptions::default()).is_err());
}

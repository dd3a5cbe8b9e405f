//! Scenario generators: the reachability grid, circular references and the
//! bundled experiment files.

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{CirclePlane, CircleSpec, DiscreteTarget, MovingObstacle, Scenario};
use super::SimError;
use crate::kinematics::Side;
use crate::layout::ControlMode;

/// Grid coordinates of the reachability experiment, metres.
pub const GRID_X: [f64; 3] = [-0.23, -0.19, -0.15];
pub const GRID_Y: [f64; 3] = [0.11, 0.15, 0.19];
pub const GRID_Z: [f64; 3] = [0.08, 0.12, 0.16];
/// Axis and angle of the two grid orientations.
pub const O1: [f64; 4] = [-0.15, -0.79, 0.59, 3.06];
pub const O2: [f64; 4] = [-0.11, 0.99, 0.02, 3.14];
/// The two alternating poses of the smoothness experiment.
pub const P1: ([f64; 3], [f64; 4]) = ([-0.23, 0.26, 0.02], [-0.15, -0.79, 0.59, 3.06]);
pub const P2: ([f64; 3], [f64; 4]) = ([-0.26, 0.03, 0.03], [-0.11, 0.99, 0.01, 3.14]);
/// Shift applied to the grid to land it in the bundled model's workspace.
/// The bundled arm reaches the grid as published, so the shift is zero.
pub const GRID_OFFSET: [f64; 3] = [0.0, 0.0, 0.0];
/// Seconds allowed per target in the bundled scenarios.
pub const TARGET_TIMEOUT: f64 = 10.0;

pub const EXPERIMENTS: [&str; 7] = ["1", "2", "3", "4", "5-1", "5-2", "5-3"];

/// Mirror an orientation through the sagittal (x-z) plane.
pub fn mirror_orientation(o: [f64; 4]) -> [f64; 4] {
    [-o[0], o[1], -o[2], o[3]]
}

/// The 27 grid positions in a seeded random order (ChaCha8, Fisher-Yates
/// shuffle), each with o1 or o2 drawn by a fair coin from the same stream.
pub fn reachability_grid(seed: u64, offset: [f64; 3]) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(27);
    for x in GRID_X {
        for y in GRID_Y {
            for z in GRID_Z {
                positions.push([x + offset[0], y + offset[1], z + offset[2]]);
            }
        }
    }
    positions.shuffle(&mut rng);
    let mut s = Scenario::new("exp1-reachability", 0.0, seed);
    s.description = format!(
        "3x3x3 reaching grid in random order with randomly alternated orientations, offset {offset:?}, \
         {TARGET_TIMEOUT} s per target"
    );
    s.mode = Some(ControlMode::Single { arm: Side::Right });
    s.dwell = 0.5;
    for position in positions {
        let orientation = if rng.random_bool(0.5) { O1 } else { O2 };
        s.targets.push(DiscreteTarget { arm: Side::Right, position, orientation, timeout: TARGET_TIMEOUT });
    }
    s.duration = s.targets.len() as f64 * (TARGET_TIMEOUT + s.dwell) + 1.0;
    s
}

/// Samples `spec` at `t = start + k period` for `k = 0..=ticks`.
pub fn circle_reference(spec: &CircleSpec, period: f64, ticks: usize) -> Result<Vec<Vector3<f64>>, SimError> {
    if !(spec.radius > 0.0) {
        return Err(SimError::Scenario(format!("circle radius must be positive, got {}", spec.radius)));
    }
    if !(period > 0.0) || !(spec.period > 0.0) {
        return Err(SimError::Scenario("periods must be positive".into()));
    }
    Ok((0..=ticks).map(|k| spec.point(spec.start + k as f64 * period)).collect())
}

/// The other arm's circle: the mirror image through the sagittal plane,
/// running the opposite way. With zero phase the arms start half a turn apart.
pub fn counter_rotating(spec: &CircleSpec) -> CircleSpec {
    let mut other = spec.clone();
    other.arm = spec.arm.other();
    other.center[1] = -spec.center[1];
    other.phase = std::f64::consts::PI - spec.phase;
    other.direction = -spec.direction;
    other.orientation = mirror_orientation(spec.orientation);
    other
}

fn p2p(name: &str, seed: u64, rounds: usize) -> Scenario {
    let mut s = Scenario::new(name, 0.0, seed);
    s.mode = Some(ControlMode::Single { arm: Side::Right });
    s.dwell = 1.5;
    for _ in 0..rounds {
        for (position, orientation) in [P1, P2] {
            s.targets.push(DiscreteTarget { arm: Side::Right, position, orientation, timeout: TARGET_TIMEOUT });
        }
    }
    s
}

fn obstacle_run(name: &str, start: [f64; 3], velocity: [f64; 3], until: f64) -> Scenario {
    let mut s = p2p(name, 5, 2);
    s.description = format!(
        "point-to-point between the two smoothness poses while a virtual point obstacle moves at {velocity:?} m/s, \
         {TARGET_TIMEOUT} s per target"
    );
    s.moving_obstacles.push(MovingObstacle { start, velocity, from: 0.0, until });
    s.duration = 30.0;
    s
}

/// One of the bundled experiment scenarios by name (`1`, `2`, `3`, `4`,
/// `5-1`, `5-2`, `5-3`).
pub fn experiment(name: &str) -> Result<Scenario, SimError> {
    let s = match name {
        "1" => reachability_grid(1, GRID_OFFSET),
        "2" => {
            let mut s = p2p("exp2-smoothness", 2, 3);
            s.description = format!("alternating point-to-point reaches between two poses, {TARGET_TIMEOUT} s per target");
            s.duration = 36.0;
            s
        }
        "3" => {
            let mut s = Scenario::new("exp3-circle", 24.0, 3);
            s.description = "streamed circle of radius 0.08 m after a 4 s lead-in".into();
            s.mode = Some(ControlMode::Single { arm: Side::Right });
            s.circles.push(CircleSpec {
                arm: Side::Right,
                center: [-0.25, 0.15, 0.08],
                radius: 0.08,
                period: 10.0,
                plane: CirclePlane::Yz,
                phase: 0.0,
                direction: 1.0,
                orientation: O1,
                start: 4.0,
            });
            s
        }
        "4" => {
            let mut s = Scenario::new("exp4-dual-circles", 24.0, 4);
            s.description = "counter-rotating streamed circles of radius 0.1 m, right arm primary".into();
            s.mode = Some(ControlMode::Dual { primary: Side::Right });
            let right = CircleSpec {
                arm: Side::Right,
                center: [-0.25, 0.1, 0.08],
                radius: 0.1,
                period: 10.0,
                plane: CirclePlane::Yz,
                phase: 0.0,
                direction: 1.0,
                orientation: O1,
                start: 4.0,
            };
            s.circles.push(counter_rotating(&right));
            s.circles.push(right);
            s
        }
        "5-1" => obstacle_run("exp5-1-obstacle-y", [-0.45, 0.7, 0.1], [0.0, -0.05, 0.0], 30.0),
        "5-2" => obstacle_run("exp5-2-obstacle-x", [-0.7, 0.15, 0.2], [0.05, 0.0, 0.0], 9.0),
        "5-3" => obstacle_run("exp5-3-obstacle-z", [-0.25, 0.15, 0.5], [0.0, 0.0, -0.05], 8.0),
        other => return Err(SimError::Scenario(format!("unknown experiment {other:?}, expected one of {EXPERIMENTS:?}"))),
    };
    s.validate()?;
    Ok(s)
}

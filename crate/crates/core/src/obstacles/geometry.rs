use nalgebra::Vector3;

use super::projection::toward;
use super::{proximity_threat, AvoidanceParams, CollisionPoint, Source};
use crate::kinematics::{BodyPart, BodyPartKind, KinematicChain, RobotFrames, SurfaceSample};
use crate::layout::ControlMode;

/// Distances closer than this count as ties.
const TIE: f64 = 1e-12;

/// Closest pair between two point sets as `(distance, index in a, index in b)`.
///
/// Iterates `b` in the outer loop so near-ties resolve to the lowest index in
/// `b`, then in `a`.
pub fn closest_pair(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> Option<(f64, usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for (j, q) in b.iter().enumerate() {
        for (i, p) in a.iter().enumerate() {
            let d = (q - p).norm();
            if best.is_none_or(|(bd, _, _)| d < bd - TIE) {
                best = Some((d, i, j));
            }
        }
    }
    best
}

/// Smallest distance between any surface sample of `parts` and any of `points`;
/// infinite when either set is empty.
pub fn surface_distance(chain: &KinematicChain, frames: &RobotFrames, parts: &[BodyPart], points: &[Vector3<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for &part in parts {
        for s in chain.sample_positions(frames, part) {
            for p in points {
                best = best.min((p - s).norm());
            }
        }
    }
    best
}

fn part_tag(part: BodyPart) -> u32 {
    let kind = match part.kind {
        BodyPartKind::Torso => 0,
        BodyPartKind::UpperArm => 1,
        BodyPartKind::Forearm => 2,
        BodyPartKind::Hand => 3,
    };
    let side = part.side.map_or(0, |s| 1 + s.index() as u32);
    side * 4 + kind
}

#[allow(clippy::too_many_arguments)]
fn point_from_pair(
    source: Source,
    part: BodyPart,
    sample: &SurfaceSample,
    robot_point: &Vector3<f64>,
    obstacle: &Vector3<f64>,
    d: f64,
    frames: &RobotFrames,
    params: &AvoidanceParams,
    tag: u32,
) -> CollisionPoint {
    let threat = proximity_threat(d);
    CollisionPoint {
        source,
        part,
        link: sample.link,
        local: sample.point,
        direction: toward(robot_point, obstacle, &frames.link(sample.link).translation.vector),
        threat,
        sensed_threat: threat,
        gain: params.gains.get(source),
        remaining_survival: 0.0,
        tag,
        distance: d,
    }
}

/// Self-collision points: hands and forearms of the controlled arms against
/// the torso and, for the secondary arm only, against the primary arm.
pub fn self_collision_points(
    chain: &KinematicChain,
    frames: &RobotFrames,
    params: &AvoidanceParams,
    mode: ControlMode,
) -> Vec<CollisionPoint> {
    let mut out = Vec::new();
    for side in mode.arms() {
        let mut obstacles = vec![BodyPart::TORSO];
        if mode.secondary() == Some(side) {
            let p = mode.primary();
            obstacles.extend([BodyPartKind::Hand, BodyPartKind::Forearm, BodyPartKind::UpperArm].map(|k| BodyPart::arm(p, k)));
        }
        for kind in [BodyPartKind::Hand, BodyPartKind::Forearm] {
            let part = BodyPart::arm(side, kind);
            let Some(spec) = chain.part(part) else { continue };
            let robot = chain.sample_positions(frames, part);
            for &obstacle in &obstacles {
                let other = chain.sample_positions(frames, obstacle);
                let Some((d, i, j)) = closest_pair(&robot, &other) else { continue };
                if d < params.self_collision_threshold {
                    out.push(point_from_pair(
                        Source::SelfCollision,
                        part,
                        &spec.samples[i],
                        &robot[i],
                        &other[j],
                        d,
                        frames,
                        params,
                        part_tag(obstacle),
                    ));
                }
            }
        }
    }
    out
}

/// Body parts that can carry collision points: the torso and the controlled arms.
pub fn controlled_parts(mode: ControlMode) -> Vec<BodyPart> {
    let mut parts = vec![BodyPart::TORSO];
    for side in mode.arms() {
        parts.extend([BodyPartKind::UpperArm, BodyPartKind::Forearm, BodyPartKind::Hand].map(|k| BodyPart::arm(side, k)));
    }
    parts
}

/// One point per controlled body part closer than the threshold to the sampled static object.
pub fn static_obstacle_points(
    samples: &[Vector3<f64>],
    chain: &KinematicChain,
    frames: &RobotFrames,
    params: &AvoidanceParams,
    mode: ControlMode,
) -> Vec<CollisionPoint> {
    let mut out = Vec::new();
    if samples.is_empty() {
        return out;
    }
    for part in controlled_parts(mode) {
        let Some(spec) = chain.part(part) else { continue };
        let robot = chain.sample_positions(frames, part);
        let Some((d, i, j)) = closest_pair(&robot, samples) else { continue };
        if d < params.self_collision_threshold {
            out.push(point_from_pair(Source::Static, part, &spec.samples[i], &robot[i], &samples[j], d, frames, params, j as u32));
        }
    }
    out
}

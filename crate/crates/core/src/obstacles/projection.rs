use nalgebra::Vector3;

use super::{pps_threat, AvoidanceParams, CollisionPoint, ObstacleError, ProximityReading, Source, TactileContact, VisualKeypoint};
use crate::kinematics::{BodyPart, KinematicChain, RobotFrames};

/// Unit vector from `from` to `to`; falls back to the direction away from
/// the link origin when the two coincide.
pub(super) fn toward(from: &Vector3<f64>, to: &Vector3<f64>, link_origin: &Vector3<f64>) -> Vector3<f64> {
    let d = to - from;
    let n = d.norm();
    if n > 1e-12 {
        return d / n;
    }
    let out = from - link_origin;
    let m = out.norm();
    if m > 1e-12 {
        out / m
    } else {
        Vector3::x()
    }
}

/// One point per body part, at the surface sample nearest to the nearest keypoint.
///
/// Ties go to the lower sample index, then the lower keypoint index.
pub fn project_visual(
    keypoints: &[VisualKeypoint],
    chain: &KinematicChain,
    frames: &RobotFrames,
    params: &AvoidanceParams,
    parts: &[BodyPart],
) -> Vec<CollisionPoint> {
    let kps: Vec<Vector3<f64>> = keypoints.iter().map(|k| Vector3::from(k.position)).collect();
    let mut out = Vec::new();
    if kps.is_empty() {
        return out;
    }
    for &part in parts {
        let Some(spec) = chain.part(part) else { continue };
        let mut best: Option<(f64, usize, usize)> = None;
        for (si, s) in spec.samples.iter().enumerate() {
            let p = frames.point(s.link, &s.point);
            for (ki, k) in kps.iter().enumerate() {
                let d = (k - p).norm();
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, si, ki));
                }
            }
        }
        let Some((d, si, ki)) = best else { continue };
        if d > params.pps_range {
            continue;
        }
        let s = &spec.samples[si];
        let p = frames.point(s.link, &s.point);
        let threat = pps_threat(d, params.pps_range);
        out.push(CollisionPoint {
            source: Source::Visual,
            part,
            link: s.link,
            local: s.point,
            direction: toward(&p, &kps[ki], &frames.link(s.link).translation.vector),
            threat,
            sensed_threat: threat,
            gain: params.gains.visual,
            remaining_survival: params.survival_time,
            tag: 0,
            distance: d,
        });
    }
    out
}

/// One point per reading closer than the field range, at the sensor with the beam as direction.
pub fn project_proximity(
    readings: &[ProximityReading],
    chain: &KinematicChain,
    frames: &RobotFrames,
    params: &AvoidanceParams,
) -> Result<Vec<CollisionPoint>, ObstacleError> {
    let mut out = Vec::new();
    for r in readings {
        let (index, sensor) = chain
            .proximity_sensors()
            .iter()
            .enumerate()
            .find(|(_, s)| s.id == r.sensor)
            .ok_or_else(|| ObstacleError::UnknownSensor(r.sensor.clone()))?;
        if !(r.distance >= 0.0) {
            return Err(ObstacleError::InvalidEvent(format!("proximity distance {}", r.distance)));
        }
        if r.distance >= params.pps_range {
            continue;
        }
        let rot = frames.link(sensor.link).rotation;
        let threat = pps_threat(r.distance, params.pps_range);
        out.push(CollisionPoint {
            source: Source::Proximity,
            part: chain.part_of(sensor.link),
            link: sensor.link,
            local: sensor.position,
            direction: (rot * sensor.direction).normalize(),
            threat,
            sensed_threat: threat,
            gain: params.gains.proximity,
            remaining_survival: params.survival_time,
            tag: index as u32,
            distance: r.distance,
        });
    }
    Ok(out)
}

/// Merges activated taxels into super contacts.
///
/// Per link, the strongest unassigned taxel seeds a cluster that takes every
/// unassigned taxel within the cluster radius of it. The contact sits at the
/// cluster centroid, points along the seed's inward normal and takes the seed
/// pressure as threat.
pub fn cluster_tactile(
    contacts: &[TactileContact],
    chain: &KinematicChain,
    frames: &RobotFrames,
    params: &AvoidanceParams,
) -> Vec<CollisionPoint> {
    let mut active: Vec<&TactileContact> = contacts.iter().filter(|c| c.pressure >= params.pressure_threshold).collect();
    // strongest first; ties by link, then taxel id
    active.sort_by(|a, b| {
        b.pressure.total_cmp(&a.pressure).then(a.link.cmp(&b.link)).then(a.taxel.cmp(&b.taxel))
    });
    let mut assigned = vec![false; active.len()];
    let mut out = Vec::new();
    for i in 0..active.len() {
        if assigned[i] {
            continue;
        }
        let seed = active[i];
        let seed_pos = Vector3::from(seed.position);
        let mut sum = Vector3::zeros();
        let mut count = 0.0;
        for j in i..active.len() {
            let c = active[j];
            if !assigned[j] && c.link == seed.link && (Vector3::from(c.position) - seed_pos).norm() <= params.cluster_radius {
                assigned[j] = true;
                sum += Vector3::from(c.position);
                count += 1.0;
            }
        }
        let threat = (seed.pressure / params.max_pressure).min(1.0);
        // taxel normals point out of the skin; the obstacle lies along them
        let normal = frames.link(seed.link).rotation * Vector3::from(seed.normal);
        out.push(CollisionPoint {
            source: Source::Tactile,
            part: chain.part_of(seed.link),
            link: seed.link,
            local: sum / count,
            direction: normal.normalize(),
            threat,
            sensed_threat: threat,
            gain: params.gains.tactile,
            remaining_survival: params.survival_time,
            tag: seed.taxel,
            distance: 0.0,
        });
    }
    out
}

//! Obstacles as collision points and their half-space rows on joint velocities.
//!
//! Every modality ends up as a [`CollisionPoint`]: a point on the robot, the
//! direction towards the obstacle, a threat level and a gain. Each point
//! becomes one row `n' J_C q_dot <= (k1 - V a_t) k2`.

mod geometry;
mod projection;
mod queue;
mod rows;
mod set;

pub use geometry::{closest_pair, controlled_parts, self_collision_points, static_obstacle_points, surface_distance};
pub use projection::{cluster_tactile, project_proximity, project_visual};
pub use queue::EventQueue;
pub use rows::{constraint_rows, retreat_rhs};
pub use set::CollisionSet;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{BodyPart, BodyPartKind, LinkId};

#[derive(Debug, Error, PartialEq)]
pub enum ObstacleError {
    #[error("unknown proximity sensor `{0}`")]
    UnknownSensor(String),
    #[error("invalid sensor event: {0}")]
    InvalidEvent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Visual,
    Proximity,
    Tactile,
    #[serde(rename = "self")]
    SelfCollision,
    Static,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Visual => "visual",
            Source::Proximity => "proximity",
            Source::Tactile => "tactile",
            Source::SelfCollision => "self",
            Source::Static => "static",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionPoint {
    pub source: Source,
    pub part: BodyPart,
    /// Link carrying the projected point.
    pub link: LinkId,
    /// Projected point in the link frame.
    pub local: Vector3<f64>,
    /// Unit direction from the robot towards the obstacle, world frame.
    pub direction: Vector3<f64>,
    /// Current threat in `[0, 1]`.
    pub threat: f64,
    /// Threat at the last observation.
    pub sensed_threat: f64,
    pub gain: f64,
    pub remaining_survival: f64,
    /// Distinguishes points of one source on one part (sensor index, taxel id).
    pub tag: u32,
    /// Robot-obstacle distance at the last observation, m.
    pub distance: f64,
}

impl CollisionPoint {
    pub fn key(&self) -> (Source, BodyPart, u32) {
        (self.source, self.part, self.tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeypointKind {
    Body,
    Hand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisualKeypoint {
    pub position: [f64; 3],
    #[serde(default = "default_kind")]
    pub kind: KeypointKind,
}

fn default_kind() -> KeypointKind {
    KeypointKind::Body
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProximityReading {
    pub sensor: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TactileContact {
    pub taxel: u32,
    pub link: LinkId,
    /// Taxel position in the link frame.
    pub position: [f64; 3],
    /// Taxel normal in the link frame.
    pub normal: [f64; 3],
    pub pressure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SensorEvent {
    Visual(VisualKeypoint),
    Proximity(ProximityReading),
    Tactile(TactileContact),
}

impl SensorEvent {
    pub fn validate(&self) -> Result<(), ObstacleError> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            SensorEvent::Visual(k) if !finite(&k.position) => {
                Err(ObstacleError::InvalidEvent("non-finite keypoint".into()))
            }
            SensorEvent::Proximity(r) if !(r.distance >= 0.0) => {
                Err(ObstacleError::InvalidEvent(format!("proximity distance {}", r.distance)))
            }
            SensorEvent::Tactile(c) => {
                if !(c.pressure >= 0.0) || !finite(&c.position) || !finite(&c.normal) {
                    return Err(ObstacleError::InvalidEvent("tactile contact".into()));
                }
                let norm = Vector3::from(c.normal).norm();
                if (norm - 1.0).abs() > 1e-6 {
                    return Err(ObstacleError::InvalidEvent(format!("taxel normal has length {norm}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// `k2` per body part kind, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartSpeeds {
    pub torso: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    pub hand: f64,
}

impl PartSpeeds {
    pub fn get(&self, kind: BodyPartKind) -> f64 {
        match kind {
            BodyPartKind::Torso => self.torso,
            BodyPartKind::UpperArm => self.upper_arm,
            BodyPartKind::Forearm => self.forearm,
            BodyPartKind::Hand => self.hand,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalityGains {
    pub tactile: f64,
    pub self_collision: f64,
    pub proximity: f64,
    pub visual: f64,
    pub static_obstacle: f64,
}

impl ModalityGains {
    pub fn get(&self, source: Source) -> f64 {
        match source {
            Source::Visual => self.visual,
            Source::Proximity => self.proximity,
            Source::Tactile => self.tactile,
            Source::SelfCollision => self.self_collision,
            Source::Static => self.static_obstacle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvoidanceParams {
    pub k1: f64,
    pub k2: PartSpeeds,
    /// Reach of the peripersonal field, m.
    pub pps_range: f64,
    /// Lifetime of an unrefreshed sensed point, s.
    pub survival_time: f64,
    pub pressure_threshold: f64,
    /// Pressure mapped to threat 1.
    pub max_pressure: f64,
    /// Taxels closer than this to the strongest taxel join its super contact, m.
    pub cluster_radius: f64,
    /// Body-part pairs closer than this produce self and static points, m.
    pub self_collision_threshold: f64,
    pub gains: ModalityGains,
}

impl Default for AvoidanceParams {
    fn default() -> Self {
        Self {
            k1: 0.3,
            k2: PartSpeeds { torso: 0.06, upper_arm: 0.06, forearm: 0.33, hand: 0.53 },
            pps_range: 0.45,
            survival_time: 2.0,
            pressure_threshold: 0.05,
            max_pressure: 1.0,
            cluster_radius: 0.04,
            self_collision_threshold: 0.06,
            gains: ModalityGains { tactile: 1.3, self_collision: 1.2, proximity: 1.1, visual: 1.0, static_obstacle: 1.0 },
        }
    }
}

impl AvoidanceParams {
    pub fn validate(&self) -> Result<(), String> {
        let g = &self.gains;
        let values = [
            ("k1", self.k1),
            ("k2.torso", self.k2.torso),
            ("k2.upper_arm", self.k2.upper_arm),
            ("k2.forearm", self.k2.forearm),
            ("k2.hand", self.k2.hand),
            ("pps_range", self.pps_range),
            ("survival_time", self.survival_time),
            ("pressure_threshold", self.pressure_threshold),
            ("max_pressure", self.max_pressure),
            ("cluster_radius", self.cluster_radius),
            ("self_collision_threshold", self.self_collision_threshold),
            ("gains.tactile", g.tactile),
            ("gains.self_collision", g.self_collision),
            ("gains.proximity", g.proximity),
            ("gains.visual", g.visual),
            ("gains.static_obstacle", g.static_obstacle),
        ];
        for (name, v) in values {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("avoidance parameter {name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Threat from a distance under the linear peripersonal field.
pub fn pps_threat(distance: f64, range: f64) -> f64 {
    (1.0 - distance / range).clamp(0.0, 1.0)
}

/// Threat from a self or static body-part distance.
pub fn proximity_threat(distance: f64) -> f64 {
    (1.0 - 50.0 * distance / 3.0).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threat_endpoints() {
        assert_eq!(pps_threat(0.0, 0.45), 1.0);
        assert_eq!(pps_threat(0.45, 0.45), 0.0);
        assert!((pps_threat(0.225, 0.45) - 0.5).abs() < 1e-15);
        assert_eq!(proximity_threat(0.0), 1.0);
        assert!(proximity_threat(0.06).abs() < 1e-12);
        assert!((proximity_threat(0.02) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn defaults_are_valid() {
        assert!(AvoidanceParams::default().validate().is_ok());
        let mut p = AvoidanceParams::default();
        p.k2.hand = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn events_are_checked() {
        let bad = SensorEvent::Proximity(ProximityReading { sensor: "x".into(), distance: -0.1 });
        assert!(bad.validate().is_err());
        let tilted = SensorEvent::Tactile(TactileContact {
            taxel: 0,
            link: LinkId::Torso(0),
            position: [0.0; 3],
            normal: [1.0, 1.0, 0.0],
            pressure: 0.5,
        });
        assert!(tilted.validate().is_err());
    }
}

use std::collections::BTreeMap;

use super::{CollisionPoint, Source};
use crate::kinematics::BodyPart;

/// Sensed collision points that outlive their observation and fade out.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CollisionSet {
    points: BTreeMap<(Source, BodyPart, u32), CollisionPoint>,
}

impl CollisionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn clear(&mut self) {
        self.points.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = &CollisionPoint> {
        self.points.values()
    }

    /// Ages every point by `dt`: threat falls linearly from the sensed value
    /// to zero over `survival_time`; expired points are removed.
    pub fn decay_and_expire(&mut self, dt: f64, survival_time: f64) {
        self.points.retain(|_, p| {
            p.remaining_survival = (p.remaining_survival - dt).max(0.0);
            if p.remaining_survival <= 1e-9 * survival_time {
                return false;
            }
            p.threat = p.sensed_threat * p.remaining_survival / survival_time;
            true
        });
    }

    /// One tick: unobserved points decay, observed ones are reset to their
    /// sensed threat and full lifetime.
    pub fn update(&mut self, fresh: Vec<CollisionPoint>, dt: f64, survival_time: f64) {
        let fresh_keys: Vec<_> = fresh.iter().map(|p| p.key()).collect();
        let stale: Vec<_> = self.points.keys().filter(|k| !fresh_keys.contains(k)).copied().collect();
        let mut aged = CollisionSet { points: stale.iter().filter_map(|k| self.points.remove_entry(k)).collect() };
        aged.decay_and_expire(dt, survival_time);
        self.points = aged.points;
        for mut p in fresh {
            p.remaining_survival = survival_time;
            p.threat = p.sensed_threat;
            self.points.entry(p.key()).or_insert(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{BodyPartKind, LinkId, Side};
    use nalgebra::Vector3;

    fn point(threat: f64) -> CollisionPoint {
        CollisionPoint {
            source: Source::Visual,
            part: BodyPart::arm(Side::Left, BodyPartKind::Hand),
            link: LinkId::Arm(Side::Left, 6),
            local: Vector3::zeros(),
            direction: Vector3::x(),
            threat,
            sensed_threat: threat,
            gain: 1.0,
            remaining_survival: 2.0,
            tag: 0,
            distance: 0.1,
        }
    }

    #[test]
    fn unrefreshed_point_fades_and_expires() {
        let mut set = CollisionSet::new();
        set.update(vec![point(0.8)], 0.01, 2.0);
        let mut prev = 0.8;
        for tick in 1..=200 {
            set.update(vec![], 0.01, 2.0);
            if tick == 100 {
                assert!((set.iter().next().unwrap().threat - 0.4).abs() < 1e-12);
            }
            if let Some(p) = set.iter().next() {
                assert!(p.threat <= prev);
                prev = p.threat;
            }
        }
        assert!(set.is_empty());
    }

    #[test]
    fn refreshed_point_tracks_sensor() {
        let mut set = CollisionSet::new();
        for k in 0..50 {
            let sensed = 0.5 + 0.01 * k as f64;
            set.update(vec![point(sensed)], 0.01, 2.0);
            assert_eq!(set.len(), 1);
            assert_eq!(set.iter().next().unwrap().threat, sensed);
        }
    }
}

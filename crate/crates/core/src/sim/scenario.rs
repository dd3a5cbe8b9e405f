//! Scenario files: what the robot is asked to do and what it meets on the way.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::builtin;
use crate::controller::ControllerConfig;
use crate::kinematics::rotation::axis_angle_from_parts;
use crate::kinematics::{KinematicChain, Pose, Side};
use crate::layout::ControlMode;
use crate::obstacles::SensorEvent;

pub const SCENARIO_FORMAT_VERSION: u32 = 1;
pub const BUILTIN_MODEL: &str = "builtin:icub-like";
pub const BUILTIN_CONFIG: &str = "builtin:default";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub position: f64,
    pub orientation: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { position: 0.005, orientation: 0.1 }
    }
}

/// A point-to-point goal. `orientation` is an axis (need not be unit) and an
/// angle in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteTarget {
    pub arm: Side,
    pub position: [f64; 3],
    pub orientation: [f64; 4],
    /// Seconds allowed before the target is given up.
    pub timeout: f64,
}

impl DiscreteTarget {
    pub fn pose(&self) -> Pose {
        let [x, y, z, angle] = self.orientation;
        Pose::new(Vector3::from(self.position), axis_angle_from_parts([x, y, z], angle))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CirclePlane {
    Xy,
    Yz,
    Xz,
}

impl CirclePlane {
    fn axes(self) -> (Vector3<f64>, Vector3<f64>) {
        match self {
            CirclePlane::Xy => (Vector3::x(), Vector3::y()),
            CirclePlane::Yz => (Vector3::y(), Vector3::z()),
            CirclePlane::Xz => (Vector3::x(), Vector3::z()),
        }
    }
}

/// A streamed circular reference. Before `start` the arm is driven to the
/// first point as an ordinary reach; from `start` on the reference is
/// streamed one point per tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleSpec {
    pub arm: Side,
    pub center: [f64; 3],
    pub radius: f64,
    pub period: f64,
    pub plane: CirclePlane,
    /// Angle at `start`, radians.
    pub phase: f64,
    /// +1 counter-clockwise in the plane's (u, v) axes, -1 clockwise.
    pub direction: f64,
    pub orientation: [f64; 4],
    pub start: f64,
}

impl CircleSpec {
    pub fn angle(&self, t: f64) -> f64 {
        self.phase + self.direction * std::f64::consts::TAU * (t - self.start).max(0.0) / self.period
    }

    pub fn point(&self, t: f64) -> Vector3<f64> {
        let (u, v) = self.plane.axes();
        let a = self.angle(t);
        Vector3::from(self.center) + self.radius * (a.cos() * u + a.sin() * v)
    }

    pub fn pose(&self, t: f64) -> Pose {
        let [x, y, z, angle] = self.orientation;
        Pose::new(self.point(t), axis_angle_from_parts([x, y, z], angle))
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(SimError::Scenario(format!("circle radius must be positive, got {}", self.radius)));
        }
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(SimError::Scenario(format!("circle period must be positive, got {}", self.period)));
        }
        if self.direction != 1.0 && self.direction != -1.0 {
            return Err(SimError::Scenario("circle direction must be 1 or -1".into()));
        }
        let finite = self.center.iter().chain(&self.orientation).chain([&self.phase, &self.start]).all(|v| v.is_finite());
        if !finite || self.start < 0.0 {
            return Err(SimError::Scenario("circle fields must be finite and start >= 0".into()));
        }
        Ok(())
    }
}

/// A noiseless point obstacle moving at constant velocity; its position at
/// tick k is `start + (k t_s) velocity`. It is perceived only while
/// `from <= t < until`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovingObstacle {
    pub start: [f64; 3],
    pub velocity: [f64; 3],
    pub from: f64,
    pub until: f64,
}

impl MovingObstacle {
    pub fn position_at_tick(&self, tick: u64, period: f64) -> Vector3<f64> {
        Vector3::from(self.start) + (tick as f64 * period) * Vector3::from(self.velocity)
    }

    pub fn active(&self, t: f64) -> bool {
        self.from <= t && t < self.until
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedEvent {
    pub time: f64,
    pub event: SensorEvent,
}

/// Axis-aligned box whose surface is sampled into static obstacle points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub spacing: f64,
}

impl StaticBox {
    pub fn samples(&self) -> Vec<Vector3<f64>> {
        let lo = Vector3::from(self.min);
        let hi = Vector3::from(self.max);
        let steps: Vec<usize> = (0..3).map(|i| ((hi[i] - lo[i]) / self.spacing).ceil().max(1.0) as usize).collect();
        let coord = |i: usize, k: usize| lo[i] + (hi[i] - lo[i]) * k as f64 / steps[i] as f64;
        let mut out = Vec::new();
        for i in 0..=steps[0] {
            for j in 0..=steps[1] {
                for k in 0..=steps[2] {
                    let on_face = i == 0 || i == steps[0] || j == 0 || j == steps[1] || k == 0 || k == steps[2];
                    if on_face {
                        out.push(Vector3::new(coord(0, i), coord(1, j), coord(2, k)));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Model file path (relative to the scenario file) or `builtin:icub-like`.
    pub model: String,
    /// Controller config path or `builtin:default`.
    pub config: String,
    pub duration: f64,
    pub seed: u64,
    /// Overrides the config's control mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ControlMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_posture: Option<Vec<f64>>,
    #[serde(default)]
    pub tolerance: Tolerance,
    /// Move to the next target once the current one is reached, after `dwell`
    /// seconds. When false a target is held until its timeout.
    #[serde(default = "default_true")]
    pub advance_on_reach: bool,
    #[serde(default)]
    pub dwell: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub static_points: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<DiscreteTarget>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub circles: Vec<CircleSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub moving_obstacles: Vec<MovingObstacle>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<TimedEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub static_boxes: Vec<StaticBox>,
}

fn default_true() -> bool {
    true
}

impl Scenario {
    /// An empty scenario on the bundled model and config.
    pub fn new(name: &str, duration: f64, seed: u64) -> Self {
        Self {
            format_version: SCENARIO_FORMAT_VERSION,
            name: name.to_string(),
            description: String::new(),
            model: BUILTIN_MODEL.into(),
            config: BUILTIN_CONFIG.into(),
            duration,
            seed,
            mode: None,
            initial_posture: None,
            tolerance: Tolerance::default(),
            advance_on_reach: true,
            dwell: 0.0,
            static_points: Vec::new(),
            targets: Vec::new(),
            circles: Vec::new(),
            moving_obstacles: Vec::new(),
            events: Vec::new(),
            static_boxes: Vec::new(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let s: Scenario = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> Result<String, SimError> {
        toml::to_string(self).map_err(|e| SimError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    /// Checks everything that does not need the model or config.
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Scenario(m));
        if self.format_version != SCENARIO_FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", self.format_version));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.tolerance.position > 0.0 && self.tolerance.orientation > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(self.dwell >= 0.0) || !self.dwell.is_finite() {
            return bad("dwell must be finite and >= 0".into());
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !(t.timeout > 0.0) || t.position.iter().chain(&t.orientation).any(|v| !v.is_finite()) {
                return bad(format!("target {i}: timeout must be positive and fields finite"));
            }
        }
        for c in &self.circles {
            c.validate()?;
        }
        for side in Side::BOTH {
            let circles = self.circles.iter().filter(|c| c.arm == side).count();
            if circles > 1 || (circles == 1 && self.targets.iter().any(|t| t.arm == side)) {
                return bad(format!("{side} arm has more than one target script"));
            }
        }
        for o in &self.moving_obstacles {
            if o.start.iter().chain(&o.velocity).chain([&o.from]).any(|v| !v.is_finite()) || o.until < o.from {
                return bad("moving obstacle fields must be finite with from <= until".into());
            }
        }
        let mut last = 0.0;
        for e in &self.events {
            if !e.time.is_finite() || e.time < last {
                return bad(format!("event timestamps must be finite and non-decreasing, got {} after {last}", e.time));
            }
            last = e.time;
            e.event.validate().map_err(|err| SimError::Scenario(err.to_string()))?;
        }
        for b in &self.static_boxes {
            let ok = b.min.iter().chain(&b.max).all(|v| v.is_finite())
                && (0..3).all(|i| b.min[i] <= b.max[i])
                && b.spacing > 0.0;
            if !ok {
                return bad("static box needs finite min <= max and positive spacing".into());
            }
        }
        if self.static_points.iter().flatten().any(|v| !v.is_finite()) {
            return bad("static points must be finite".into());
        }
        Ok(())
    }

    pub fn static_samples(&self) -> Vec<Vector3<f64>> {
        let mut out: Vec<Vector3<f64>> = self.static_points.iter().map(|p| Vector3::from(*p)).collect();
        for b in &self.static_boxes {
            out.extend(b.samples());
        }
        out
    }
}

/// Model and config overrides given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model: Option<PathBuf>,
    pub config: Option<PathBuf>,
}

/// Everything a run needs, loaded and cross-checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub chain: KinematicChain,
    pub config: ControllerConfig,
    pub initial: Vec<f64>,
    pub static_samples: Vec<Vector3<f64>>,
}

fn relative(base: Option<&Path>, reference: &str) -> PathBuf {
    match base {
        Some(dir) => dir.join(reference),
        None => PathBuf::from(reference),
    }
}

/// Loads the model and config a scenario points at. `base` is the directory
/// relative references are taken from.
pub fn resolve(scenario: &Scenario, base: Option<&Path>, overrides: &Overrides) -> Result<Resolved, SimError> {
    scenario.validate()?;
    let chain = match (&overrides.model, scenario.model.as_str()) {
        (Some(path), _) => load_model(path)?,
        (None, BUILTIN_MODEL) => builtin::icub_like_model(),
        (None, r) if r.starts_with("builtin:") => return Err(SimError::Ref(r.to_string())),
        (None, r) => load_model(&relative(base, r))?,
    };
    let mut config = match (&overrides.config, scenario.config.as_str()) {
        (Some(path), _) => load_config(path)?,
        (None, BUILTIN_CONFIG) => ControllerConfig::default(),
        (None, r) if r.starts_with("builtin:") => return Err(SimError::Ref(r.to_string())),
        (None, r) => load_config(&relative(base, r))?,
    };
    if let Some(mode) = scenario.mode {
        config.mode = mode;
    }
    config.validate(&chain).map_err(|e| SimError::Config(e.to_string()))?;
    let initial = scenario.initial_posture.clone().unwrap_or_else(|| config.home.clone());
    if initial.len() != chain.dof() || initial.iter().any(|v| !v.is_finite()) {
        return Err(SimError::Scenario(format!("initial posture needs {} finite values", chain.dof())));
    }
    let controls = config.mode.arms();
    for side in scenario.targets.iter().map(|t| t.arm).chain(scenario.circles.iter().map(|c| c.arm)) {
        if !controls.contains(&side) {
            return Err(SimError::Scenario(format!("{side} arm has a target but is not controlled")));
        }
    }
    for e in &scenario.events {
        if let SensorEvent::Proximity(r) = &e.event {
            if chain.proximity_sensor(&r.sensor).is_none() {
                return Err(SimError::Scenario(format!("unknown proximity sensor {:?}", r.sensor)));
            }
        }
    }
    Ok(Resolved { chain, config, initial, static_samples: scenario.static_samples() })
}

fn load_model(path: &Path) -> Result<KinematicChain, SimError> {
    KinematicChain::load(path).map_err(|e| SimError::Model(path.display().to_string(), e.to_string()))
}

fn load_config(path: &Path) -> Result<ControllerConfig, SimError> {
    ControllerConfig::load(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))
}

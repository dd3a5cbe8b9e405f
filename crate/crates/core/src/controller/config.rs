//! Controller configuration file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::builtin::home_posture;
use crate::kinematics::KinematicChain;
use crate::layout::ControlMode;
use crate::obstacles::AvoidanceParams;
use crate::qp::QpSettings;

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("config does not fit the model: {0}")]
    Invalid(String),
}

/// Weights of the four slack blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlackWeights {
    pub primary_position: f64,
    pub primary_orientation: f64,
    pub secondary_position: f64,
    pub secondary_orientation: f64,
}

/// Symmetric bound `|lambda| <= epsilon` per slack block; `inf` leaves the block free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlackBounds {
    pub primary_position: f64,
    pub primary_orientation: f64,
    pub secondary_position: f64,
    pub secondary_orientation: f64,
}

/// Joint-limit shaping thresholds of one joint, rad: `[g_L, g_H, G_L, G_H]`.
pub type LimitThresholds = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointLimitShaping {
    /// Width of the ramp at each end as a fraction of the joint range.
    pub ramp_fraction: f64,
    /// Per-joint thresholds overriding `ramp_fraction`, global joint order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<LimitThresholds>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub format_version: u32,
    /// Control period `t_s`, s.
    pub period: f64,
    pub mode: ControlMode,
    /// Cartesian speed of point-to-point reaches, m/s.
    pub cartesian_speed: f64,
    /// Shortest reach duration, s.
    pub min_horizon: f64,
    /// `W_q`, global joint order.
    pub joint_weights: Vec<f64>,
    pub slack_weights: SlackWeights,
    pub slack_bounds: SlackBounds,
    /// `c_h`
    pub home_weight: f64,
    /// Time constant of the pull towards `home`, s.
    pub home_horizon: f64,
    /// Natural posture, rad, global joint order.
    pub home: Vec<f64>,
    /// Manipulability below which damping grows.
    pub manipulability_threshold: f64,
    pub joint_limits: JointLimitShaping,
    /// Hand offset `x_primary - x_secondary` to hold in dual mode, m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_position: Option<[f64; 3]>,
    pub avoidance: AvoidanceParams,
    pub qp: QpConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl From<QpConfig> for QpSettings {
    fn from(c: QpConfig) -> Self {
        QpSettings { tol: c.tol, max_iter: c.max_iter }
    }
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let torso = [4.0; 3];
        let arm = [1.0; 7];
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            period: 0.01,
            mode: ControlMode::Single { arm: crate::kinematics::Side::Right },
            cartesian_speed: 0.1,
            min_horizon: 0.1,
            joint_weights: torso.iter().chain(arm.iter()).chain(arm.iter()).copied().collect(),
            slack_weights: SlackWeights {
                primary_position: 1000.0,
                primary_orientation: 10.0,
                // A heavier secondary weight makes a blocked secondary hand
                // chatter at the joint speed limits, dragging the torso.
                secondary_position: 1.0,
                secondary_orientation: 10.0,
            },
            slack_bounds: SlackBounds {
                primary_position: 0.0,
                primary_orientation: f64::INFINITY,
                secondary_position: f64::INFINITY,
                secondary_orientation: f64::INFINITY,
            },
            home_weight: 0.05,
            home_horizon: 1.0,
            home: home_posture(),
            manipulability_threshold: 0.005,
            joint_limits: JointLimitShaping { ramp_fraction: 0.1, thresholds: None },
            relative_position: None,
            avoidance: AvoidanceParams::default(),
            qp: QpConfig { tol: 1e-8, max_iter: 200 },
        }
    }
}

impl ControllerConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let c: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if c.format_version != CONFIG_FORMAT_VERSION {
            return Err(ConfigError::Parse(format!("unsupported format_version {}", c.format_version)));
        }
        Ok(c)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    /// Shaping thresholds of every joint.
    pub fn limit_thresholds(&self, chain: &KinematicChain) -> Vec<LimitThresholds> {
        if let Some(t) = &self.joint_limits.thresholds {
            return t.clone();
        }
        chain
            .joints()
            .map(|j| {
                let ramp = self.joint_limits.ramp_fraction * (j.upper - j.lower);
                [j.lower, j.lower + ramp, j.upper - ramp, j.upper]
            })
            .collect()
    }

    pub fn validate(&self, chain: &KinematicChain) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let n = chain.dof();
        if !(self.period > 0.0 && self.period.is_finite()) {
            return bad(format!("period {} must be positive", self.period));
        }
        if !(self.cartesian_speed > 0.0) {
            return bad("cartesian_speed must be positive".into());
        }
        if !(self.min_horizon >= 10.0 * self.period - 1e-12) {
            return bad(format!("min_horizon must be at least ten periods ({} s)", 10.0 * self.period));
        }
        if self.joint_weights.len() != n || self.home.len() != n {
            return bad(format!("joint_weights and home need {n} entries"));
        }
        if self.joint_weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return bad("joint weights must be positive".into());
        }
        let s = &self.slack_weights;
        for w in [s.primary_position, s.primary_orientation, s.secondary_position, s.secondary_orientation] {
            if !(w > 0.0 && w.is_finite()) {
                return bad("slack weights must be positive".into());
            }
        }
        let e = &self.slack_bounds;
        for v in [e.primary_position, e.primary_orientation, e.secondary_position, e.secondary_orientation] {
            if !(v >= 0.0) {
                return bad("slack bounds must be non-negative".into());
            }
        }
        if !(self.home_weight >= 0.0 && self.home_weight.is_finite() && self.home_horizon > 0.0) {
            return bad("home_weight must be >= 0 and home_horizon > 0".into());
        }
        if !(self.manipulability_threshold > 0.0) {
            return bad("manipulability_threshold must be positive".into());
        }
        let r = self.joint_limits.ramp_fraction;
        if !(r > 0.0 && r <= 0.5) {
            return bad("joint_limits.ramp_fraction must be in (0, 0.5]".into());
        }
        let thresholds = self.limit_thresholds(chain);
        if thresholds.len() != n {
            return bad(format!("joint_limits.thresholds needs {n} entries"));
        }
        for (j, (t, joint)) in thresholds.iter().zip(chain.joints()).enumerate() {
            let ordered = t[0] < t[1] && t[1] <= t[2] && t[2] < t[3];
            let inside = t[0] >= joint.lower - 1e-12 && t[3] <= joint.upper + 1e-12;
            if !(ordered && inside) {
                return bad(format!("joint {j} thresholds {t:?} not ordered inside the limits"));
            }
        }
        if self.relative_position.is_some() && !self.mode.is_dual() {
            return bad("relative_position needs dual mode".into());
        }
        self.avoidance.validate().map_err(ConfigError::Invalid)?;
        if !(self.qp.tol > 0.0 && self.qp.max_iter > 0) {
            return bad("qp.tol and qp.max_iter must be positive".into());
        }
        Ok(())
    }
}

//! Local trajectory sampling between the current and the commanded pose.
//!
//! Position follows a third-order LTI filter that approximates a
//! minimum-jerk profile; orientation is interpolated along the geodesic at
//! constant angular speed.

use nalgebra::{Matrix3, Rotation3, Vector3};
use thiserror::Error;

use crate::kinematics::rotation::{axis_angle_to_rotation, log_map};
use crate::kinematics::Pose;

/// Feedback coefficients of the quasi minimum-jerk filter.
pub const COEFF_A: f64 = -150.766;
pub const COEFF_B: f64 = -84.981;
pub const COEFF_C: f64 = -15.967;

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("non-finite value in trajectory sampling")]
    NonFinite,
    #[error("invalid filter parameters: {0}")]
    InvalidParameter(String),
    #[error("interpolation coefficient {0} outside [0, 1]")]
    InvalidAlpha(f64),
}

/// Movement duration `||x_d - x_0|| / v_t`, never shorter than `min_time`.
pub fn execution_time(target: &Vector3<f64>, start: &Vector3<f64>, speed: f64, min_time: f64) -> f64 {
    ((target - start).norm() / speed).max(min_time)
}

/// Per-axis third-order filter `x''' = a/T^3 (x - x_d) + b/T^2 x' + c/T x''`,
/// integrated with fixed-step RK4 at the control period.
#[derive(Debug, Clone, PartialEq)]
pub struct MinJerkFilter {
    horizon: f64,
    period: f64,
    pos: Vector3<f64>,
    vel: Vector3<f64>,
    acc: Vector3<f64>,
}

impl MinJerkFilter {
    /// Filter at rest at `start`.
    pub fn new(start: Vector3<f64>, horizon: f64, period: f64) -> Result<Self, TrajectoryError> {
        Self::with_state(start, Vector3::zeros(), Vector3::zeros(), horizon, period)
    }

    pub fn with_state(
        pos: Vector3<f64>,
        vel: Vector3<f64>,
        acc: Vector3<f64>,
        horizon: f64,
        period: f64,
    ) -> Result<Self, TrajectoryError> {
        if !(horizon.is_finite() && period.is_finite() && horizon > 0.0 && period > 0.0) {
            return Err(TrajectoryError::InvalidParameter(format!("T = {horizon}, t_s = {period}")));
        }
        if period > horizon / 10.0 + 1e-12 {
            return Err(TrajectoryError::InvalidParameter(format!(
                "period {period} s is too coarse for horizon {horizon} s"
            )));
        }
        let state_ok = pos.iter().chain(vel.iter()).chain(acc.iter()).all(|v| v.is_finite());
        if !state_ok {
            return Err(TrajectoryError::NonFinite);
        }
        Ok(Self { horizon, period, pos, vel, acc })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn position(&self) -> Vector3<f64> {
        self.pos
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.vel
    }

    pub fn acceleration(&self) -> Vector3<f64> {
        self.acc
    }

    /// State matrix of one axis.
    pub fn companion(&self) -> Matrix3<f64> {
        let t = self.horizon;
        Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, COEFF_A / t.powi(3), COEFF_B / t.powi(2), COEFF_C / t)
    }

    /// Advances one period towards `target` and returns the new position.
    pub fn step(&mut self, target: &Vector3<f64>) -> Result<Vector3<f64>, TrajectoryError> {
        if !target.iter().all(|v| v.is_finite()) {
            return Err(TrajectoryError::NonFinite);
        }
        let t = self.horizon;
        let (ka, kb, kc) = (COEFF_A / t.powi(3), COEFF_B / t.powi(2), COEFF_C / t);
        let h = self.period;
        for axis in 0..3 {
            let xd = target[axis];
            let f = |s: [f64; 3]| [s[1], s[2], ka * (s[0] - xd) + kb * s[1] + kc * s[2]];
            let add = |s: [f64; 3], k: [f64; 3], w: f64| [s[0] + w * k[0], s[1] + w * k[1], s[2] + w * k[2]];
            let s0 = [self.pos[axis], self.vel[axis], self.acc[axis]];
            let k1 = f(s0);
            let k2 = f(add(s0, k1, 0.5 * h));
            let k3 = f(add(s0, k2, 0.5 * h));
            let k4 = f(add(s0, k3, h));
            let mut s = s0;
            for i in 0..3 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            self.pos[axis] = s[0];
            self.vel[axis] = s[1];
            self.acc[axis] = s[2];
        }
        if !self.pos.iter().chain(self.vel.iter()).chain(self.acc.iter()).all(|v| v.is_finite()) {
            return Err(TrajectoryError::NonFinite);
        }
        Ok(self.pos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slerp {
    pub rotation: Rotation3<f64>,
    /// The relative rotation was a half turn, so the geodesic direction was chosen by convention.
    pub ambiguous: bool,
}

/// `expm(alpha * logm(R2 R1^T)) R1`
pub fn slerp(r1: &Rotation3<f64>, r2: &Rotation3<f64>, alpha: f64) -> Result<Slerp, TrajectoryError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(TrajectoryError::InvalidAlpha(alpha));
    }
    let (delta, ambiguous) = log_map(&(r2 * r1.inverse()));
    let rotation = if alpha == 1.0 { *r2 } else { axis_angle_to_rotation(&(delta * alpha)) * r1 };
    Ok(Slerp { rotation, ambiguous })
}

/// Constant-angular-velocity interpolation from `start` to `goal`, advanced once per tick.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationSampler {
    start: Rotation3<f64>,
    goal: Rotation3<f64>,
    delta: Vector3<f64>,
    step_alpha: f64,
    ticks: u64,
    ambiguous: bool,
}

impl OrientationSampler {
    /// `step_alpha` is the per-tick interpolation increment `t_s / T`.
    pub fn new(start: Rotation3<f64>, goal: Rotation3<f64>, step_alpha: f64) -> Result<Self, TrajectoryError> {
        if !(step_alpha > 0.0 && step_alpha <= 1.0) {
            return Err(TrajectoryError::InvalidAlpha(step_alpha));
        }
        let (delta, ambiguous) = log_map(&(goal * start.inverse()));
        Ok(Self { start, goal, delta, step_alpha, ticks: 0, ambiguous })
    }

    /// Cumulative coefficient after the ticks taken so far, clamped at 1.
    pub fn alpha(&self) -> f64 {
        (self.ticks as f64 * self.step_alpha).min(1.0)
    }

    pub fn ambiguous(&self) -> bool {
        self.ambiguous
    }

    pub fn next(&mut self) -> Rotation3<f64> {
        self.ticks += 1;
        let alpha = self.alpha();
        if alpha >= 1.0 {
            self.goal
        } else {
            axis_angle_to_rotation(&(self.delta * alpha)) * self.start
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetMode {
    /// Point-to-point reach at Cartesian speed `speed` (m/s), shaped by the filters.
    Discrete { speed: f64 },
    /// Per-tick reference passed through untouched.
    Streamed,
}

#[derive(Debug, Clone)]
struct ActiveReach {
    goal: Pose,
    speed: f64,
    filter: MinJerkFilter,
    orientation: OrientationSampler,
}

/// Per end-effector sampling state.
#[derive(Debug, Clone)]
pub struct TrajectorySampler {
    period: f64,
    min_horizon: f64,
    active: Option<ActiveReach>,
}

impl TrajectorySampler {
    /// `min_horizon` floors the execution time; it must be at least ten periods.
    pub fn new(period: f64, min_horizon: f64) -> Result<Self, TrajectoryError> {
        if !(period > 0.0 && min_horizon >= 10.0 * period - 1e-12) {
            return Err(TrajectoryError::InvalidParameter(format!(
                "min horizon {min_horizon} s must be at least ten periods of {period} s"
            )));
        }
        Ok(Self { period, min_horizon, active: None })
    }

    pub fn reset(&mut self) {
        self.active = None;
    }

    /// Horizon of the reach in progress, if any.
    pub fn horizon(&self) -> Option<f64> {
        self.active.as_ref().map(|a| a.filter.horizon())
    }

    pub fn filter(&self) -> Option<&MinJerkFilter> {
        self.active.as_ref().map(|a| &a.filter)
    }

    /// Pose the end effector should reach at the next tick.
    pub fn sample_next_pose(&mut self, current: &Pose, target: &Pose, mode: TargetMode) -> Result<Pose, TrajectoryError> {
        let speed = match mode {
            TargetMode::Streamed => {
                self.active = None;
                return Ok(*target);
            }
            TargetMode::Discrete { speed } => speed,
        };
        if !(speed > 0.0) {
            return Err(TrajectoryError::InvalidParameter(format!("Cartesian speed {speed} must be positive")));
        }
        let restart = match &self.active {
            Some(a) => a.goal != *target || a.speed != speed,
            None => true,
        };
        if restart {
            let horizon = execution_time(&target.position, &current.position, speed, self.min_horizon);
            self.active = Some(ActiveReach {
                goal: *target,
                speed,
                filter: MinJerkFilter::new(current.position, horizon, self.period)?,
                orientation: OrientationSampler::new(current.rotation(), target.rotation(), self.period / horizon)?,
            });
        }
        let active = self.active.as_mut().expect("reach initialized above");
        let position = active.filter.step(&target.position)?;
        let rotation = active.orientation.next();
        Ok(Pose { position, orientation: log_map(&rotation).0 })
    }
}

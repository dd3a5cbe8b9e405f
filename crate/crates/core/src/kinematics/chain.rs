use nalgebra::{IsometryMatrix3, Matrix3, Matrix3xX, Rotation3, Translation3, Vector3};
use serde::{Deserialize, Serialize};

use super::KinematicsError;

/// Revolute joint in standard Denavit-Hartenberg form:
/// `Rz(q + offset) * Tz(d) * Tx(a) * Rx(alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DhJoint {
    pub name: String,
    pub a: f64,
    pub d: f64,
    pub alpha: f64,
    #[serde(default)]
    pub offset: f64,
    /// rad
    pub lower: f64,
    /// rad
    pub upper: f64,
    /// rad/s
    pub max_velocity: f64,
}

impl DhJoint {
    pub fn transform(&self, q: f64) -> IsometryMatrix3<f64> {
        let (st, ct) = (q + self.offset).sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        let rot = Matrix3::new(ct, -st * ca, st * sa, st, ct * ca, -ct * sa, 0.0, sa, ca);
        IsometryMatrix3::from_parts(
            Translation3::new(self.a * ct, self.a * st, self.d),
            Rotation3::from_matrix_unchecked(rot),
        )
    }

    pub(crate) fn validate(&self) -> Result<(), KinematicsError> {
        let finite = [self.a, self.d, self.alpha, self.offset, self.lower, self.upper, self.max_velocity]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(KinematicsError::InvalidModel(format!("joint {}: non-finite parameter", self.name)));
        }
        if self.lower >= self.upper {
            return Err(KinematicsError::InvalidModel(format!(
                "joint {}: lower limit {} must be below upper limit {}",
                self.name, self.lower, self.upper
            )));
        }
        if self.max_velocity <= 0.0 {
            return Err(KinematicsError::InvalidModel(format!(
                "joint {}: velocity limit must be positive",
                self.name
            )));
        }
        Ok(())
    }
}

/// Open serial chain of revolute joints hanging off a fixed base transform.
#[derive(Debug, Clone, PartialEq)]
pub struct SerialChain {
    pub base: IsometryMatrix3<f64>,
    pub joints: Vec<DhJoint>,
}

impl SerialChain {
    pub fn new(base: IsometryMatrix3<f64>, joints: Vec<DhJoint>) -> Self {
        Self { base, joints }
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    /// `dof + 1` frames: the base, then the frame after each joint.
    pub fn frames(&self, q: &[f64]) -> Result<Vec<IsometryMatrix3<f64>>, KinematicsError> {
        if q.len() != self.dof() {
            return Err(KinematicsError::DofMismatch { expected: self.dof(), got: q.len() });
        }
        Ok(self.frames_from(self.base, q))
    }

    pub(crate) fn frames_from(&self, base: IsometryMatrix3<f64>, q: &[f64]) -> Vec<IsometryMatrix3<f64>> {
        let mut out = Vec::with_capacity(q.len() + 1);
        let mut t = base;
        out.push(t);
        for (joint, &qi) in self.joints.iter().zip(q) {
            t *= joint.transform(qi);
            out.push(t);
        }
        out
    }

    pub fn end_frame(&self, q: &[f64]) -> Result<IsometryMatrix3<f64>, KinematicsError> {
        Ok(*self.frames(q)?.last().expect("at least the base frame"))
    }

    /// Geometric Jacobian (translational, rotational) of a world point rigidly
    /// attached to the body after joint `link`. `None` selects the base body,
    /// which no joint moves.
    pub fn point_jacobian(
        frames: &[IsometryMatrix3<f64>],
        link: Option<usize>,
        point: &Vector3<f64>,
    ) -> (Matrix3xX<f64>, Matrix3xX<f64>) {
        let n = frames.len() - 1;
        let mut pos = Matrix3xX::zeros(n);
        let mut ori = Matrix3xX::zeros(n);
        if let Some(link) = link {
            for j in 0..=link.min(n.saturating_sub(1)) {
                let z = frames[j].rotation.matrix().column(2).into_owned();
                let o = frames[j].translation.vector;
                pos.set_column(j, &z.cross(&(point - o)));
                ori.set_column(j, &z);
            }
        }
        (pos, ori)
    }
}

//! Serial-chain kinematics for a two-arm robot sharing a torso.

mod chain;
mod model;
mod robot;
pub mod rotation;
pub mod samples;

use thiserror::Error;

pub use chain::{DhJoint, SerialChain};
pub use model::{ModelFile, MODEL_FORMAT_VERSION};
pub use robot::{
    manipulability, ArmChain, BodyPart, BodyPartKind, BodyPartSpec, FrameSelector, JacobianBlocks,
    KinematicChain, LinkId, Pose, ProximitySensor, RobotFrames, Side, SurfaceSample,
};

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    #[error("joint vector has {got} entries, chain expects {expected}")]
    DofMismatch { expected: usize, got: usize },
    #[error("unknown frame selector: {0}")]
    UnknownFrame(String),
    #[error("matrix is not a rotation (orthonormality error {orthonormality_error:e}, det {determinant})")]
    NotARotation { orthonormality_error: f64, determinant: f64 },
    #[error("invalid robot model: {0}")]
    InvalidModel(String),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("model file parse error: {0}")]
    Parse(String),
}

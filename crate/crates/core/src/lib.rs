//! Whole-body reactive motion control for a dual-arm robot with a shared torso.
//!
//! Joint velocities come from a strictly convex QP over velocities and task
//! slacks. Obstacles seen by vision, skin, proximity sensors or self-geometry
//! become half-space rows on the joint velocities.

pub mod builtin;
pub mod controller;
pub mod kinematics;
pub mod layout;
pub mod obstacles;
pub mod qp;
pub mod sim;
pub mod trajectory;

pub use kinematics::{KinematicChain, KinematicsError, Pose, Side};

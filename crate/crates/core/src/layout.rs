//! Control mode and the column layout of the QP decision vector.

use serde::{Deserialize, Serialize};

use crate::kinematics::{KinematicChain, Side};

/// Which arms are controlled, and which one has priority in dual mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ControlMode {
    Single { arm: Side },
    Dual { primary: Side },
}

impl ControlMode {
    pub fn primary(self) -> Side {
        match self {
            ControlMode::Single { arm } => arm,
            ControlMode::Dual { primary } => primary,
        }
    }

    pub fn secondary(self) -> Option<Side> {
        match self {
            ControlMode::Single { .. } => None,
            ControlMode::Dual { primary } => Some(primary.other()),
        }
    }

    /// Controlled arms, primary first.
    pub fn arms(self) -> Vec<Side> {
        std::iter::once(self.primary()).chain(self.secondary()).collect()
    }

    pub fn controls(self, side: Side) -> bool {
        self.primary() == side || self.secondary() == Some(side)
    }

    pub fn is_dual(self) -> bool {
        matches!(self, ControlMode::Dual { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Position,
    Orientation,
}

/// Decision vector `[q_dot; lambda_p_pos; lambda_p_ori; lambda_s_pos; lambda_s_ori]`.
///
/// `q_dot` holds the torso joints followed by the controlled arms in global
/// joint order; single mode has no secondary slack blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionLayout {
    pub mode: ControlMode,
    /// Global joint index of each velocity column.
    joints: Vec<usize>,
    /// Column of each global joint, if controlled.
    columns: Vec<Option<usize>>,
}

impl DecisionLayout {
    pub fn new(chain: &KinematicChain, mode: ControlMode) -> Self {
        let mut joints: Vec<usize> = (0..chain.torso_dof()).collect();
        for side in Side::BOTH {
            if mode.controls(side) {
                joints.extend((0..chain.arm_dof()).map(|k| chain.arm_joint_index(side, k)));
            }
        }
        let mut columns = vec![None; chain.dof()];
        for (c, &j) in joints.iter().enumerate() {
            columns[j] = Some(c);
        }
        Self { mode, joints, columns }
    }

    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn n_slacks(&self) -> usize {
        6 * self.mode.arms().len()
    }

    pub fn n(&self) -> usize {
        self.n_joints() + self.n_slacks()
    }

    /// Global joint index of each velocity column.
    pub fn joints(&self) -> &[usize] {
        &self.joints
    }

    pub fn column(&self, joint: usize) -> Option<usize> {
        self.columns.get(joint).copied().flatten()
    }

    /// First column of a 3-wide slack block.
    pub fn slack(&self, side: Side, task: Task) -> Option<usize> {
        let rank = self.mode.arms().iter().position(|&s| s == side)?;
        let t = match task {
            Task::Position => 0,
            Task::Orientation => 3,
        };
        Some(self.n_joints() + 6 * rank + t)
    }
}

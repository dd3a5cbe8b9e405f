use std::fmt;

use nalgebra::{DMatrix, IsometryMatrix3, Matrix3xX, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::rotation::{axis_angle_to_rotation, log_map};
use super::{DhJoint, KinematicsError, SerialChain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyPartKind {
    Torso,
    UpperArm,
    Forearm,
    Hand,
}

impl BodyPartKind {
    pub fn name(self) -> &'static str {
        match self {
            BodyPartKind::Torso => "torso",
            BodyPartKind::UpperArm => "upper_arm",
            BodyPartKind::Forearm => "forearm",
            BodyPartKind::Hand => "hand",
        }
    }
}

/// A body part; the torso has no side, every arm part has one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BodyPart {
    pub kind: BodyPartKind,
    pub side: Option<Side>,
}

impl BodyPart {
    pub const TORSO: BodyPart = BodyPart { kind: BodyPartKind::Torso, side: None };

    pub fn arm(side: Side, kind: BodyPartKind) -> Self {
        Self { kind, side: Some(side) }
    }
}

impl fmt::Display for BodyPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.side {
            Some(side) => write!(f, "{}_{}", side, self.kind.name()),
            None => f.write_str(self.kind.name()),
        }
    }
}

/// Rigid body moved by a joint: `Torso(k)` follows torso joint `k`,
/// `Arm(side, k)` follows joint `k` of that arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkId {
    Torso(usize),
    Arm(Side, usize),
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkId::Torso(k) => write!(f, "torso[{k}]"),
            LinkId::Arm(side, k) => write!(f, "{side}[{k}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub link: LinkId,
    /// Position in the link frame (m).
    pub point: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyPartSpec {
    pub part: BodyPart,
    pub links: Vec<LinkId>,
    pub samples: Vec<SurfaceSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximitySensor {
    pub id: String,
    pub link: LinkId,
    /// Mounting point in the link frame (m).
    pub position: Vector3<f64>,
    /// Unit beam direction in the link frame.
    pub direction: Vector3<f64>,
}

/// One arm: a serial chain mounted on the last torso frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmChain {
    pub side: Side,
    /// Fixed transform from the last torso frame to the frame of the first arm joint.
    pub mount: IsometryMatrix3<f64>,
    pub joints: Vec<DhJoint>,
    /// Fixed transform from the last arm frame to the end effector.
    pub tool: IsometryMatrix3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    /// Rotation vector (axis times angle, angle in `[0, pi]`).
    pub orientation: Vector3<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: Vector3<f64>) -> Self {
        Self { position, orientation }
    }

    pub fn from_isometry(iso: &IsometryMatrix3<f64>) -> Self {
        Self { position: iso.translation.vector, orientation: log_map(&iso.rotation).0 }
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        axis_angle_to_rotation(&self.orientation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrameSelector {
    Link(LinkId),
    EndEffector(Side),
    Point { link: LinkId, local: Vector3<f64> },
    Sample { part: BodyPart, index: usize },
}

/// All link frames of the robot at one configuration.
#[derive(Debug, Clone)]
pub struct RobotFrames {
    /// Base frame followed by the frame after each torso joint.
    pub torso: Vec<IsometryMatrix3<f64>>,
    /// Per arm (`Side::index`): mount frame followed by the frame after each arm joint.
    pub arms: [Vec<IsometryMatrix3<f64>>; 2],
    pub end_effectors: [IsometryMatrix3<f64>; 2],
}

impl RobotFrames {
    pub fn link(&self, link: LinkId) -> &IsometryMatrix3<f64> {
        match link {
            LinkId::Torso(k) => &self.torso[k + 1],
            LinkId::Arm(side, k) => &self.arms[side.index()][k + 1],
        }
    }

    pub fn point(&self, link: LinkId, local: &Vector3<f64>) -> Vector3<f64> {
        self.link(link).transform_point(&(*local).into()).coords
    }

    pub fn end_effector(&self, side: Side) -> &IsometryMatrix3<f64> {
        &self.end_effectors[side.index()]
    }

    pub fn end_effector_pose(&self, side: Side) -> Pose {
        Pose::from_isometry(self.end_effector(side))
    }
}

/// Jacobian of a point split into torso and arm column blocks.
///
/// Points on the torso have zero-column arm blocks and `side == None`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBlocks {
    pub side: Option<Side>,
    pub torso_pos: Matrix3xX<f64>,
    pub torso_ori: Matrix3xX<f64>,
    pub arm_pos: Matrix3xX<f64>,
    pub arm_ori: Matrix3xX<f64>,
}

impl JacobianBlocks {
    /// `[J_t,pos  J_a,pos]`
    pub fn position(&self) -> Matrix3xX<f64> {
        hstack(&self.torso_pos, &self.arm_pos)
    }

    /// `[J_t,ori  J_a,ori]`
    pub fn orientation(&self) -> Matrix3xX<f64> {
        hstack(&self.torso_ori, &self.arm_ori)
    }

    /// Stacked 6 x n Jacobian, position rows first.
    pub fn full(&self) -> DMatrix<f64> {
        let p = self.position();
        let o = self.orientation();
        let mut out = DMatrix::zeros(6, p.ncols());
        out.rows_mut(0, 3).copy_from(&p);
        out.rows_mut(3, 3).copy_from(&o);
        out
    }
}

fn hstack(a: &Matrix3xX<f64>, b: &Matrix3xX<f64>) -> Matrix3xX<f64> {
    let mut out = Matrix3xX::zeros(a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Yoshikawa manipulability `sqrt(det(J J^T))`, clamped at zero.
pub fn manipulability(j: &DMatrix<f64>) -> f64 {
    let jjt = j * j.transpose();
    jjt.determinant().max(0.0).sqrt()
}

/// Dual-arm robot: a torso chain shared by two arm chains.
///
/// Global joint order is torso, left arm, right arm.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    pub name: String,
    torso: SerialChain,
    arms: [ArmChain; 2],
    parts: Vec<BodyPartSpec>,
    proximity_sensors: Vec<ProximitySensor>,
    torso_link_part: Vec<usize>,
    arm_link_part: [Vec<usize>; 2],
}

impl KinematicChain {
    pub fn new(
        name: impl Into<String>,
        torso: SerialChain,
        arms: [ArmChain; 2],
        parts: Vec<BodyPartSpec>,
        proximity_sensors: Vec<ProximitySensor>,
    ) -> Result<Self, KinematicsError> {
        let invalid = |msg: String| Err(KinematicsError::InvalidModel(msg));
        if torso.dof() == 0 {
            return invalid("torso needs at least one joint".into());
        }
        if arms[0].side != Side::Left || arms[1].side != Side::Right {
            return invalid("arms must be ordered left, right".into());
        }
        if arms[0].joints.len() != arms[1].joints.len() || arms[0].joints.is_empty() {
            return invalid("both arms need the same, non-zero number of joints".into());
        }
        for j in torso.joints.iter().chain(arms.iter().flat_map(|a| a.joints.iter())) {
            j.validate()?;
        }

        let na = arms[0].joints.len();
        let mut torso_link_part = vec![usize::MAX; torso.dof()];
        let mut arm_link_part = [vec![usize::MAX; na], vec![usize::MAX; na]];
        for (idx, spec) in parts.iter().enumerate() {
            for link in &spec.links {
                let slot = match *link {
                    LinkId::Torso(k) if k < torso.dof() => &mut torso_link_part[k],
                    LinkId::Arm(side, k) if k < na => &mut arm_link_part[side.index()][k],
                    _ => return invalid(format!("part {}: link {link} does not exist", spec.part)),
                };
                if *slot != usize::MAX {
                    return invalid(format!("link {link} belongs to more than one body part"));
                }
                let owner_ok = match (*link, spec.part.side) {
                    (LinkId::Torso(_), None) => spec.part.kind == BodyPartKind::Torso,
                    (LinkId::Arm(s, _), Some(ps)) => s == ps && spec.part.kind != BodyPartKind::Torso,
                    _ => false,
                };
                if !owner_ok {
                    return invalid(format!("link {link} cannot belong to part {}", spec.part));
                }
                *slot = idx;
            }
            if let Some(s) = spec.samples.iter().find(|s| !spec.links.contains(&s.link)) {
                return invalid(format!("part {}: sample on foreign link {}", spec.part, s.link));
            }
        }
        if let Some(k) = torso_link_part.iter().position(|&p| p == usize::MAX) {
            return invalid(format!("torso link {k} has no body part"));
        }
        for side in Side::BOTH {
            if let Some(k) = arm_link_part[side.index()].iter().position(|&p| p == usize::MAX) {
                return invalid(format!("{side} arm link {k} has no body part"));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for spec in &parts {
            if !seen.insert(spec.part) {
                return invalid(format!("body part {} declared twice", spec.part));
            }
        }
        for s in &proximity_sensors {
            let ok = match s.link {
                LinkId::Torso(k) => k < torso.dof(),
                LinkId::Arm(_, k) => k < na,
            };
            if !ok || (s.direction.norm() - 1.0).abs() > 1e-9 {
                return invalid(format!("proximity sensor {}: bad link or non-unit beam", s.id));
            }
        }

        Ok(Self { name: name.into(), torso, arms, parts, proximity_sensors, torso_link_part, arm_link_part })
    }

    pub fn torso(&self) -> &SerialChain {
        &self.torso
    }

    pub fn arm(&self, side: Side) -> &ArmChain {
        &self.arms[side.index()]
    }

    pub fn parts(&self) -> &[BodyPartSpec] {
        &self.parts
    }

    pub fn part(&self, part: BodyPart) -> Option<&BodyPartSpec> {
        self.parts.iter().find(|p| p.part == part)
    }

    pub fn proximity_sensors(&self) -> &[ProximitySensor] {
        &self.proximity_sensors
    }

    pub fn proximity_sensor(&self, id: &str) -> Option<&ProximitySensor> {
        self.proximity_sensors.iter().find(|s| s.id == id)
    }

    pub fn part_of(&self, link: LinkId) -> BodyPart {
        let idx = match link {
            LinkId::Torso(k) => self.torso_link_part[k],
            LinkId::Arm(side, k) => self.arm_link_part[side.index()][k],
        };
        self.parts[idx].part
    }

    pub fn torso_dof(&self) -> usize {
        self.torso.dof()
    }

    pub fn arm_dof(&self) -> usize {
        self.arms[0].joints.len()
    }

    pub fn dof(&self) -> usize {
        self.torso_dof() + 2 * self.arm_dof()
    }

    /// Global index of joint `k` of the given arm.
    pub fn arm_joint_index(&self, side: Side, k: usize) -> usize {
        self.torso_dof() + side.index() * self.arm_dof() + k
    }

    /// Global joint indices driving the given link, in chain order.
    pub fn chain_joints(&self, link: LinkId) -> Vec<usize> {
        match link {
            LinkId::Torso(k) => (0..=k).collect(),
            LinkId::Arm(side, k) => (0..self.torso_dof())
                .chain((0..=k).map(|j| self.arm_joint_index(side, j)))
                .collect(),
        }
    }

    pub fn joints(&self) -> impl Iterator<Item = &DhJoint> {
        self.torso.joints.iter().chain(self.arms[0].joints.iter()).chain(self.arms[1].joints.iter())
    }

    pub fn joint(&self, index: usize) -> &DhJoint {
        let (nt, na) = (self.torso_dof(), self.arm_dof());
        if index < nt {
            &self.torso.joints[index]
        } else if index < nt + na {
            &self.arms[0].joints[index - nt]
        } else {
            &self.arms[1].joints[index - nt - na]
        }
    }

    pub fn frames(&self, q: &[f64]) -> Result<RobotFrames, KinematicsError> {
        if q.len() != self.dof() {
            return Err(KinematicsError::DofMismatch { expected: self.dof(), got: q.len() });
        }
        let (nt, na) = (self.torso_dof(), self.arm_dof());
        let torso = self.torso.frames_from(self.torso.base, &q[..nt]);
        let tip = *torso.last().expect("torso frames");
        let arm_frames = |side: Side| {
            let arm = &self.arms[side.index()];
            let start = nt + side.index() * na;
            let mut frames = Vec::with_capacity(na + 1);
            let mut t = tip * arm.mount;
            frames.push(t);
            for (joint, &qi) in arm.joints.iter().zip(&q[start..start + na]) {
                t *= joint.transform(qi);
                frames.push(t);
            }
            frames
        };
        let arms = [arm_frames(Side::Left), arm_frames(Side::Right)];
        let end_effectors = [
            *arms[0].last().expect("arm frames") * self.arms[0].tool,
            *arms[1].last().expect("arm frames") * self.arms[1].tool,
        ];
        Ok(RobotFrames { torso, arms, end_effectors })
    }

    fn resolve(&self, frames: &RobotFrames, sel: &FrameSelector) -> Result<(LinkId, IsometryMatrix3<f64>), KinematicsError> {
        let check = |link: LinkId| {
            let ok = match link {
                LinkId::Torso(k) => k < self.torso_dof(),
                LinkId::Arm(_, k) => k < self.arm_dof(),
            };
            if ok {
                Ok(link)
            } else {
                Err(KinematicsError::UnknownFrame(format!("link {link}")))
            }
        };
        match sel {
            FrameSelector::Link(link) => {
                let link = check(*link)?;
                Ok((link, *frames.link(link)))
            }
            FrameSelector::EndEffector(side) => {
                Ok((LinkId::Arm(*side, self.arm_dof() - 1), *frames.end_effector(*side)))
            }
            FrameSelector::Point { link, local } => {
                let link = check(*link)?;
                let mut t = *frames.link(link);
                t.translation.vector = frames.point(link, local);
                Ok((link, t))
            }
            FrameSelector::Sample { part, index } => {
                let spec = self
                    .part(*part)
                    .ok_or_else(|| KinematicsError::UnknownFrame(format!("body part {part}")))?;
                let s = spec
                    .samples
                    .get(*index)
                    .ok_or_else(|| KinematicsError::UnknownFrame(format!("sample {index} of {part}")))?;
                let mut t = *frames.link(s.link);
                t.translation.vector = frames.point(s.link, &s.point);
                Ok((s.link, t))
            }
        }
    }

    pub fn forward_kinematics(&self, q: &[f64], sel: &FrameSelector) -> Result<Pose, KinematicsError> {
        let frames = self.frames(q)?;
        Ok(Pose::from_isometry(&self.resolve(&frames, sel)?.1))
    }

    pub fn jacobian(&self, q: &[f64], sel: &FrameSelector) -> Result<JacobianBlocks, KinematicsError> {
        let frames = self.frames(q)?;
        let (link, t) = self.resolve(&frames, sel)?;
        Ok(self.jacobian_at(&frames, link, &t.translation.vector))
    }

    /// Jacobian of a world point rigidly attached to `link`.
    pub fn jacobian_at(&self, frames: &RobotFrames, link: LinkId, point: &Vector3<f64>) -> JacobianBlocks {
        match link {
            LinkId::Torso(k) => {
                let (torso_pos, torso_ori) = SerialChain::point_jacobian(&frames.torso, Some(k), point);
                JacobianBlocks {
                    side: None,
                    torso_pos,
                    torso_ori,
                    arm_pos: Matrix3xX::zeros(0),
                    arm_ori: Matrix3xX::zeros(0),
                }
            }
            LinkId::Arm(side, k) => {
                let (torso_pos, torso_ori) =
                    SerialChain::point_jacobian(&frames.torso, Some(self.torso_dof() - 1), point);
                let (arm_pos, arm_ori) = SerialChain::point_jacobian(&frames.arms[side.index()], Some(k), point);
                JacobianBlocks { side: Some(side), torso_pos, torso_ori, arm_pos, arm_ori }
            }
        }
    }

    pub fn end_effector_jacobian(&self, frames: &RobotFrames, side: Side) -> JacobianBlocks {
        let p = frames.end_effector(side).translation.vector;
        self.jacobian_at(frames, LinkId::Arm(side, self.arm_dof() - 1), &p)
    }

    /// World positions of all surface samples of a body part.
    pub fn sample_positions(&self, frames: &RobotFrames, part: BodyPart) -> Vec<Vector3<f64>> {
        self.part(part)
            .map(|spec| spec.samples.iter().map(|s| frames.point(s.link, &s.point)).collect())
            .unwrap_or_default()
    }

    pub fn lower_limits(&self) -> Vec<f64> {
        self.joints().map(|j| j.lower).collect()
    }

    pub fn upper_limits(&self) -> Vec<f64> {
        self.joints().map(|j| j.upper).collect()
    }
}

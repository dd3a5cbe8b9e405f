//! Robot model file: one TOML document describing the DH chains, body parts,
//! surface samples and proximity sensor mounts.

use std::path::Path;

use nalgebra::{IsometryMatrix3, Translation3, Vector3};
use serde::{Deserialize, Serialize};

use super::rotation::{axis_angle_to_rotation, log_map};
use super::{
    ArmChain, BodyPart, BodyPartKind, BodyPartSpec, DhJoint, KinematicChain, KinematicsError, LinkId,
    ProximitySensor, SerialChain, Side, SurfaceSample,
};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformDoc {
    /// m
    pub translation: [f64; 3],
    /// rotation vector, rad
    pub rotation: [f64; 3],
}

impl TransformDoc {
    fn from_iso(t: &IsometryMatrix3<f64>) -> Self {
        let r = log_map(&t.rotation).0;
        Self { translation: t.translation.vector.into(), rotation: r.into() }
    }

    fn to_iso(&self) -> IsometryMatrix3<f64> {
        IsometryMatrix3::from_parts(
            Translation3::from(Vector3::from(self.translation)),
            axis_angle_to_rotation(&Vector3::from(self.rotation)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorsoDoc {
    /// Arms attached to the torso tip; must list both sides.
    pub shared_by: Vec<Side>,
    pub joints: Vec<DhJoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmDoc {
    pub side: Side,
    pub mount: TransformDoc,
    pub tool: TransformDoc,
    pub joints: Vec<DhJoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGroupDoc {
    pub link: usize,
    /// Points in the link frame, m.
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyPartDoc {
    pub part: BodyPartKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    pub links: Vec<usize>,
    #[serde(default)]
    pub samples: Vec<SampleGroupDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximitySensorDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    pub link: usize,
    pub position: [f64; 3],
    pub direction: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub name: String,
    pub base: TransformDoc,
    pub torso: TorsoDoc,
    pub arms: Vec<ArmDoc>,
    pub body_parts: Vec<BodyPartDoc>,
    #[serde(default)]
    pub proximity_sensors: Vec<ProximitySensorDoc>,
}

fn link_id(side: Option<Side>, k: usize) -> LinkId {
    match side {
        Some(s) => LinkId::Arm(s, k),
        None => LinkId::Torso(k),
    }
}

fn split_link(link: LinkId) -> (Option<Side>, usize) {
    match link {
        LinkId::Torso(k) => (None, k),
        LinkId::Arm(s, k) => (Some(s), k),
    }
}

impl ModelFile {
    pub fn from_chain(chain: &KinematicChain) -> Self {
        let arms = Side::BOTH
            .iter()
            .map(|&side| {
                let a = chain.arm(side);
                ArmDoc {
                    side,
                    mount: TransformDoc::from_iso(&a.mount),
                    tool: TransformDoc::from_iso(&a.tool),
                    joints: a.joints.clone(),
                }
            })
            .collect();
        let body_parts = chain
            .parts()
            .iter()
            .map(|spec| {
                let mut samples: Vec<SampleGroupDoc> = Vec::new();
                for s in &spec.samples {
                    let k = split_link(s.link).1;
                    match samples.last_mut() {
                        Some(g) if g.link == k => g.points.push(s.point.into()),
                        _ => samples.push(SampleGroupDoc { link: k, points: vec![s.point.into()] }),
                    }
                }
                BodyPartDoc {
                    part: spec.part.kind,
                    side: spec.part.side,
                    links: spec.links.iter().map(|&l| split_link(l).1).collect(),
                    samples,
                }
            })
            .collect();
        let proximity_sensors = chain
            .proximity_sensors()
            .iter()
            .map(|s| {
                let (side, link) = split_link(s.link);
                ProximitySensorDoc {
                    id: s.id.clone(),
                    side,
                    link,
                    position: s.position.into(),
                    direction: s.direction.into(),
                }
            })
            .collect();
        Self {
            format_version: MODEL_FORMAT_VERSION,
            name: chain.name.clone(),
            base: TransformDoc::from_iso(&chain.torso().base),
            torso: TorsoDoc { shared_by: Side::BOTH.to_vec(), joints: chain.torso().joints.clone() },
            arms,
            body_parts,
            proximity_sensors,
        }
    }

    pub fn into_chain(self) -> Result<KinematicChain, KinematicsError> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(KinematicsError::UnsupportedVersion(self.format_version));
        }
        let mut shared = self.torso.shared_by.clone();
        shared.sort();
        if shared != Side::BOTH {
            return Err(KinematicsError::InvalidModel("torso must be shared by both arms".into()));
        }
        let mut arms: Vec<ArmChain> = self
            .arms
            .into_iter()
            .map(|a| ArmChain { side: a.side, mount: a.mount.to_iso(), joints: a.joints, tool: a.tool.to_iso() })
            .collect();
        arms.sort_by_key(|a| a.side);
        if arms.len() != 2 || arms[0].side == arms[1].side {
            return Err(KinematicsError::InvalidModel("expected exactly one left and one right arm".into()));
        }
        let right = arms.pop().expect("two arms");
        let left = arms.pop().expect("two arms");

        let parts = self
            .body_parts
            .into_iter()
            .map(|p| {
                let links = p.links.iter().map(|&k| link_id(p.side, k)).collect();
                let samples = p
                    .samples
                    .iter()
                    .flat_map(|g| {
                        g.points.iter().map(move |pt| SurfaceSample { link: link_id(p.side, g.link), point: Vector3::from(*pt) })
                    })
                    .collect();
                BodyPartSpec { part: BodyPart { kind: p.part, side: p.side }, links, samples }
            })
            .collect();
        let sensors = self
            .proximity_sensors
            .into_iter()
            .map(|s| ProximitySensor {
                id: s.id,
                link: link_id(s.side, s.link),
                position: Vector3::from(s.position),
                direction: Vector3::from(s.direction),
            })
            .collect();
        KinematicChain::new(
            self.name,
            SerialChain::new(self.base.to_iso(), self.torso.joints),
            [left, right],
            parts,
            sensors,
        )
    }
}

impl KinematicChain {
    pub fn from_toml_str(text: &str) -> Result<Self, KinematicsError> {
        let doc: ModelFile = toml::from_str(text).map_err(|e| KinematicsError::Parse(e.to_string()))?;
        doc.into_chain()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ModelFile::from_chain(self)).expect("model document serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KinematicsError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| KinematicsError::Parse(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }
}

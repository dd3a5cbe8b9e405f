//! The bundled iCub-like model, controller configuration and scenario files.
//!
//! The model is built in code; `wbreact gen-model` writes it out as TOML and
//! a test keeps the copy under `data/` in sync.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{IsometryMatrix3, Rotation3, Translation3, Vector3};

use crate::kinematics::rotation::axis_angle_to_rotation;
use crate::kinematics::samples::capsule_surface;
use crate::kinematics::{
    ArmChain, BodyPart, BodyPartKind, BodyPartSpec, DhJoint, KinematicChain, LinkId, ProximitySensor, SerialChain,
    Side, SurfaceSample,
};

pub const MODEL_REF: &str = "builtin:icub-like";
pub const CONFIG_REF: &str = "builtin:default";

/// Maximum distance between neighbouring surface samples, m.
pub const SAMPLE_SPACING: f64 = 0.03;

const DEG: f64 = PI / 180.0;

#[allow(clippy::too_many_arguments)]
fn joint(name: &str, a: f64, d: f64, alpha: f64, offset: f64, lower_deg: f64, upper_deg: f64, vmax: f64) -> DhJoint {
    DhJoint {
        name: name.into(),
        a,
        d,
        alpha,
        offset,
        lower: lower_deg * DEG,
        upper: upper_deg * DEG,
        max_velocity: vmax,
    }
}

fn arm_joints(side: Side) -> Vec<DhJoint> {
    let s = match side {
        Side::Left => 1.0,
        Side::Right => -1.0,
    };
    let n = |j: &str| format!("{side}_{j}");
    vec![
        joint(&n("shoulder_pitch"), 0.0, s * 0.10774, -s * FRAC_PI_2, s * FRAC_PI_2, -95.5, 5.0, 1.5),
        joint(&n("shoulder_roll"), 0.0, 0.0, s * FRAC_PI_2, -FRAC_PI_2, 0.0, 160.8, 1.5),
        joint(
            &n("shoulder_yaw"),
            s * 0.015,
            s * 0.15228,
            -FRAC_PI_2,
            if s > 0.0 { 75.0 * DEG } else { -105.0 * DEG },
            -37.0,
            100.0,
            1.5,
        ),
        joint(&n("elbow"), -s * 0.015, 0.0, FRAC_PI_2, 0.0, 5.5, 106.0, 1.5),
        joint(&n("wrist_prosup"), 0.0, s * 0.1373, FRAC_PI_2, -FRAC_PI_2, -90.0, 90.0, 2.0),
        joint(&n("wrist_pitch"), 0.0, 0.0, FRAC_PI_2, FRAC_PI_2, -90.0, 0.0, 2.0),
        joint(&n("wrist_yaw"), 0.0625, s * 0.016, 0.0, if s > 0.0 { PI } else { 0.0 }, -20.0, 40.0, 2.0),
    ]
}

fn arm_mount(side: Side) -> IsometryMatrix3<f64> {
    // the per-arm constant part of the torso-yaw DH row
    let row = match side {
        Side::Left => joint("mount", 0.0233647, -0.1433, -FRAC_PI_2, 105.0 * DEG, -1.0, 1.0, 1.0),
        Side::Right => joint("mount", -0.0233647, -0.1433, FRAC_PI_2, -105.0 * DEG, -1.0, 1.0, 1.0),
    };
    row.transform(0.0)
}

fn arm_tool(side: Side) -> IsometryMatrix3<f64> {
    // hand frame calibrated so that the reaching orientations used by the
    // bundled experiments are comfortably inside the arm's dexterous workspace
    let r = match side {
        Side::Left => Vector3::new(-0.5737, 2.5141, 0.8711),
        Side::Right => Vector3::new(-0.5803, -0.8721, -2.517),
    };
    IsometryMatrix3::from_parts(Translation3::identity(), axis_angle_to_rotation(&r))
}

fn local(frame: &IsometryMatrix3<f64>, world: &Vector3<f64>) -> Vector3<f64> {
    frame.inverse_transform_point(&(*world).into()).coords
}

fn capsule_on(
    frame: &IsometryMatrix3<f64>,
    link: LinkId,
    p0: Vector3<f64>,
    p1: Vector3<f64>,
    radius: f64,
) -> Vec<SurfaceSample> {
    capsule_surface(&local(frame, &p0), &local(frame, &p1), radius, SAMPLE_SPACING)
        .into_iter()
        .map(|point| SurfaceSample { link, point })
        .collect()
}

/// 17-DoF two-arm robot with a 3-DoF torso, dimensioned like an iCub upper body.
pub fn icub_like_model() -> KinematicChain {
    let base = IsometryMatrix3::from_parts(
        Translation3::identity(),
        Rotation3::from_matrix_unchecked(nalgebra::Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0)),
    );
    let torso = SerialChain::new(
        base,
        vec![
            joint("torso_pitch", 0.032, 0.0, FRAC_PI_2, 0.0, -22.0, 84.0, 0.8),
            joint("torso_roll", 0.0, -0.0055, FRAC_PI_2, -FRAC_PI_2, -39.0, 39.0, 0.8),
            joint("torso_yaw", 0.0, 0.0, 0.0, 0.0, -59.0, 59.0, 0.8),
        ],
    );
    let arms = Side::BOTH.map(|side| ArmChain {
        side,
        mount: arm_mount(side),
        joints: arm_joints(side),
        tool: arm_tool(side),
    });

    let draft = KinematicChain::new(
        "icub-like",
        torso.clone(),
        arms.clone(),
        placeholder_parts(),
        Vec::new(),
    )
    .expect("bundled chain is valid");
    let frames = draft.frames(&vec![0.0; draft.dof()]).expect("dof matches");

    let torso_tip = frames.link(LinkId::Torso(2));
    let mut parts = vec![BodyPartSpec {
        part: BodyPart::TORSO,
        links: (0..3).map(LinkId::Torso).collect(),
        samples: [
            capsule_on(torso_tip, LinkId::Torso(2), Vector3::new(0.0, -0.06, 0.16), Vector3::new(0.0, 0.06, 0.16), 0.065),
            capsule_on(torso_tip, LinkId::Torso(2), Vector3::new(0.0, 0.0, 0.04), Vector3::new(0.0, 0.0, 0.11), 0.06),
        ]
        .concat(),
    }];
    let mut sensors = Vec::new();
    for side in Side::BOTH {
        let f = &frames.arms[side.index()];
        let origin = |k: usize| f[k].translation.vector;
        let link = |k: usize| LinkId::Arm(side, k);
        let upper = capsule_on(&f[3], link(2), origin(1), origin(3), 0.035);
        let fore = capsule_on(&f[5], link(4), origin(4), origin(5), 0.03);
        let wrist = origin(5);
        let palm = origin(7);
        let tip = palm + (palm - wrist).normalize() * 0.03;
        let hand = capsule_on(&f[7], link(6), wrist, tip, 0.025);
        parts.push(BodyPartSpec {
            part: BodyPart::arm(side, BodyPartKind::UpperArm),
            links: (0..3).map(link).collect(),
            samples: upper,
        });
        parts.push(BodyPartSpec {
            part: BodyPart::arm(side, BodyPartKind::Forearm),
            links: (3..5).map(link).collect(),
            samples: fore,
        });
        parts.push(BodyPartSpec {
            part: BodyPart::arm(side, BodyPartKind::Hand),
            links: (5..7).map(link).collect(),
            samples: hand,
        });

        // time-of-flight unit on the back of the hand, beam normal to the hand axis
        let axis = local(&f[7], &tip) - local(&f[7], &wrist);
        let axis = axis.normalize();
        let beam = (Vector3::z() - axis * axis.z).normalize();
        let mid = (local(&f[7], &wrist) + local(&f[7], &palm)) * 0.5;
        sensors.push(ProximitySensor {
            id: format!("{side}_hand"),
            link: link(6),
            position: mid + beam * 0.025,
            direction: beam,
        });
    }

    KinematicChain::new("icub-like", torso, arms, parts, sensors).expect("bundled chain is valid")
}

fn placeholder_parts() -> Vec<BodyPartSpec> {
    let mut parts = vec![BodyPartSpec {
        part: BodyPart::TORSO,
        links: (0..3).map(LinkId::Torso).collect(),
        samples: vec![],
    }];
    for side in Side::BOTH {
        for (kind, links) in [
            (BodyPartKind::UpperArm, 0..3),
            (BodyPartKind::Forearm, 3..5),
            (BodyPartKind::Hand, 5..7),
        ] {
            parts.push(BodyPartSpec {
                part: BodyPart::arm(side, kind),
                links: links.map(|k| LinkId::Arm(side, k)).collect(),
                samples: vec![],
            });
        }
    }
    parts
}

/// Neutral posture used as the home configuration and simulation start, rad.
pub fn home_posture() -> Vec<f64> {
    let arm = [-35.0, 50.0, 35.0, 70.0, 0.0, -40.0, 10.0];
    let mut q = vec![0.0; 3];
    q.extend(arm.iter().map(|d| d * DEG));
    q.extend(arm.iter().map(|d| d * DEG));
    q
}

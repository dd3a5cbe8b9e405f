use nalgebra::{DMatrix, DVector};

use super::{AvoidanceParams, CollisionPoint};
use crate::kinematics::{KinematicChain, LinkId, RobotFrames};
use crate::layout::DecisionLayout;

/// Allowed approach speed `(k1 - V a_t) k2` of a point, m/s; negative values demand retreat.
pub fn retreat_rhs(point: &CollisionPoint, params: &AvoidanceParams) -> f64 {
    (params.k1 - point.gain * point.threat) * params.k2.get(point.part.kind)
}

/// One row `n' J_C` per point over the decision vector, with the slack
/// columns and uncontrolled joints left at zero.
pub fn constraint_rows(
    points: &[CollisionPoint],
    chain: &KinematicChain,
    frames: &RobotFrames,
    params: &AvoidanceParams,
    layout: &DecisionLayout,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut a = DMatrix::zeros(points.len(), layout.n());
    let mut b = DVector::zeros(points.len());
    for (r, p) in points.iter().enumerate() {
        let world = frames.point(p.link, &p.local);
        let j = chain.jacobian_at(frames, p.link, &world);
        let torso = p.direction.transpose() * &j.torso_pos;
        for (k, v) in torso.iter().enumerate() {
            if let Some(c) = layout.column(k) {
                a[(r, c)] = *v;
            }
        }
        if let LinkId::Arm(side, _) = p.link {
            let arm = p.direction.transpose() * &j.arm_pos;
            for (k, v) in arm.iter().enumerate() {
                if let Some(c) = layout.column(chain.arm_joint_index(side, k)) {
                    a[(r, c)] = *v;
                }
            }
        }
        b[r] = retreat_rhs(p, params);
    }
    (a, b)
}

//! SO(3) helpers: rotation vectors, exponential/logarithm maps and geodesic angles.

use nalgebra::{Matrix3, Rotation3, Vector3};

use super::KinematicsError;

const SMALL_ANGLE: f64 = 1e-8;

/// Skew-symmetric matrix `[r]` with `[r] a = r x a`.
pub fn skew(r: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -r.z, r.y, r.z, 0.0, -r.x, -r.y, r.x, 0.0)
}

/// Matrix exponential of the skew matrix of `r` (Rodrigues' formula).
pub fn axis_angle_to_rotation(r: &Vector3<f64>) -> Rotation3<f64> {
    let theta = r.norm();
    let k = skew(r);
    let k2 = k * k;
    let m = if theta < SMALL_ANGLE {
        Matrix3::identity() + k + 0.5 * k2
    } else {
        let (s, c) = theta.sin_cos();
        Matrix3::identity() + (s / theta) * k + ((1.0 - c) / (theta * theta)) * k2
    };
    Rotation3::from_matrix_unchecked(m)
}

/// Logarithm of a rotation as a rotation vector with angle in `[0, pi]`.
///
/// The second element is `true` when the angle is pi up to rounding, in which
/// case the axis sign is not determined by the rotation and is picked so that
/// its largest-magnitude component is positive.
pub fn log_map(rot: &Rotation3<f64>) -> (Vector3<f64>, bool) {
    let m = rot.matrix();
    let w = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5;
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let s = w.norm();
    let theta = s.atan2(c);

    if theta < SMALL_ANGLE {
        // first-order: theta / sin(theta) ~ 1 + theta^2 / 6
        return (w * (1.0 + theta * theta / 6.0), false);
    }
    if c > 0.0 {
        return (w * (theta / s), false);
    }

    // Obtuse angles: recover the axis from the symmetric part, u u^T = (R + R^T - 2c I) / (2 (1 - c)).
    let b = (m + m.transpose() - Matrix3::identity() * (2.0 * c)) / (2.0 * (1.0 - c));
    let diag = [b[(0, 0)], b[(1, 1)], b[(2, 2)]];
    let mut k = 0;
    for i in 1..3 {
        if diag[i] > diag[k] {
            k = i;
        }
    }
    let mut axis = b.column(k).into_owned() / diag[k].max(f64::MIN_POSITIVE).sqrt();
    axis /= axis.norm();
    let dot = axis.dot(&w);
    let ambiguous = s <= 1e-12;
    if ambiguous {
        let largest = axis.iamax();
        if axis[largest] < 0.0 {
            axis = -axis;
        }
    } else if dot < 0.0 {
        axis = -axis;
    }
    (axis * theta, ambiguous)
}

/// Rotation vector of an orthonormal matrix; rejects matrices that are not rotations.
pub fn rotation_to_axis_angle(m: &Matrix3<f64>) -> Result<Vector3<f64>, KinematicsError> {
    let rot = checked_rotation(m)?;
    Ok(log_map(&rot).0)
}

/// Wraps a matrix as a rotation after checking orthonormality and `det = +1` within 1e-8.
pub fn checked_rotation(m: &Matrix3<f64>) -> Result<Rotation3<f64>, KinematicsError> {
    let err = (m.transpose() * m - Matrix3::identity()).abs().max();
    let det = m.determinant();
    if !err.is_finite() || err > 1e-8 || (det - 1.0).abs() > 1e-8 {
        return Err(KinematicsError::NotARotation { orthonormality_error: err, determinant: det });
    }
    Ok(Rotation3::from_matrix_unchecked(*m))
}

/// Angle of the relative rotation `b a^T`, in `[0, pi]`.
pub fn geodesic_angle(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
    let rel = b * a.inverse();
    let m = rel.matrix();
    let w = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5;
    let c = (m.trace() - 1.0) * 0.5;
    w.norm().atan2(c)
}

/// Rotation vector from the `[ux, uy, uz, angle]` notation; the axis need not be normalized.
pub fn axis_angle_from_parts(axis: [f64; 3], angle: f64) -> Vector3<f64> {
    let u = Vector3::from(axis);
    let n = u.norm();
    if n == 0.0 {
        Vector3::zeros()
    } else {
        u * (angle / n)
    }
}

/// Same rotation with the angle wrapped into `[0, pi]`.
pub fn canonical_axis_angle(r: &Vector3<f64>) -> Vector3<f64> {
    log_map(&axis_angle_to_rotation(r)).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn zero_vector_is_identity() {
        assert_eq!(*axis_angle_to_rotation(&Vector3::zeros()).matrix(), Matrix3::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = axis_angle_to_rotation(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        let c0 = r.matrix().column(0).into_owned();
        assert_relative_eq!(c0, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn half_turn_returns_pi_and_axis_up_to_sign() {
        for axis in [Vector3::x(), Vector3::y(), Vector3::new(1.0, -2.0, 0.5).normalize()] {
            let m = axis_angle_to_rotation(&(axis * PI));
            let r = rotation_to_axis_angle(m.matrix()).unwrap();
            assert_relative_eq!(r.norm(), PI, epsilon = 1e-12);
            let u = r / r.norm();
            assert!((u - axis).norm() < 1e-7 || (u + axis).norm() < 1e-7, "{u:?} vs {axis:?}");
        }
    }

    #[test]
    fn rejects_non_rotation() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(rotation_to_axis_angle(&m).is_err());
        assert!(rotation_to_axis_angle(&(Matrix3::identity() * 1.01)).is_err());
    }

    #[test]
    fn axis_and_angle_form_normalizes_axis() {
        let r = axis_angle_from_parts([0.0, 0.0, 2.0], 1.5);
        assert_relative_eq!(r, Vector3::new(0.0, 0.0, 1.5));
    }

    proptest! {
        #[test]
        fn round_trip(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, angle in 1e-6f64..(PI - 1e-6)) {
            let u = Vector3::new(x, y, z);
            prop_assume!(u.norm() > 1e-3);
            let r = u.normalize() * angle;
            let rot = axis_angle_to_rotation(&r);
            let err = (rot.matrix().transpose() * rot.matrix() - Matrix3::identity()).abs().max();
            prop_assert!(err < 1e-10);
            let back = rotation_to_axis_angle(rot.matrix()).unwrap();
            prop_assert!((back - r).amax() < 1e-9, "{:?} vs {:?}", back, r);
        }

        #[test]
        fn geodesic_matches_log_norm(a in prop::array::uniform3(-2.0f64..2.0), b in prop::array::uniform3(-2.0f64..2.0)) {
            let ra = axis_angle_to_rotation(&Vector3::from(a));
            let rb = axis_angle_to_rotation(&Vector3::from(b));
            let rel = log_map(&(rb * ra.inverse())).0.norm();
            prop_assert!((geodesic_angle(&ra, &rb) - rel).abs() < 1e-9);
        }
    }
}

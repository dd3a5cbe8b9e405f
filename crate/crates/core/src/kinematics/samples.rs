//! Regular surface sampling of capsule primitives.

use std::f64::consts::PI;

use nalgebra::Vector3;

/// Points on the surface of the capsule around segment `p0`-`p1`.
///
/// Neighbouring points along the axis, around each ring and along the cap
/// meridians are at most `spacing` apart.
pub fn capsule_surface(p0: &Vector3<f64>, p1: &Vector3<f64>, radius: f64, spacing: f64) -> Vec<Vector3<f64>> {
    assert!(radius > 0.0 && spacing > 0.0, "capsule needs positive radius and spacing");
    let axis = p1 - p0;
    let length = axis.norm();
    let dir = if length > 1e-12 { axis / length } else { Vector3::z() };
    let helper = if dir.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = dir.cross(&helper).normalize();
    let v = dir.cross(&u);

    let ring = |center: Vector3<f64>, r: f64, out: &mut Vec<Vector3<f64>>| {
        let count = ((2.0 * PI * r / spacing).ceil() as usize).max(3);
        for k in 0..count {
            let phi = 2.0 * PI * k as f64 / count as f64;
            out.push(center + (u * phi.cos() + v * phi.sin()) * r);
        }
    };

    let mut out = Vec::new();
    let segments = ((length / spacing).ceil() as usize).max(1);
    for i in 0..=segments {
        ring(p0 + axis * (i as f64 / segments as f64), radius, &mut out);
    }
    // hemispherical caps: latitude rings then the pole
    let lat_steps = ((0.5 * PI * radius / spacing).ceil() as usize).max(1);
    for (center, sign) in [(*p0, -1.0), (*p1, 1.0)] {
        for i in 1..lat_steps {
            let theta = 0.5 * PI * i as f64 / lat_steps as f64;
            ring(center + dir * (sign * radius * theta.sin()), radius * theta.cos(), &mut out);
        }
        out.push(center + dir * (sign * radius));
    }
    out
}

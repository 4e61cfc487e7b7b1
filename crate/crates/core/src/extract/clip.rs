//! Half-space clipping of a single triangle against `msdf >= 0`.
//!
//! This is a plain Sutherland-Hodgman pass, independent of the clip table in
//! [`super::table`]; it exists to cross-check table-driven extraction.

use crate::extract::crossing_coefficient;
use crate::vec3::Vec3;
use crate::Real;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClipOutput<T> {
    pub triangles: Vec<[Vec3<T>; 3]>,
    pub boundary_segments: Vec<[Vec3<T>; 2]>,
}

/// Clips triangle `positions` with per-corner scalar `values`, keeping the
/// region where the linearly interpolated value is non-negative.
pub fn clip_oracle<T: Real>(positions: [Vec3<T>; 3], values: [T; 3]) -> ClipOutput<T> {
    let inside = |v: T| v >= T::zero();
    let mut polygon: Vec<Vec3<T>> = Vec::with_capacity(4);
    let mut crossings: Vec<Vec3<T>> = Vec::with_capacity(2);
    for i in 0..3 {
        let j = (i + 1) % 3;
        let (p, q) = (positions[i], positions[j]);
        let (vp, vq) = (values[i], values[j]);
        if inside(vp) {
            polygon.push(p);
        }
        if inside(vp) != inside(vq) {
            let x = crossing_point(p, q, vp, vq);
            polygon.push(x);
            crossings.push(x);
        }
    }
    let mut out = ClipOutput::default();
    for k in 1..polygon.len().saturating_sub(1) {
        out.triangles.push([polygon[0], polygon[k], polygon[k + 1]]);
    }
    if crossings.len() == 2 {
        let exit = crossing_order(values);
        out.boundary_segments.push([crossings[exit], crossings[1 - exit]]);
    }
    out
}

/// Index (0 or 1) into the crossing list of the crossing where the winding
/// leaves the kept region.
fn crossing_order<T: Real>(values: [T; 3]) -> usize {
    let inside = |v: T| v >= T::zero();
    let mut k = 0;
    for i in 0..3 {
        let j = (i + 1) % 3;
        if inside(values[i]) != inside(values[j]) {
            if inside(values[i]) {
                return k;
            }
            k += 1;
        }
    }
    0
}

/// Zero crossing between `p` (value `vp`) and `q` (value `vq`), using the same
/// clamped interpolation rule as extraction.
fn crossing_point<T: Real>(p: Vec3<T>, q: Vec3<T>, vp: T, vq: T) -> Vec3<T> {
    let (t, _) = crossing_coefficient(vp, vq);
    p.lerp(&q, t)
}

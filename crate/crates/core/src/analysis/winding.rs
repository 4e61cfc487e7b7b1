use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::grid::Aabb;
use crate::mesh::ExtractedMesh;
use crate::sampling::sample_surface;
use crate::spatial::TriangleIndex;
use crate::vec3::{closest_point_barycentric, Vec3};
use crate::Real;

/// Queries closer than this to the surface are perturbed before evaluation.
pub const ON_SURFACE_DISTANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WindingSample<T> {
    pub query: Vec3<T>,
    pub winding: T,
    pub dist_to_surface: T,
    /// The query was on the surface and `winding` was evaluated at a perturbed point.
    pub on_surface: bool,
}

/// Signed solid angle of triangle `(a, b, c)` seen from `q`
/// (Van Oosterom & Strackee). Positive when `q` is behind the triangle's
/// counter-clockwise normal.
#[inline]
pub fn solid_angle<T: Real>(a: &Vec3<T>, b: &Vec3<T>, c: &Vec3<T>, q: &Vec3<T>) -> T {
    let (ra, rb, rc) = (*a - *q, *b - *q, *c - *q);
    let (la, lb, lc) = (ra.norm(), rb.norm(), rc.norm());
    let det = ra.dot(&rb.cross(&rc));
    let denom = la * lb * lc + ra.dot(&rb) * lc + ra.dot(&rc) * lb + rb.dot(&rc) * la;
    T::lit(2.0) * det.atan2(denom)
}

/// `w(q) = (1 / 4 pi) * sum of signed solid angles`, without the on-surface check.
pub fn winding_number_unchecked<T: Real>(mesh: &ExtractedMesh<T>, q: &Vec3<T>) -> T {
    let mut total = T::zero();
    for f in &mesh.faces {
        let [a, b, c] = f.map(|v| mesh.position(v as usize));
        total += solid_angle(&a, &b, &c, q);
    }
    total / (T::lit(4.0) * T::PI())
}

/// Generalized winding number at `q` with on-surface detection.
pub fn winding_number<T: Real>(mesh: &ExtractedMesh<T>, q: &Vec3<T>) -> WindingSample<T> {
    let mut best = (T::infinity(), 0usize);
    for (fi, f) in mesh.faces.iter().enumerate() {
        let [a, b, c] = f.map(|v| mesh.position(v as usize));
        let w = closest_point_barycentric(q, &a, &b, &c);
        let d = (a * w[0] + b * w[1] + c * w[2] - *q).norm();
        if d < best.0 {
            best = (d, fi);
        }
    }
    evaluate(mesh, q, best.0, best.1)
}

fn evaluate<T: Real>(mesh: &ExtractedMesh<T>, q: &Vec3<T>, dist: T, face: usize) -> WindingSample<T> {
    if dist > T::lit(ON_SURFACE_DISTANCE) || mesh.faces.is_empty() {
        return WindingSample {
            query: *q,
            winding: winding_number_unchecked(mesh, q),
            dist_to_surface: dist,
            on_surface: false,
        };
    }
    let [a, b, c] = mesh.face_positions(face);
    let n = (b - a).cross(&(c - a));
    let n = if n.norm() > T::zero() { n / n.norm() } else { Vec3::new(T::zero(), T::zero(), T::one()) };
    let diag = Aabb::from_points(mesh.vertices.iter().map(|v| match v {
        crate::mesh::Vertex::Mesh(m) => &m.position,
        crate::mesh::Vertex::Boundary(b) => &b.position,
    }))
    .map(|bb| bb.extent().norm())
    .unwrap_or(T::one());
    let shifted = *q + n * (diag * T::lit(1e-6));
    WindingSample {
        query: *q,
        winding: winding_number_unchecked(mesh, &shifted),
        dist_to_surface: dist,
        on_surface: true,
    }
}

/// Samples `count` points uniformly in the band of half-width `band` around
/// the surface (surface sample + normal offset) and evaluates the winding
/// number and distance to surface at each.
pub fn sample_winding_field<T: Real, R: Rng>(
    mesh: &ExtractedMesh<T>,
    count: usize,
    band: T,
    rng: &mut R,
) -> Vec<WindingSample<T>> {
    if mesh.is_empty() || count == 0 {
        return Vec::new();
    }
    let surf = sample_surface(mesh, count, rng);
    let queries: Vec<Vec3<T>> = surf
        .iter()
        .map(|s| {
            let [a, b, c] = mesh.face_positions(s.face);
            let n = (b - a).cross(&(c - a));
            let n = n / n.norm();
            let t = T::lit(rng.gen_range(-1.0..=1.0));
            s.point + n * (band * t)
        })
        .collect();
    let index = TriangleIndex::new((0..mesh.faces.len()).map(|f| mesh.face_positions(f)).collect());
    queries
        .par_iter()
        .map(|q| {
            let hit = index.closest(q).expect("non-empty mesh");
            evaluate(mesh, q, hit.dist_sq.sqrt(), hit.face)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> ExtractedMesh<f64> {
        let p: Vec<Vec3<f64>> = (0..8)
            .map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
            .collect();
        // outward-facing quads split into triangles
        let quads = [
            [0, 2, 3, 1], // z = 0
            [4, 5, 7, 6], // z = 1
            [0, 1, 5, 4], // y = 0
            [2, 6, 7, 3], // y = 1
            [0, 4, 6, 2], // x = 0
            [1, 3, 7, 5], // x = 1
        ];
        let mut f = Vec::new();
        for q in quads {
            f.push([q[0], q[1], q[2]]);
            f.push([q[0], q[2], q[3]]);
        }
        ExtractedMesh::from_triangles(p, f)
    }

    fn sheet() -> ExtractedMesh<f64> {
        ExtractedMesh::from_triangles(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
    }

    #[test]
    fn cube_interior_and_exterior() {
        let m = cube();
        let inside = winding_number(&m, &Vec3::splat(0.5));
        assert!((inside.winding - 1.0).abs() < 1e-9);
        let outside = winding_number(&m, &Vec3::splat(10.0));
        assert!(outside.winding.abs() < 1e-9);
    }

    #[test]
    fn sheet_half_space_limit() {
        // oracle: solid angle in polar coordinates about the foot point,
        // Omega = int_0^{2 pi} (1 - h / sqrt(R(theta)^2 + h^2)) dtheta,
        // R(theta) = distance to the square's edge; midpoint rule in theta
        let h = 1e-4;
        let q = Vec3::new(0.5, 0.5, h);
        let w = winding_number(&sheet(), &q).winding;
        let n = 200_000;
        let mut omega = 0.0;
        let dt = 2.0 * std::f64::consts::PI / n as f64;
        for i in 0..n {
            let t = (i as f64 + 0.5) * dt;
            let r = 0.5 / t.cos().abs().max(t.sin().abs());
            omega += (1.0 - h / (r * r + h * h).sqrt()) * dt;
        }
        let quad = omega / (4.0 * std::f64::consts::PI);
        // counter-clockwise sheet seen from above: the query is in front of the normal
        assert!(w < 0.0);
        assert!(w.abs() >= 0.499 && w.abs() <= 0.5, "w = {w}");
        assert!((w.abs() - quad).abs() < 1e-9, "w = {w}, quadrature = {quad}");
    }

    #[test]
    fn flipping_orientation_negates() {
        let m = sheet();
        let q = Vec3::new(0.3, 0.8, 0.7);
        let a = winding_number_unchecked(&m, &q);
        let b = winding_number_unchecked(&m.flipped(), &q);
        assert!(a.abs() > 0.01);
        assert!((a + b).abs() < 1e-15);
    }

    #[test]
    fn on_surface_is_flagged() {
        let s = winding_number(&sheet(), &Vec3::new(0.5, 0.25, 0.0));
        assert!(s.on_surface);
        assert!(s.winding.is_finite());
    }

    #[test]
    fn additive_over_face_partition() {
        let m = cube();
        let q = Vec3::new(0.2, 0.4, 0.6);
        let (p, f) = (m.positions(), m.faces.clone());
        let a = ExtractedMesh::from_triangles(p.clone(), f[..5].to_vec());
        let b = ExtractedMesh::from_triangles(p, f[5..].to_vec());
        let sum = winding_number_unchecked(&a, &q) + winding_number_unchecked(&b, &q);
        assert!((sum - winding_number_unchecked(&m, &q)).abs() < 1e-12);
    }
}

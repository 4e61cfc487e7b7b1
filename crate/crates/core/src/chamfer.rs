//! Symmetric Chamfer distance between an extracted mesh and a point cloud.
//!
//! `C = mean_q d(q, mesh) + mean_x d(x, target)`, where `q` runs over target
//! points, `x` over area-uniform samples of the mesh, and `d` is the unsigned
//! Euclidean distance (point-to-triangle for the first term, nearest target
//! point for the second).

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::ExtractedMesh;
use crate::sampling::sample_surface;
use crate::spatial::{PointIndex, TriangleIndex};
use crate::vec3::Vec3;
use crate::Real;

/// Value reported for a mesh without faces. It is far above any distance
/// inside a unit-scale grid, so an optimizer sees the collapse as a failure.
pub const EMPTY_MESH_CHAMFER: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChamferTerms {
    pub total: f64,
    /// Mean distance from target points to the mesh.
    pub target_to_mesh: f64,
    /// Mean distance from mesh samples to the target points.
    pub mesh_to_target: f64,
}

impl ChamferTerms {
    fn empty() -> Self {
        ChamferTerms {
            total: EMPTY_MESH_CHAMFER,
            target_to_mesh: EMPTY_MESH_CHAMFER,
            mesh_to_target: EMPTY_MESH_CHAMFER,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChamferGrad<T> {
    pub terms: ChamferTerms,
    /// Gradient of `total` with respect to every mesh vertex position.
    pub position_cot: Vec<Vec3<T>>,
}

/// Target point cloud with its nearest-neighbour index.
pub struct ChamferTarget<T> {
    index: PointIndex<T>,
}

impl<T: Real> ChamferTarget<T> {
    pub fn new(points: Vec<Vec3<T>>) -> Self {
        ChamferTarget { index: PointIndex::new(points) }
    }

    pub fn points(&self) -> &[Vec3<T>] {
        self.index.points()
    }

    pub fn len(&self) -> usize {
        self.index.points().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn mesh_index<T: Real>(mesh: &ExtractedMesh<T>) -> TriangleIndex<T> {
    TriangleIndex::new((0..mesh.faces.len()).map(|f| mesh.face_positions(f)).collect())
}

/// Chamfer value and vertex gradient.
///
/// `target_subset` target points (all if `None` or larger than the cloud) and
/// `mesh_samples` surface samples are drawn from `rng`. Barycentric sample
/// coordinates and nearest-neighbour assignments are held fixed when
/// differentiating.
pub fn chamfer_with_grad<T: Real, R: Rng + ?Sized>(
    mesh: &ExtractedMesh<T>,
    target: &ChamferTarget<T>,
    target_subset: Option<usize>,
    mesh_samples: usize,
    rng: &mut R,
) -> ChamferGrad<T> {
    let nv = mesh.num_vertices();
    let mut position_cot = vec![Vec3::zero(); nv];
    if mesh.faces.is_empty() || target.is_empty() {
        return ChamferGrad { terms: ChamferTerms::empty(), position_cot };
    }
    let tri_index = mesh_index(mesh);
    let points = target.points();
    let queries: Vec<usize> = match target_subset {
        Some(k) if k < points.len() => {
            let mut idx = sample_indices(rng, points.len(), k).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..points.len()).collect(),
    };
    let samples = sample_surface(mesh, mesh_samples, rng);

    let forward: Vec<_> = queries
        .par_iter()
        .map(|q| {
            let q = points[*q];
            let hit = tri_index.closest(&q).expect("non-empty mesh");
            (hit, q)
        })
        .collect();
    let backward: Vec<_> = samples
        .par_iter()
        .map(|s| {
            let (i, d2) = target.index.nearest(&s.point).expect("non-empty target");
            (s, points[i], d2)
        })
        .collect();

    let wf = T::one() / T::from_usize_lossy(forward.len());
    let mut sum_f = 0.0;
    for (hit, q) in &forward {
        let d = hit.dist_sq.sqrt();
        sum_f += d.as_f64();
        if d > T::zero() {
            let dir = (hit.point - *q) * (wf / d);
            let face = mesh.faces[hit.face];
            for k in 0..3 {
                position_cot[face[k] as usize] += dir * hit.barycentric[k];
            }
        }
    }
    let mut sum_b = 0.0;
    if !backward.is_empty() {
        let wb = T::one() / T::from_usize_lossy(backward.len());
        for (s, t, d2) in &backward {
            let d = d2.sqrt();
            sum_b += d.as_f64();
            if d > T::zero() {
                let dir = (s.point - *t) * (wb / d);
                let face = mesh.faces[s.face];
                for k in 0..3 {
                    position_cot[face[k] as usize] += dir * s.barycentric[k];
                }
            }
        }
    }
    let target_to_mesh = sum_f / forward.len() as f64;
    let mesh_to_target = if backward.is_empty() { 0.0 } else { sum_b / backward.len() as f64 };
    ChamferGrad {
        terms: ChamferTerms {
            total: target_to_mesh + mesh_to_target,
            target_to_mesh,
            mesh_to_target,
        },
        position_cot,
    }
}

/// Chamfer distance as an evaluation metric: every target point against the
/// mesh, `mesh_samples` surface samples against the target.
pub fn chamfer_distance<T: Real, R: Rng + ?Sized>(
    mesh: &ExtractedMesh<T>,
    target: &ChamferTarget<T>,
    mesh_samples: usize,
    rng: &mut R,
) -> ChamferTerms {
    chamfer_with_grad(mesh, target, None, mesh_samples, rng).terms
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn sheet(z: f64, n: usize) -> ExtractedMesh<f64> {
        let mut pos = Vec::new();
        for i in 0..=n {
            for j in 0..=n {
                pos.push(Vec3::new(i as f64 / n as f64, j as f64 / n as f64, z));
            }
        }
        let id = |i: usize, j: usize| (i * (n + 1) + j) as u32;
        let mut faces = Vec::new();
        for i in 0..n {
            for j in 0..n {
                faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        ExtractedMesh::from_triangles(pos, faces)
    }

    #[test]
    fn self_chamfer_with_matched_samples_is_zero() {
        let m = sheet(0.0, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<_> = sample_surface(&m, 2000, &mut rng).into_iter().map(|s| s.point).collect();
        let target = ChamferTarget::new(pts);
        // same seed again: mesh samples coincide with the target
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = chamfer_distance(&m, &target, 2000, &mut rng);
        assert!(c.total <= 1e-6, "{c:?}");
    }

    #[test]
    fn translated_sheet() {
        let d = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let target_mesh = sheet(d, 1);
        let pts: Vec<_> = sample_surface(&target_mesh, 50_000, &mut rng)
            .into_iter()
            .map(|s| s.point)
            .collect();
        let c = chamfer_distance(&sheet(0.0, 1), &ChamferTarget::new(pts), 50_000, &mut rng);
        // the first term is exactly d; the second is d plus in-plane spacing
        assert!((c.target_to_mesh - d).abs() < 1e-12);
        assert!((c.mesh_to_target - d).abs() < 0.05 * d, "{c:?}");
    }

    #[test]
    fn empty_mesh_gives_sentinel() {
        let target = ChamferTarget::new(vec![Vec3::<f64>::zero()]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = chamfer_with_grad(&ExtractedMesh::default(), &target, None, 10, &mut rng);
        assert_eq!(g.terms.total, EMPTY_MESH_CHAMFER);
        assert!(g.position_cot.is_empty());
    }

    #[test]
    fn gradient_matches_differences_for_fixed_assignment() {
        // target-to-mesh only: one point above a triangle
        let m = ExtractedMesh::from_triangles(
            vec![Vec3::zero(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        );
        let q = Vec3::new(0.2, 0.3, 0.5);
        let target = ChamferTarget::new(vec![q]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = chamfer_with_grad(&m, &target, None, 0, &mut rng);
        let eval = |m: &ExtractedMesh<f64>| {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            chamfer_with_grad(m, &target, None, 0, &mut rng).terms.total
        };
        for v in 0..3 {
            for axis in 0..3 {
                let h = 1e-6;
                let mut p = m.clone();
                let mut n = m.clone();
                if let crate::mesh::Vertex::Boundary(b) = &mut p.vertices[v] {
                    b.position.0[axis] += h;
                }
                if let crate::mesh::Vertex::Boundary(b) = &mut n.vertices[v] {
                    b.position.0[axis] -= h;
                }
                let fd = (eval(&p) - eval(&n)) / (2.0 * h);
                assert!((fd - g.position_cot[v].0[axis]).abs() < 1e-7);
            }
        }
    }
}

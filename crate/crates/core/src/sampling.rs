//! Area-uniform point sampling on triangle meshes.

use rand::Rng;

use crate::mesh::ExtractedMesh;
use crate::vec3::Vec3;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSample<T> {
    pub face: usize,
    pub barycentric: [T; 3],
    pub point: Vec3<T>,
}

/// Draws `count` points uniformly by area. Returns nothing for a mesh with
/// zero total area.
pub fn sample_surface<T: Real, R: Rng + ?Sized>(
    mesh: &ExtractedMesh<T>,
    count: usize,
    rng: &mut R,
) -> Vec<SurfaceSample<T>> {
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0f64;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f).as_f64();
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            let u = rng.gen::<f64>() * total;
            let face = cumulative.partition_point(|c| *c <= u).min(mesh.faces.len() - 1);
            let r1 = rng.gen::<f64>().sqrt();
            let r2 = rng.gen::<f64>();
            let w = [1.0 - r1, r1 * (1.0 - r2), r1 * r2].map(T::lit);
            let [a, b, c] = mesh.face_positions(face);
            SurfaceSample {
                face,
                barycentric: w,
                point: a * w[0] + b * w[1] + c * w[2],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_follow_area() {
        // two triangles with areas 1/2 and 3/2
        let mesh = ExtractedMesh::from_triangles(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(5.0, 0.0, 0.0),
                Vec3::new(8.0, 0.0, 0.0),
                Vec3::new(5.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = sample_surface(&mesh, 40_000, &mut rng);
        let frac = s.iter().filter(|x| x.face == 1).count() as f64 / s.len() as f64;
        assert!((frac - 0.75).abs() < 0.01);
        for x in &s {
            assert!(x.barycentric.iter().all(|w| *w >= 0.0));
            assert!((x.barycentric.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_mesh_gives_no_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mesh: ExtractedMesh<f64> = ExtractedMesh::default();
        assert!(sample_surface(&mesh, 10, &mut rng).is_empty());
    }
}

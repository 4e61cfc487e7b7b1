//! Regularizers on grids and extracted meshes, each returned together with
//! its gradient.
//!
//! The two mSDF regularizers produce cotangents on projected mSDF values and
//! are meant to be pulled back with [`VjpOptions::msdf_only`], so they never
//! move SDF values or offsets.
//!
//! [`VjpOptions::msdf_only`]: crate::autodiff::VjpOptions::msdf_only

use crate::autodiff::GridGradients;
use crate::grid::TetGrid;
use crate::mesh::{ExtractedMesh, Vertex};
use crate::scalar::is_negative;
use crate::vec3::Vec3;
use crate::Real;

/// `x^2 / 2` for `|x| <= delta`, `delta (|x| - delta / 2)` beyond.
#[inline]
pub fn huber<T: Real>(x: T, delta: T) -> T {
    let a = x.abs();
    if a <= delta {
        x * x * T::lit(0.5)
    } else {
        delta * (a - delta * T::lit(0.5))
    }
}

#[inline]
pub fn huber_grad<T: Real>(x: T, delta: T) -> T {
    if x.abs() <= delta {
        x
    } else {
        delta * x.signum()
    }
}

/// Loss value with cotangents on the projected mSDF of every mesh vertex.
#[derive(Clone, Debug)]
pub struct MsdfLoss<T> {
    pub value: T,
    pub msdf_cot: Vec<T>,
}

fn projected<T: Real>(mesh: &ExtractedMesh<T>, i: usize) -> T {
    mesh.vertices[i]
        .as_mesh()
        .and_then(|m| m.projected_msdf)
        .expect("template vertex with projected mSDF")
}

/// Sum of `huber(nu')` over template vertices with `nu' >= 0`. Pushes kept
/// regions towards the hole threshold so that unsupported surface opens.
pub fn msdf_reg_open<T: Real>(mesh: &ExtractedMesh<T>, delta: T) -> MsdfLoss<T> {
    let mut value = T::zero();
    let mut msdf_cot = vec![T::zero(); mesh.num_vertices()];
    for (i, v) in mesh.vertices.iter().enumerate() {
        let Some(nu) = v.as_mesh().and_then(|m| m.projected_msdf) else { continue };
        if !is_negative(nu) {
            value += huber(nu, delta);
            msdf_cot[i] = huber_grad(nu, delta);
        }
    }
    MsdfLoss { value, msdf_cot }
}

/// Sum over boundary vertices of `huber(nu'(o) - epsilon)`, where `nu'(o)` is
/// interpolated from the two template endpoints with the cut coefficient
/// held fixed. Pulls the boundary towards `+epsilon`, shrinking holes.
pub fn msdf_reg_close<T: Real>(mesh: &ExtractedMesh<T>, epsilon: T, delta: T) -> MsdfLoss<T> {
    let mut value = T::zero();
    let mut msdf_cot = vec![T::zero(); mesh.num_vertices()];
    for (o, b) in mesh.boundary_vertices() {
        let [i, j] = b.source_mesh_edge.map(|x| x as usize);
        let nu = (T::one() - b.beta) * projected(mesh, i) + b.beta * projected(mesh, j);
        value += huber(nu - epsilon, delta);
        msdf_cot[o] = huber_grad(nu - epsilon, delta);
    }
    MsdfLoss { value, msdf_cot }
}

/// `log(1 + e^x)` without overflow.
#[inline]
fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Binary cross-entropy between `sigmoid(s_i)` and the sign of `s_j` (and
/// vice versa) summed over all grid edges; targets are constants. Returns the
/// value and the gradient with respect to `sdf`.
pub fn sdf_reg<T: Real>(grid: &TetGrid<T>) -> (T, Vec<T>) {
    let mut value = T::zero();
    let mut grad = vec![T::zero(); grid.num_vertices()];
    let target = |s: T| if is_negative(s) { T::zero() } else { T::one() };
    for e in grid.edges() {
        let (a, b) = (e.lo(), e.hi());
        for (x, y) in [(a, b), (b, a)] {
            let s = grid.sdf[x];
            let t = target(grid.sdf[y]);
            // -t log sigmoid(s) - (1 - t) log(1 - sigmoid(s))
            value += t * softplus(-s) + (T::one() - t) * softplus(s);
            grad[x] += sigmoid(s) - t;
        }
    }
    (value, grad)
}

/// Discrete Eikonal term with its gradient.
#[derive(Clone, Debug)]
pub struct EikonalLoss<T> {
    pub value: T,
    pub grad: GridGradients<T>,
    /// Vertices skipped because their source tet is degenerate.
    pub degenerate: usize,
}

/// Mean over template vertices of `(|grad s| - 1)^2`, where `grad s` is the
/// gradient of the linear interpolant of SDF over the vertex's source tet.
/// Differentiated with respect to both SDF values and offsets.
pub fn eikonal<T: Real>(grid: &TetGrid<T>, mesh: &ExtractedMesh<T>) -> EikonalLoss<T> {
    let mut grad = GridGradients::zeros(grid.num_vertices());
    let mut value = T::zero();
    let mut count = 0usize;
    let mut degenerate = 0usize;
    let mut terms: Vec<([u32; 4], [T; 4], [Vec3<T>; 4])> = Vec::new();
    for v in &mesh.vertices {
        let Vertex::Mesh(mv) = v else { continue };
        let tet = grid.tets()[mv.source_tet as usize];
        let p = tet.map(|i| grid.position(i as usize));
        let s = tet.map(|i| grid.sdf[i as usize]);
        let e = [p[1] - p[0], p[2] - p[0], p[3] - p[0]];
        let ds = [s[1] - s[0], s[2] - s[0], s[3] - s[0]];
        let det = e[0].dot(&e[1].cross(&e[2]));
        let size = e[0].norm() * e[1].norm() * e[2].norm();
        if !(det.abs() > T::lit(1e-12) * size) {
            degenerate += 1;
            continue;
        }
        // rows of E^{-1}^T = columns of E^{-1}: c_k = (e_{k+1} x e_{k+2}) / det
        let c = [
            e[1].cross(&e[2]) / det,
            e[2].cross(&e[0]) / det,
            e[0].cross(&e[1]) / det,
        ];
        let g = c[0] * ds[0] + c[1] * ds[1] + c[2] * ds[2];
        let n = g.norm();
        value += (n - T::one()) * (n - T::one());
        count += 1;
        // w = dL/dg, lambda = E^{-T} w: lambda_k = <c_k, w>
        let w = if n > T::zero() { g * (T::lit(2.0) * (n - T::one()) / n) } else { Vec3::zero() };
        let lambda = [c[0].dot(&w), c[1].dot(&w), c[2].dot(&w)];
        let ls = lambda[0] + lambda[1] + lambda[2];
        let sg = [-ls, lambda[0], lambda[1], lambda[2]];
        let pg = [g * ls, g * -lambda[0], g * -lambda[1], g * -lambda[2]];
        terms.push((tet, sg, pg));
    }
    if count == 0 {
        return EikonalLoss { value: T::zero(), grad, degenerate };
    }
    let inv = T::one() / T::from_usize_lossy(count);
    let scale = grid.deformation_scale();
    for (tet, sg, pg) in terms {
        for k in 0..4 {
            let i = tet[k] as usize;
            grad.sdf[i] += sg[k] * inv;
            grad.offsets[i] += pg[k] * (inv * scale);
        }
    }
    EikonalLoss { value: value * inv, grad, degenerate }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::autodiff::{vjp, VjpOptions};
    use crate::extract::{extract_gshell, extract_watertight};
    use crate::grid::{build_uniform_tet_grid, Aabb, EdgeKey};
    use crate::mesh::{BoundaryVertex, MeshVertex};

    fn template_with(nu: &[f64]) -> ExtractedMesh<f64> {
        let vertices = nu
            .iter()
            .enumerate()
            .map(|(k, v)| {
                Vertex::Mesh(MeshVertex {
                    position: Vec3::new(k as f64, 0.0, 0.0),
                    source_edge: EdgeKey::new(2 * k as u32, 2 * k as u32 + 1),
                    alpha: 0.5,
                    alpha_clamped: false,
                    source_tet: 0,
                    projected_msdf: Some(*v),
                })
            })
            .collect();
        ExtractedMesh { vertices, ..Default::default() }
    }

    #[test]
    fn huber_branches_and_continuity() {
        assert_eq!(huber(0.5, 1.0), 0.125);
        assert_eq!(huber(2.0, 1.0), 1.5);
        assert_eq!(huber(-2.0, 1.0), 1.5);
        for d in [0.1f64, 1.0, 3.0] {
            let e = 1e-9;
            for x in [d, -d] {
                assert!((huber(x + e, d) - huber(x - e, d)).abs() < 1e-8);
                assert!((huber_grad(x + e, d) - huber_grad(x - e, d)).abs() < 1e-8);
            }
            let x = 1.7 * d;
            let fd = (huber(x + 1e-6, d) - huber(x - 1e-6, d)) / 2e-6;
            assert!((fd - huber_grad(x, d)).abs() < 1e-6);
        }
    }

    #[test]
    fn reg_open_examples() {
        assert_eq!(msdf_reg_open(&template_with(&[0.5, -1.0, 2.0]), 1.0).value, 1.625);
        assert_eq!(msdf_reg_open(&template_with(&[-0.5, -1.0]), 1.0).value, 0.0);
        assert_eq!(msdf_reg_open(&template_with(&[0.0]), 1.0).value, 0.0);
    }

    #[test]
    fn reg_close_examples() {
        let mut m = template_with(&[-1.0, 1.0]);
        assert_eq!(msdf_reg_close(&m, 1e-3, 1.0).value, 0.0);
        m.vertices.push(Vertex::Boundary(BoundaryVertex {
            position: Vec3::new(0.5, 0.0, 0.0),
            source_mesh_edge: [0, 1],
            beta: 0.5,
            beta_clamped: false,
        }));
        let v = msdf_reg_close(&m, 1e-3, 1.0).value;
        assert!((v - 5e-7).abs() < 1e-18);
        // boundary value already at epsilon
        let mut m2 = template_with(&[-1.0, 1.002]);
        m2.vertices.push(Vertex::Boundary(BoundaryVertex {
            position: Vec3::zero(),
            source_mesh_edge: [0, 1],
            beta: 0.5,
            beta_clamped: false,
        }));
        assert!(msdf_reg_close(&m2, 1e-3, 1.0).value < 1e-30);
    }

    fn two_vertex_grid(s: [f64; 2]) -> TetGrid<f64> {
        let p = vec![
            Vec3::zero(),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        // edge (0, 1) plus the remaining edges at s = +10 contribute a known constant
        TetGrid::from_tet_mesh(p, vec![[0, 1, 2, 3]], vec![s[0], s[1], 10.0, 10.0], vec![1.0; 4]).unwrap()
    }

    #[test]
    fn sdf_reg_examples() {
        let base = sdf_reg(&two_vertex_grid([10.0, 10.0])).0;
        let per_edge = base / 6.0;
        assert!((per_edge - 9.08e-5).abs() < 1e-7, "{per_edge}");
        // edges (0,1), (1,2), (1,3) now disagree in sign
        let mixed = sdf_reg(&two_vertex_grid([10.0, -10.0])).0;
        let expected = 6.0 * softplus(10.0) + 6.0 * softplus(-10.0);
        assert!((mixed - expected).abs() < 1e-12);
        assert!((2.0 * softplus(10.0) - 20.0f64).abs() < 1e-3);
        assert!(mixed > base);
    }

    #[test]
    fn sdf_reg_pair_values() {
        let h = |s: f64, t: f64| t * softplus(-s) + (1.0 - t) * softplus(s);
        assert!((2.0 * h(10.0, 1.0) - 9.08e-5).abs() < 1e-7);
        assert!((2.0 * h(10.0, 0.0) - 20.0).abs() < 1e-3);
    }

    #[test]
    fn sdf_reg_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut g = build_uniform_tet_grid(3, Aabb::centered_cube(1.0)).unwrap();
        for s in g.sdf.iter_mut() {
            *s = rng.gen_range(-2.0..2.0);
        }
        let (_, grad) = sdf_reg(&g);
        for i in [0, 7, 30, 63] {
            let h = 1e-6;
            let mut p = g.clone();
            p.sdf[i] += h;
            let mut m = g.clone();
            m.sdf[i] -= h;
            let fd: f64 = (sdf_reg(&p).0 - sdf_reg(&m).0) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-6, "{fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn flipping_one_vertex_increases_sdf_reg() {
        let mut g = build_uniform_tet_grid(3, Aabb::centered_cube(1.0)).unwrap();
        g.sdf.iter_mut().for_each(|s| *s = 1.0);
        let uniform = sdf_reg(&g).0;
        g.sdf[21] = -1.0;
        assert!(sdf_reg(&g).0 > uniform);
    }

    fn linear_grid(slope: f64) -> TetGrid<f64> {
        let mut g = build_uniform_tet_grid(4, Aabb::centered_cube(1.0)).unwrap();
        for i in 0..g.num_vertices() {
            g.sdf[i] = slope * (g.position(i).z() - 0.1);
            g.msdf[i] = 1.0;
        }
        g
    }

    #[test]
    fn eikonal_of_linear_fields() {
        let g = linear_grid(1.0);
        let e = eikonal(&g, &extract_watertight(&g));
        assert!(e.value < 1e-24);
        let g = linear_grid(2.0);
        let e = eikonal(&g, &extract_watertight(&g));
        assert!((e.value - 1.0).abs() < 1e-12);
        assert_eq!(e.degenerate, 0);
    }

    #[test]
    fn eikonal_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut g = build_uniform_tet_grid(4, Aabb::centered_cube(1.0)).unwrap();
        for i in 0..g.num_vertices() {
            let s: f64 = g.position(i).norm() * 1.7 - 0.6 + rng.gen_range(-0.1..0.1);
            g.sdf[i] = if s.abs() < 0.05 { 0.05 } else { s };
            g.set_offset(i, Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), 0.0));
        }
        let mesh = extract_watertight(&g);
        let e = eikonal(&g, &mesh);
        assert!(e.value > 0.0);
        // mesh topology and source tets stay fixed for small steps
        let eval = |g: &TetGrid<f64>| {
            let mut m = mesh.clone();
            m.source_grid = None;
            eikonal(g, &m).value
        };
        for i in (0..g.num_vertices()).step_by(7) {
            let h = 1e-6;
            let mut p = g.clone();
            p.sdf[i] += h;
            let mut m = g.clone();
            m.sdf[i] -= h;
            let fd = (eval(&p) - eval(&m)) / (2.0 * h);
            assert!((fd - e.grad.sdf[i]).abs() < 1e-6, "sdf {i}: {fd} vs {}", e.grad.sdf[i]);
            let mut p = g.clone();
            let mut o = p.offsets()[i];
            o.0[0] += h;
            p.set_offset(i, o);
            let mut m = g.clone();
            let mut o = m.offsets()[i];
            o.0[0] -= h;
            m.set_offset(i, o);
            let fd = (eval(&p) - eval(&m)) / (2.0 * h);
            assert!((fd - e.grad.offsets[i].x()).abs() < 1e-6);
        }
    }

    #[test]
    fn msdf_losses_never_touch_sdf_or_offsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let mut g = build_uniform_tet_grid(5, Aabb::centered_cube(1.0)).unwrap();
        for i in 0..g.num_vertices() {
            g.sdf[i] = g.position(i).norm() - 0.55;
            g.msdf[i] = rng.gen_range(-1.0..1.0);
        }
        let m = extract_gshell(&g);
        let zero = vec![Vec3::zero(); m.num_vertices()];
        for loss in [msdf_reg_open(&m, 1.0), msdf_reg_close(&m, 1e-3, 1.0)] {
            let gr = vjp(&g, &m, &zero, Some(&loss.msdf_cot), VjpOptions::msdf_only()).unwrap();
            assert!(gr.sdf.iter().all(|v| *v == 0.0));
            assert!(gr.offsets.iter().all(|v| *v == Vec3::zero()));
            assert!(gr.msdf.iter().any(|v| *v != 0.0));
        }
    }
}

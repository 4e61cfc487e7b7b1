use proptest::prelude::*;

use gshell::analysis::{manifold_report, winding_number_unchecked};
use gshell::extract::{clip_oracle, crossing_coefficient, ALPHA_CLAMP};
use gshell::gradcheck::{check_once, GradcheckConfig};
use gshell::grid::{build_uniform_tet_grid, Aabb};
use gshell::io::{grid_from_json, grid_to_json};
use gshell::losses::{huber, huber_grad};
use gshell::tensorize::{decode, encode, extract_with_alpha};
use gshell::vec3::triangle_area;
use gshell::*;

fn vec3() -> impl Strategy<Value = Vec3<f64>> {
    prop::array::uniform3(-1.0f64..1.0).prop_map(Vec3)
}

/// Grid of resolution `res` with SDF values from `sdf` (cycled) and the
/// outer shell forced positive, so the zero set stays inside.
fn grid_from(res: usize, sdf: &[f64], msdf: &[f64], offsets: &[[f64; 3]]) -> TetGridF64 {
    let mut g = build_uniform_tet_grid(res, Aabb::centered_cube(1.0)).unwrap();
    let n = res + 1;
    for i in 0..g.num_vertices() {
        let (a, b, c) = (i / (n * n), (i / n) % n, i % n);
        let shell = [a, b, c].iter().any(|&x| x == 0 || x == res);
        g.sdf[i] = if shell { 1.0 } else { sdf[i % sdf.len()] };
        g.msdf[i] = msdf[i % msdf.len()];
        g.set_offset(i, Vec3(offsets[i % offsets.len()]));
    }
    g
}

fn grid_strategy() -> impl Strategy<Value = TetGridF64> {
    (
        2usize..6,
        prop::collection::vec(-1.0f64..1.0, 1..64),
        prop::collection::vec(-1.0f64..1.0, 1..64),
        prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..16),
    )
        .prop_map(|(res, s, m, o)| grid_from(res, &s, &m, &o))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clipping_partitions_the_triangle(a in vec3(), b in vec3(), c in vec3(), v in prop::array::uniform3(-1.0f64..1.0)) {
        let full = triangle_area(&a, &b, &c);
        prop_assume!(full > 1e-3);
        prop_assume!(v.iter().all(|x| x.abs() > 1e-3));
        let keep: f64 = clip_oracle([a, b, c], v).triangles.iter().map(|[p, q, r]| triangle_area(p, q, r)).sum();
        let drop: f64 = clip_oracle([a, b, c], v.map(|x| -x)).triangles.iter().map(|[p, q, r]| triangle_area(p, q, r)).sum();
        prop_assert!((keep + drop - full).abs() <= 1e-12 * full.max(1.0));
    }

    #[test]
    fn crossing_coefficient_stays_in_clamp_range(a in -1e3f64..1e3, b in -1e3f64..1e3) {
        let (t, _) = crossing_coefficient(a, b);
        prop_assert!(t >= ALPHA_CLAMP && t <= 1.0 - ALPHA_CLAMP);
    }

    #[test]
    fn watertight_extraction_is_closed_and_consistently_oriented(g in grid_strategy()) {
        let mesh = extract_watertight(&g);
        let rep = manifold_report(&mesh);
        prop_assert_eq!(rep.num_boundary_edges, 0);
        prop_assert_eq!(rep.inconsistently_oriented_edges, 0);
        prop_assert!(rep.non_manifold_edges.is_empty());
        // a far point sees zero winding
        if !mesh.faces.is_empty() {
            let w = winding_number_unchecked(&mesh, &Vec3::splat(10.0));
            prop_assert!(w.abs() < 1e-9);
        }
    }

    #[test]
    fn opposite_msdf_splits_the_template(g in grid_strategy()) {
        prop_assume!(g.msdf.iter().all(|m| m.abs() > 1e-6));
        let mut neg = g.clone();
        neg.msdf.iter_mut().for_each(|m| *m = -*m);
        let full = extract_watertight(&g).total_area();
        let split = extract_gshell(&g).total_area() + extract_gshell(&neg).total_area();
        prop_assert!((full - split).abs() <= 1e-9 * full.max(1.0), "{} vs {}", full, split);
    }

    #[test]
    fn open_boundary_is_the_clip_boundary(g in grid_strategy()) {
        let mesh = extract_gshell(&g);
        let rep = manifold_report(&mesh);
        prop_assert_eq!(rep.num_boundary_edges, mesh.boundary_edges.len());
        prop_assert_eq!(rep.inconsistently_oriented_edges, 0);
        for e in &mesh.boundary_edges {
            for v in e {
                prop_assert!(mesh.vertices[*v as usize].as_boundary().is_some());
            }
        }
    }

    #[test]
    fn grid_json_roundtrip_is_bit_exact(g in grid_strategy(), tiny in prop::num::f64::ANY) {
        let mut g = g;
        if tiny.is_finite() {
            g.sdf[0] = tiny;
        }
        let back: TetGridF64 = grid_from_json(&grid_to_json(&g).unwrap()).unwrap();
        prop_assert_eq!(
            back.sdf.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            g.sdf.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        prop_assert_eq!(back, g);
    }

    #[test]
    fn tensor_roundtrip_reproduces_the_open_mesh(g in grid_strategy()) {
        let (decoded, table) = decode(&encode(&g).unwrap()).unwrap();
        prop_assert_eq!(&decoded.sdf, &g.sdf);
        let a = extract_with_alpha(&decoded, &table).unwrap();
        let b = extract_gshell(&g);
        prop_assert_eq!(&a.faces, &b.faces);
        for (p, q) in a.positions().iter().zip(b.positions()) {
            prop_assert!(p.distance(&q) <= 1e-12);
        }
    }

    #[test]
    fn huber_is_nonnegative_with_bounded_slope(x in -10.0f64..10.0, delta in 0.1f64..3.0) {
        prop_assert!(huber(x, delta) >= 0.0);
        prop_assert!(huber_grad(x, delta).abs() <= delta + 1e-15);
        let h = 1e-6;
        let fd = (huber(x + h, delta) - huber(x - h, delta)) / (2.0 * h);
        prop_assert!((fd - huber_grad(x, delta)).abs() < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn vjp_matches_finite_differences(seed in any::<u64>()) {
        let case = check_once(&GradcheckConfig::default(), seed).unwrap();
        prop_assert!(case.max_relative_error < 1e-4, "{:?}", case);
    }
}

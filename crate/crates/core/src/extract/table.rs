//! Marching Tetrahedra case table.
//!
//! Case index: bit `k` set iff local vertex `k` has negative SDF. Each case
//! lists the crossed local edges (indices into [`TET_EDGES`]) as a polygon of
//! 0, 3 or 4 entries, ordered so the polygon normal points towards positive
//! SDF for a positively oriented tet.

use std::sync::OnceLock;

use crate::grid::TET_EDGES;
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TetCase {
    pub polygon: [u8; 4],
    pub len: u8,
}

impl TetCase {
    pub fn edges(&self) -> &[u8] {
        &self.polygon[..self.len as usize]
    }
}

pub fn local_edge(a: usize, b: usize) -> u8 {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    TET_EDGES.iter().position(|e| *e == [a, b]).expect("valid local edge") as u8
}

pub fn tet_cases() -> &'static [TetCase; 16] {
    static TABLE: OnceLock<[TetCase; 16]> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

fn build_table() -> [TetCase; 16] {
    let mut table = [TetCase { polygon: [0; 4], len: 0 }; 16];
    for (mask, entry) in table.iter_mut().enumerate() {
        let neg: Vec<usize> = (0..4).filter(|k| mask & (1 << k) != 0).collect();
        let pos: Vec<usize> = (0..4).filter(|k| mask & (1 << k) == 0).collect();
        let mut poly: Vec<u8> = match (neg.len(), pos.len()) {
            (1, 3) => pos.iter().map(|p| local_edge(neg[0], *p)).collect(),
            (3, 1) => neg.iter().map(|n| local_edge(*n, pos[0])).collect(),
            (2, 2) => vec![
                local_edge(neg[0], pos[0]),
                local_edge(neg[0], pos[1]),
                local_edge(neg[1], pos[1]),
                local_edge(neg[1], pos[0]),
            ],
            _ => Vec::new(),
        };
        if !poly.is_empty() && !points_to_positive(mask, &poly) {
            poly.reverse();
        }
        entry.len = poly.len() as u8;
        entry.polygon[..poly.len()].copy_from_slice(&poly);
    }
    table
}

/// Orientation check on the reference tet (0, e_x, e_y, e_z), which is
/// positively oriented; every positively oriented tet is an
/// orientation-preserving affine image of it.
fn points_to_positive(mask: usize, poly: &[u8]) -> bool {
    let corners = [
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
    ];
    let mid = |e: u8| {
        let [a, b] = TET_EDGES[e as usize];
        (corners[a] + corners[b]) * 0.5
    };
    let pts: Vec<Vec3<f64>> = poly.iter().map(|e| mid(*e)).collect();
    let mut normal = Vec3::zero();
    for i in 1..pts.len() - 1 {
        normal += (pts[i] - pts[0]).cross(&(pts[i + 1] - pts[0]));
    }
    let centroid = |neg: bool| {
        let sel: Vec<Vec3<f64>> = (0..4)
            .filter(|k| (mask & (1 << k) != 0) == neg)
            .map(|k| corners[k])
            .collect();
        sel.iter().fold(Vec3::zero(), |acc, p| acc + *p) / sel.len() as f64
    };
    normal.dot(&(centroid(false) - centroid(true))) > 0.0
}

/// Kept/discarded clipping of one template triangle by projected mSDF sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClipItem {
    /// Corner `k` of the triangle.
    Corner(u8),
    /// Zero crossing on the triangle edge between corners `a` and `b`.
    Cut(u8, u8),
}

/// Clip case: kept polygon (fan-triangulated from its first item) and the
/// directed boundary segment, if any.
#[derive(Clone, Copy, Debug)]
pub struct ClipCase {
    pub polygon: &'static [ClipItem],
    pub boundary: Option<[ClipItem; 2]>,
}

use ClipItem::{Corner as V, Cut as C};

/// Indexed by bit `k` set iff corner `k` is kept (projected mSDF >= 0).
pub const CLIP_CASES: [ClipCase; 8] = [
    ClipCase { polygon: &[], boundary: None },
    ClipCase { polygon: &[V(0), C(0, 1), C(2, 0)], boundary: Some([C(0, 1), C(2, 0)]) },
    ClipCase { polygon: &[V(1), C(1, 2), C(0, 1)], boundary: Some([C(1, 2), C(0, 1)]) },
    ClipCase { polygon: &[V(0), V(1), C(1, 2), C(2, 0)], boundary: Some([C(1, 2), C(2, 0)]) },
    ClipCase { polygon: &[V(2), C(2, 0), C(1, 2)], boundary: Some([C(2, 0), C(1, 2)]) },
    ClipCase { polygon: &[V(2), V(0), C(0, 1), C(1, 2)], boundary: Some([C(0, 1), C(1, 2)]) },
    ClipCase { polygon: &[V(1), V(2), C(2, 0), C(0, 1)], boundary: Some([C(2, 0), C(0, 1)]) },
    ClipCase { polygon: &[V(0), V(1), V(2)], boundary: None },
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_sizes() {
        let t = tet_cases();
        for (mask, case) in t.iter().enumerate() {
            let expected = match (mask as u32).count_ones() {
                0 | 4 => 0,
                1 | 3 => 3,
                _ => 4,
            };
            assert_eq!(case.len as usize, expected, "mask {mask:04b}");
        }
    }

    #[test]
    fn complementary_cases_reverse_orientation() {
        let t = tet_cases();
        for mask in 1..15usize {
            let a = t[mask].edges();
            let b = t[15 - mask].edges();
            // same crossed edges
            let mut sa = a.to_vec();
            let mut sb = b.to_vec();
            sa.sort();
            sb.sort();
            assert_eq!(sa, sb);
            assert!(points_to_positive(mask, a));
            assert!(points_to_positive(15 - mask, b));
        }
    }

    #[test]
    fn clip_cases_are_cyclic_rotations() {
        // the polygon must follow the triangle winding 0 -> 1 -> 2
        for (mask, case) in CLIP_CASES.iter().enumerate() {
            let kept: Vec<u8> = case
                .polygon
                .iter()
                .filter_map(|i| if let V(k) = i { Some(*k) } else { None })
                .collect();
            assert_eq!(kept.len(), (mask as u32).count_ones() as usize);
            for k in kept {
                assert!(mask & (1 << k) != 0);
            }
            if let Some([a, b]) = case.boundary {
                let pa = case.polygon.iter().position(|x| *x == a).unwrap();
                let pb = case.polygon.iter().position(|x| *x == b).unwrap();
                assert_eq!((pa + 1) % case.polygon.len(), pb);
            }
        }
    }
}

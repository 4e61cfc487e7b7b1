//! Bounding-volume hierarchy for nearest-point queries on triangles and points.

use crate::grid::Aabb;
use crate::vec3::{closest_point_barycentric, Vec3};
use crate::Real;

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct Node<T> {
    bbox: Aabb<T>,
    /// Leaf: first primitive slot. Inner: index of the left child (right = left + 1).
    first: u32,
    /// Number of primitives; zero for inner nodes.
    count: u32,
}

#[derive(Clone, Debug)]
pub struct Bvh<T> {
    nodes: Vec<Node<T>>,
    order: Vec<u32>,
}

impl<T: Real> Bvh<T> {
    pub fn build(boxes: &[Aabb<T>]) -> Self {
        let mut order: Vec<u32> = (0..boxes.len() as u32).collect();
        let centroids: Vec<Vec3<T>> = boxes
            .iter()
            .map(|b| (b.min + b.max) * T::lit(0.5))
            .collect();
        let mut nodes = Vec::with_capacity(2 * boxes.len() / LEAF_SIZE + 1);
        if !boxes.is_empty() {
            nodes.push(Node {
                bbox: boxes[0],
                first: 0,
                count: 0,
            });
            build_node(&mut nodes, 0, &mut order, 0, boxes, &centroids);
        }
        Bvh { nodes, order }
    }

    /// Closest primitive under the squared distance `dist_sq(index)`.
    pub fn nearest(&self, q: &Vec3<T>, mut dist_sq: impl FnMut(u32) -> T) -> Option<(u32, T)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(u32, T)> = None;
        let mut stack: Vec<(usize, T)> = vec![(0, box_dist_sq(&self.nodes[0].bbox, q))];
        while let Some((ni, lb)) = stack.pop() {
            if let Some((_, bd)) = best {
                if lb > bd {
                    continue;
                }
            }
            let node = &self.nodes[ni];
            if node.count > 0 {
                let start = node.first as usize;
                for &prim in &self.order[start..start + node.count as usize] {
                    let d = dist_sq(prim);
                    if best.is_none_or(|(bi, bd)| d < bd || (d == bd && prim < bi)) {
                        best = Some((prim, d));
                    }
                }
            } else {
                let l = node.first as usize;
                let r = l + 1;
                let dl = box_dist_sq(&self.nodes[l].bbox, q);
                let dr = box_dist_sq(&self.nodes[r].bbox, q);
                // nearer child popped first
                if dl <= dr {
                    stack.push((r, dr));
                    stack.push((l, dl));
                } else {
                    stack.push((l, dl));
                    stack.push((r, dr));
                }
            }
        }
        best
    }
}

fn build_node<T: Real>(
    nodes: &mut Vec<Node<T>>,
    ni: usize,
    order: &mut [u32],
    offset: usize,
    boxes: &[Aabb<T>],
    centroids: &[Vec3<T>],
) {
    let bbox = order
        .iter()
        .skip(1)
        .fold(boxes[order[0] as usize], |acc, &i| {
            let b = &boxes[i as usize];
            Aabb::new(acc.min.min_elem(&b.min), acc.max.max_elem(&b.max))
        });
    nodes[ni].bbox = bbox;
    if order.len() <= LEAF_SIZE {
        nodes[ni].first = offset as u32;
        nodes[ni].count = order.len() as u32;
        return;
    }
    let cb = Aabb::from_points(order.iter().map(|&i| &centroids[i as usize])).expect("non-empty");
    let ext = cb.extent();
    let axis = if ext.x() >= ext.y() && ext.x() >= ext.z() {
        0
    } else if ext.y() >= ext.z() {
        1
    } else {
        2
    };
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |a, b| {
        let ca = centroids[*a as usize][axis];
        let cb = centroids[*b as usize][axis];
        ca.partial_cmp(&cb).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(b))
    });
    let left = nodes.len();
    nodes.push(Node { bbox, first: 0, count: 0 });
    nodes.push(Node { bbox, first: 0, count: 0 });
    nodes[ni].first = left as u32;
    nodes[ni].count = 0;
    let (lo, hi) = order.split_at_mut(mid);
    build_node(nodes, left, lo, offset, boxes, centroids);
    build_node(nodes, left + 1, hi, offset + mid, boxes, centroids);
}

#[inline]
fn box_dist_sq<T: Real>(b: &Aabb<T>, q: &Vec3<T>) -> T {
    let mut d = T::zero();
    for k in 0..3 {
        let v = if q[k] < b.min[k] {
            b.min[k] - q[k]
        } else if q[k] > b.max[k] {
            q[k] - b.max[k]
        } else {
            T::zero()
        };
        d += v * v;
    }
    d
}

/// Result of a closest-point query against a triangle set.
#[derive(Clone, Copy, Debug)]
pub struct ClosestOnSurface<T> {
    pub face: usize,
    pub barycentric: [T; 3],
    pub point: Vec3<T>,
    pub dist_sq: T,
}

/// Nearest-point index over a fixed set of triangles.
pub struct TriangleIndex<T> {
    tris: Vec<[Vec3<T>; 3]>,
    bvh: Bvh<T>,
}

impl<T: Real> TriangleIndex<T> {
    pub fn new(tris: Vec<[Vec3<T>; 3]>) -> Self {
        let boxes: Vec<Aabb<T>> = tris
            .iter()
            .map(|t| Aabb::from_points(t.iter()).expect("three corners"))
            .collect();
        let bvh = Bvh::build(&boxes);
        TriangleIndex { tris, bvh }
    }

    pub fn len(&self) -> usize {
        self.tris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    pub fn closest(&self, q: &Vec3<T>) -> Option<ClosestOnSurface<T>> {
        let tris = &self.tris;
        let (face, dist_sq) = self.bvh.nearest(q, |i| {
            let [a, b, c] = &tris[i as usize];
            let w = closest_point_barycentric(q, a, b, c);
            let p = *a * w[0] + *b * w[1] + *c * w[2];
            (p - *q).norm_squared()
        })?;
        let [a, b, c] = &tris[face as usize];
        let w = closest_point_barycentric(q, a, b, c);
        Some(ClosestOnSurface {
            face: face as usize,
            barycentric: w,
            point: *a * w[0] + *b * w[1] + *c * w[2],
            dist_sq,
        })
    }
}

/// Nearest-neighbour index over a fixed point set.
pub struct PointIndex<T> {
    points: Vec<Vec3<T>>,
    bvh: Bvh<T>,
}

impl<T: Real> PointIndex<T> {
    pub fn new(points: Vec<Vec3<T>>) -> Self {
        let boxes: Vec<Aabb<T>> = points.iter().map(|p| Aabb::new(*p, *p)).collect();
        let bvh = Bvh::build(&boxes);
        PointIndex { points, bvh }
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    /// Index and squared distance of the nearest point.
    pub fn nearest(&self, q: &Vec3<T>) -> Option<(usize, T)> {
        let pts = &self.points;
        self.bvh
            .nearest(q, |i| (pts[i as usize] - *q).norm_squared())
            .map(|(i, d)| (i as usize, d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng) -> Vec3<f64> {
        Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn point_index_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Vec3<f64>> = (0..500).map(|_| random_point(&mut rng)).collect();
        let index = PointIndex::new(pts.clone());
        for _ in 0..200 {
            let q = random_point(&mut rng) * 1.5;
            let (_, d) = index.nearest(&q).unwrap();
            let brute = pts.iter().map(|p| (*p - q).norm_squared()).fold(f64::MAX, f64::min);
            assert_eq!(d, brute);
        }
    }

    #[test]
    fn triangle_index_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tris: Vec<[Vec3<f64>; 3]> = (0..300)
            .map(|_| {
                let c = random_point(&mut rng);
                [c, c + random_point(&mut rng) * 0.1, c + random_point(&mut rng) * 0.1]
            })
            .collect();
        let index = TriangleIndex::new(tris.clone());
        for _ in 0..200 {
            let q = random_point(&mut rng);
            let hit = index.closest(&q).unwrap();
            let brute = tris
                .iter()
                .map(|[a, b, c]| {
                    let w = closest_point_barycentric(&q, a, b, c);
                    (*a * w[0] + *b * w[1] + *c * w[2] - q).norm_squared()
                })
                .fold(f64::MAX, f64::min);
            assert!((hit.dist_sq - brute).abs() <= 1e-15);
        }
    }

    #[test]
    fn empty_index() {
        let index: PointIndex<f64> = PointIndex::new(Vec::new());
        assert!(index.nearest(&Vec3::zero()).is_none());
    }
}

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::mesh::ExtractedMesh;
use crate::Real;

/// Countable topology summary of a triangle mesh.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifoldReport {
    /// Vertices referenced by at least one face.
    pub num_vertices: usize,
    pub num_edges: usize,
    pub num_faces: usize,
    pub euler_characteristic: i64,
    /// Number of incident faces -> number of edges with that incidence.
    pub edge_incidence_histogram: BTreeMap<usize, usize>,
    pub num_boundary_edges: usize,
    pub boundary_loop_lengths: Vec<usize>,
    pub non_manifold_edges: Vec<[u32; 2]>,
    pub non_manifold_vertices: Vec<u32>,
    pub connected_components: usize,
    /// Interior edges traversed in the same direction by both incident faces.
    pub inconsistently_oriented_edges: usize,
    pub is_closed: bool,
}

impl ManifoldReport {
    pub fn num_boundary_loops(&self) -> usize {
        self.boundary_loop_lengths.len()
    }

    pub fn is_manifold(&self) -> bool {
        self.non_manifold_edges.is_empty() && self.non_manifold_vertices.is_empty()
    }
}

fn key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Directed edges whose undirected edge belongs to exactly one face, in face order.
pub fn open_edges(faces: &[[u32; 3]]) -> Vec<[u32; 2]> {
    let mut count: HashMap<(u32, u32), usize> = HashMap::new();
    for f in faces {
        for k in 0..3 {
            *count.entry(key(f[k], f[(k + 1) % 3])).or_default() += 1;
        }
    }
    let mut out = Vec::new();
    for f in faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            if count[&key(a, b)] == 1 {
                out.push([a, b]);
            }
        }
    }
    out
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

pub fn manifold_report<T: Real>(mesh: &ExtractedMesh<T>) -> ManifoldReport {
    let faces = &mesh.faces;
    let nv = mesh.num_vertices();

    // undirected edge -> (incident faces, net direction count)
    let mut edges: BTreeMap<(u32, u32), (Vec<usize>, i32)> = BTreeMap::new();
    let mut referenced = vec![false; nv];
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            referenced[a as usize] = true;
            let e = edges.entry(key(a, b)).or_default();
            e.0.push(fi);
            e.1 += if a < b { 1 } else { -1 };
        }
    }
    let num_vertices = referenced.iter().filter(|r| **r).count();

    let mut histogram = BTreeMap::new();
    let mut non_manifold_edges = Vec::new();
    let mut inconsistent = 0;
    for (&(a, b), (inc, dir)) in &edges {
        *histogram.entry(inc.len()).or_insert(0) += 1;
        if inc.len() > 2 {
            non_manifold_edges.push([a, b]);
        } else if inc.len() == 2 && *dir != 0 {
            inconsistent += 1;
        }
    }

    // vertex manifoldness: the faces around a vertex must form one fan
    let mut vertex_faces: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (fi, f) in faces.iter().enumerate() {
        for v in f {
            vertex_faces[*v as usize].push(fi);
        }
    }
    let mut non_manifold_vertices = Vec::new();
    for (v, incident) in vertex_faces.iter().enumerate() {
        if incident.len() < 2 {
            continue;
        }
        let mut uf = UnionFind::new(incident.len());
        for i in 0..incident.len() {
            for j in (i + 1)..incident.len() {
                let (fa, fb) = (&faces[incident[i]], &faces[incident[j]]);
                let shared = fa
                    .iter()
                    .filter(|x| **x as usize != v && fb.contains(x))
                    .count();
                if shared > 0 {
                    uf.union(i, j);
                }
            }
        }
        let roots = (0..incident.len())
            .map(|i| uf.find(i))
            .collect::<std::collections::BTreeSet<_>>();
        if roots.len() > 1 {
            non_manifold_vertices.push(v as u32);
        }
    }

    // connected components over referenced vertices
    let mut uf = UnionFind::new(nv);
    for f in faces {
        uf.union(f[0] as usize, f[1] as usize);
        uf.union(f[1] as usize, f[2] as usize);
    }
    let components = (0..nv)
        .filter(|v| referenced[*v])
        .map(|v| uf.find(v))
        .collect::<std::collections::BTreeSet<_>>()
        .len();

    let boundary = open_edges(faces);
    let loops = boundary_loops(&boundary);

    let num_edges = edges.len();
    ManifoldReport {
        num_vertices,
        num_edges,
        num_faces: faces.len(),
        euler_characteristic: num_vertices as i64 - num_edges as i64 + faces.len() as i64,
        edge_incidence_histogram: histogram,
        num_boundary_edges: boundary.len(),
        boundary_loop_lengths: loops.iter().map(Vec::len).collect(),
        non_manifold_edges,
        non_manifold_vertices,
        connected_components: components,
        inconsistently_oriented_edges: inconsistent,
        is_closed: boundary.is_empty() && !faces.is_empty(),
    }
}

/// Chains directed boundary edges into closed loops (vertex sequences).
pub fn boundary_loops(edges: &[[u32; 2]]) -> Vec<Vec<u32>> {
    let mut outgoing: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, [a, _]) in edges.iter().enumerate() {
        outgoing.entry(*a).or_default().push(i);
    }
    let mut used = vec![false; edges.len()];
    let mut loops = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut lp = Vec::new();
        let mut cur = start;
        loop {
            used[cur] = true;
            lp.push(edges[cur][0]);
            let next_v = edges[cur][1];
            let next = outgoing
                .get(&next_v)
                .and_then(|c| c.iter().copied().find(|e| !used[*e]));
            match next {
                Some(n) => cur = n,
                None => break,
            }
        }
        loops.push(lp);
    }
    loops
}

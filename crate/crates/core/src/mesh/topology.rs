use std::collections::BTreeMap;

use serde::Serialize;

use super::{Bvh, TriMesh};

/// Undirected edge `(lo, hi)` to the faces using it, in face order.
pub type EdgeMap = BTreeMap<(u32, u32), Vec<u32>>;

/// Tolerance for the interior-overlap test between faces (mm).
const INTERSECTION_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidityReport {
    pub is_watertight: bool,
    pub boundary_edge_count: usize,
    /// Edges with more than two faces, or two faces traversing the edge in
    /// the same direction.
    pub non_manifold_edge_count: usize,
    pub self_intersecting_face_pairs: Vec<(u32, u32)>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.is_watertight && self.self_intersecting_face_pairs.is_empty()
    }
}

pub fn build_edge_map(mesh: &TriMesh) -> EdgeMap {
    let mut map = EdgeMap::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            map.entry((a.min(b), a.max(b))).or_default().push(fi as u32);
        }
    }
    map
}

/// Does face `f` traverse the edge as `a -> b`?
fn traverses(f: &[u32; 3], a: u32, b: u32) -> bool {
    (0..3).any(|k| f[k] == a && f[(k + 1) % 3] == b)
}

pub fn check_validity(mesh: &TriMesh) -> ValidityReport {
    let edges = build_edge_map(mesh);
    let faces = mesh.faces();
    let mut boundary = 0;
    let mut non_manifold = 0;
    for (&(a, b), inc) in &edges {
        match inc.len() {
            1 => boundary += 1,
            2 => {
                let f0 = &faces[inc[0] as usize];
                let f1 = &faces[inc[1] as usize];
                if traverses(f0, a, b) == traverses(f1, a, b) {
                    non_manifold += 1;
                }
            }
            _ => non_manifold += 1,
        }
    }
    ValidityReport {
        is_watertight: boundary == 0 && non_manifold == 0,
        boundary_edge_count: boundary,
        non_manifold_edge_count: non_manifold,
        self_intersecting_face_pairs: self_intersections(mesh),
    }
}

fn share_vertex(f: &[u32; 3], g: &[u32; 3]) -> bool {
    f.iter().any(|i| g.contains(i))
}

fn self_intersections(mesh: &TriMesh) -> Vec<(u32, u32)> {
    if mesh.face_count() < 2 {
        return Vec::new();
    }
    let bvh = Bvh::build(mesh);
    let faces = mesh.faces();
    let mut pairs = Vec::new();
    bvh.for_each_overlapping_pair(INTERSECTION_EPS, |i, j| {
        let (fi, fj) = (&faces[i as usize], &faces[j as usize]);
        if share_vertex(fi, fj) {
            return;
        }
        let (ti, tj) = (mesh.triangle(i as usize), mesh.triangle(j as usize));
        if crate::geom::triangles_intersect(&ti, &tj, INTERSECTION_EPS) {
            pairs.push((i.min(j), i.max(j)));
        }
    });
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

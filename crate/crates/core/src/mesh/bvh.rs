use crate::geom::{closest_point_on_triangle, ray_triangle, Aabb, Vec3};

use super::TriMesh;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    aabb: Aabb,
    /// Leaf: first slot in `order`. Interior: index of the left child
    /// (the right child is `first + 1`).
    first: u32,
    /// Number of faces for a leaf, 0 for interior nodes.
    count: u32,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.count > 0
    }
}

/// Bounding-volume hierarchy over the faces of one mesh snapshot.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    boxes: Vec<Aabb>,
    triangles: Vec<[Vec3; 3]>,
}

impl Bvh {
    pub fn build(mesh: &TriMesh) -> Self {
        let triangles: Vec<[Vec3; 3]> = (0..mesh.face_count()).map(|f| mesh.triangle(f)).collect();
        let boxes: Vec<Aabb> = triangles.iter().map(Aabb::from_points).collect();
        let centroids: Vec<Vec3> = triangles.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        nodes.push(Node {
            aabb: Aabb::empty(),
            first: 0,
            count: 0,
        });
        if !triangles.is_empty() {
            Self::split(&mut nodes, 0, &mut order, 0, &boxes, &centroids);
        }
        Self {
            nodes,
            order,
            boxes,
            triangles,
        }
    }

    fn split(nodes: &mut Vec<Node>, node: usize, order: &mut [u32], offset: usize, boxes: &[Aabb], centroids: &[Vec3]) {
        let bb = order
            .iter()
            .fold(Aabb::empty(), |acc, &f| acc.union(&boxes[f as usize]));
        nodes[node].aabb = bb;
        if order.len() <= LEAF_SIZE {
            nodes[node].first = offset as u32;
            nodes[node].count = order.len() as u32;
            return;
        }
        let cb = Aabb::from_points(order.iter().map(|&f| &centroids[f as usize]));
        let axis = cb.longest_axis();
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        let left = nodes.len();
        let empty = Node {
            aabb: Aabb::empty(),
            first: 0,
            count: 0,
        };
        nodes.push(empty.clone());
        nodes.push(empty);
        nodes[node].first = left as u32;
        nodes[node].count = 0;
        let (lo, hi) = order.split_at_mut(mid);
        Self::split(nodes, left, lo, offset, boxes, centroids);
        Self::split(nodes, left + 1, hi, offset + mid, boxes, centroids);
    }

    fn leaf_faces(&self, node: &Node) -> &[u32] {
        &self.order[node.first as usize..(node.first + node.count) as usize]
    }

    /// Calls `visit(i, j)` for every face pair `i != j` whose boxes overlap
    /// within `tol`. Each unordered pair is reported once.
    pub fn for_each_overlapping_pair(&self, tol: f64, mut visit: impl FnMut(u32, u32)) {
        if self.triangles.is_empty() {
            return;
        }
        let mut stack = vec![(0usize, 0usize)];
        while let Some((a, b)) = stack.pop() {
            let (na, nb) = (&self.nodes[a], &self.nodes[b]);
            if a == b {
                if na.is_leaf() {
                    let fs = self.leaf_faces(na);
                    for (i, &fi) in fs.iter().enumerate() {
                        for &fj in &fs[i + 1..] {
                            if self.boxes[fi as usize].overlaps(&self.boxes[fj as usize], tol) {
                                visit(fi, fj);
                            }
                        }
                    }
                } else {
                    let l = na.first as usize;
                    stack.push((l, l));
                    stack.push((l + 1, l + 1));
                    stack.push((l, l + 1));
                }
                continue;
            }
            if !na.aabb.overlaps(&nb.aabb, tol) {
                continue;
            }
            match (na.is_leaf(), nb.is_leaf()) {
                (true, true) => {
                    for &fi in self.leaf_faces(na) {
                        for &fj in self.leaf_faces(nb) {
                            if self.boxes[fi as usize].overlaps(&self.boxes[fj as usize], tol) {
                                visit(fi, fj);
                            }
                        }
                    }
                }
                (false, true) => {
                    let l = na.first as usize;
                    stack.push((l, b));
                    stack.push((l + 1, b));
                }
                (true, false) => {
                    let l = nb.first as usize;
                    stack.push((a, l));
                    stack.push((a, l + 1));
                }
                (false, false) => {
                    // descend into the larger box
                    let ea = na.aabb.extent().norm_squared();
                    let eb = nb.aabb.extent().norm_squared();
                    if ea >= eb {
                        let l = na.first as usize;
                        stack.push((l, b));
                        stack.push((l + 1, b));
                    } else {
                        let l = nb.first as usize;
                        stack.push((a, l));
                        stack.push((a, l + 1));
                    }
                }
            }
        }
    }

    /// Nearest face and distance to `p`.
    pub fn closest(&self, p: &Vec3) -> Option<(u32, f64)> {
        if self.triangles.is_empty() {
            return None;
        }
        let mut best = (u32::MAX, f64::INFINITY);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.aabb.distance_squared(p) >= best.1 {
                continue;
            }
            if node.is_leaf() {
                for &f in self.leaf_faces(node) {
                    let t = &self.triangles[f as usize];
                    let q = closest_point_on_triangle(p, &t[0], &t[1], &t[2]);
                    let d2 = (q - p).norm_squared();
                    if d2 < best.1 || (d2 == best.1 && f < best.0) {
                        best = (f, d2);
                    }
                }
            } else {
                let l = node.first as usize;
                let dl = self.nodes[l].aabb.distance_squared(p);
                let dr = self.nodes[l + 1].aabb.distance_squared(p);
                // visit the nearer child first
                if dl <= dr {
                    stack.push(l + 1);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(l + 1);
                }
            }
        }
        Some((best.0, best.1.sqrt()))
    }

    /// Number of faces crossed by the ray `origin + t * dir`, `t > 0`.
    pub fn count_ray_hits(&self, origin: &Vec3, dir: &Vec3) -> usize {
        if self.triangles.is_empty() {
            return 0;
        }
        let inv = dir.map(|x| 1.0 / x);
        let mut hits = 0;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.aabb.ray_entry(origin, &inv).is_none() {
                continue;
            }
            if node.is_leaf() {
                for &f in self.leaf_faces(node) {
                    let t = &self.triangles[f as usize];
                    if ray_triangle(origin, dir, &t[0], &t[1], &t[2]).is_some() {
                        hits += 1;
                    }
                }
            } else {
                stack.push(node.first as usize);
                stack.push(node.first as usize + 1);
            }
        }
        hits
    }
}

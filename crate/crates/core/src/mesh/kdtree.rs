use crate::geom::Vec3;

pub const DEFAULT_LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Static kd-tree over a point set for bounded nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    /// Caller-supplied id per point, reported by queries.
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn build(points: Vec<Vec3>, ids: Vec<u32>) -> Self {
        Self::with_leaf_size(points, ids, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(points: Vec<Vec3>, ids: Vec<u32>, leaf_size: usize) -> Self {
        assert_eq!(points.len(), ids.len());
        let leaf_size = leaf_size.max(1);
        let mut perm: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            build_node(&points, &mut perm, 0, leaf_size, &mut nodes);
        }
        let points_sorted = perm.iter().map(|&i| points[i as usize]).collect();
        let ids_sorted = perm.iter().map(|&i| ids[i as usize]).collect();
        Self {
            points: points_sorted,
            ids: ids_sorted,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest point strictly closer than `radius`, as `(id, distance)`.
    /// Ties resolve to the smaller id.
    pub fn nearest_within(&self, q: &Vec3, radius: f64) -> Option<(u32, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best_d = radius;
        let mut best: Option<u32> = None;
        self.search(0, q, &mut best_d, &mut best);
        best.map(|id| (id, best_d))
    }

    // Distances are compared after the square root so that the strict bound
    // agrees bit-for-bit with a plain `norm() < radius` scan.
    fn search(&self, node: usize, q: &Vec3, best_d: &mut f64, best: &mut Option<u32>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for k in start as usize..end as usize {
                    let d = (self.points[k] - q).norm();
                    let id = self.ids[k];
                    let better = match *best {
                        None => d < *best_d,
                        Some(b) => d < *best_d || (d == *best_d && id < b),
                    };
                    if better {
                        *best_d = d;
                        *best = Some(id);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near as usize, q, best_d, best);
                // `<=` keeps equal-distance candidates reachable for the id tie-break
                if diff.abs() <= *best_d {
                    self.search(far as usize, q, best_d, best);
                }
            }
        }
    }
}

fn build_node(points: &[Vec3], perm: &mut [u32], offset: usize, leaf_size: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if perm.len() <= leaf_size {
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + perm.len()) as u32,
        });
        return id;
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &i in perm.iter() {
        lo = lo.inf(&points[i as usize]);
        hi = hi.sup(&points[i as usize]);
    }
    let axis = (hi - lo).imax();
    let mid = perm.len() / 2;
    perm.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    let value = points[perm[mid] as usize][axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (l, r) = perm.split_at_mut(mid);
    let left = build_node(points, l, offset, leaf_size, nodes);
    let right = build_node(points, r, offset + mid, leaf_size, nodes);
    nodes[id as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    id
}

//! Small geometric kernel: boxes, closest points, ray casts and the
//! triangle/triangle overlap predicate used by the self-intersection check.

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

/// Axis-aligned bounding box in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y && min.z <= max.z);
        Self { min, max }
    }

    /// An inverted box that acts as the identity for [`Aabb::union`].
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut bb = Self::empty();
        for p in points {
            bb.include(p);
        }
        bb
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z
    }

    pub fn include(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn inflated(&self, pad: f64) -> Aabb {
        Aabb {
            min: self.min.add_scalar(-pad),
            max: self.max.add_scalar(pad),
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    pub fn overlaps(&self, other: &Aabb, tol: f64) -> bool {
        self.min.x <= other.max.x + tol
            && other.min.x <= self.max.x + tol
            && self.min.y <= other.max.y + tol
            && other.min.y <= self.max.y + tol
            && self.min.z <= other.max.z + tol
            && other.min.z <= self.max.z + tol
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn longest_axis(&self) -> usize {
        let e = self.extent();
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    /// Slab test; returns the entry parameter if the ray hits the box.
    pub fn ray_entry(&self, origin: &Vec3, inv_dir: &Vec3) -> Option<f64> {
        let mut tmin = 0.0f64;
        let mut tmax = f64::INFINITY;
        for i in 0..3 {
            let t1 = (self.min[i] - origin[i]) * inv_dir[i];
            let t2 = (self.max[i] - origin[i]) * inv_dir[i];
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            // NaN from 0 * inf means the ray runs inside the slab plane
            if !lo.is_nan() {
                tmin = tmin.max(lo);
            }
            if !hi.is_nan() {
                tmax = tmax.min(hi);
            }
        }
        (tmin <= tmax).then_some(tmin)
    }
}

pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Closest point on segment `[a, b]` to `p`.
pub fn closest_point_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Möller–Trumbore ray/triangle test. Returns the ray parameter of a hit
/// strictly in front of the origin.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&qvec) * inv;
    (t > 0.0).then_some(t)
}

/// Triangle/triangle overlap with interior semantics.
///
/// Contact without crossing (a vertex or edge resting on the other
/// triangle, or coplanar triangles sharing only boundary) is not an
/// intersection. Distances within `eps` of a plane count as on it.
pub fn triangles_intersect(t1: &[Vec3; 3], t2: &[Vec3; 3], eps: f64) -> bool {
    let Some(n2) = unit_normal(t2) else {
        return false;
    };
    let d1 = plane_distances(t1, &t2[0], &n2, eps);
    if !straddles(&d1) && !all_zero(&d1) {
        return false;
    }
    let Some(n1) = unit_normal(t1) else {
        return false;
    };
    let d2 = plane_distances(t2, &t1[0], &n1, eps);
    if all_zero(&d1) || all_zero(&d2) {
        return coplanar_overlap(t1, t2, &n1, eps);
    }
    if !straddles(&d2) {
        return false;
    }
    let dir = n1.cross(&n2);
    let len = dir.norm();
    if len < 1e-12 {
        return coplanar_overlap(t1, t2, &n1, eps);
    }
    let dir = dir / len;
    let (lo1, hi1) = plane_cut_interval(t1, &d1, &dir);
    let (lo2, hi2) = plane_cut_interval(t2, &d2, &dir);
    hi1.min(hi2) - lo1.max(lo2) > eps
}

fn unit_normal(t: &[Vec3; 3]) -> Option<Vec3> {
    let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
    let len = n.norm();
    (len > 0.0).then(|| n / len)
}

fn plane_distances(t: &[Vec3; 3], origin: &Vec3, n: &Vec3, eps: f64) -> [f64; 3] {
    let mut d = [0.0; 3];
    for (i, v) in t.iter().enumerate() {
        let s = (v - origin).dot(n);
        d[i] = if s.abs() <= eps { 0.0 } else { s };
    }
    d
}

fn straddles(d: &[f64; 3]) -> bool {
    d.iter().any(|&x| x > 0.0) && d.iter().any(|&x| x < 0.0)
}

fn all_zero(d: &[f64; 3]) -> bool {
    d.iter().all(|&x| x == 0.0)
}

/// Extent along `dir` of the segment where a triangle crosses the other plane.
fn plane_cut_interval(t: &[Vec3; 3], d: &[f64; 3], dir: &Vec3) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut push = |p: Vec3| {
        let s = p.dot(dir);
        lo = lo.min(s);
        hi = hi.max(s);
    };
    for i in 0..3 {
        let j = (i + 1) % 3;
        if d[i] == 0.0 {
            push(t[i]);
        }
        if (d[i] > 0.0 && d[j] < 0.0) || (d[i] < 0.0 && d[j] > 0.0) {
            let s = d[i] / (d[i] - d[j]);
            push(t[i] + (t[j] - t[i]) * s);
        }
    }
    (lo, hi)
}

fn coplanar_overlap(t1: &[Vec3; 3], t2: &[Vec3; 3], n: &Vec3, eps: f64) -> bool {
    // drop the dominant normal axis
    let (i, j) = match n.iamax() {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    };
    let p: [[f64; 2]; 3] = [[t1[0][i], t1[0][j]], [t1[1][i], t1[1][j]], [t1[2][i], t1[2][j]]];
    let q: [[f64; 2]; 3] = [[t2[0][i], t2[0][j]], [t2[1][i], t2[1][j]], [t2[2][i], t2[2][j]]];
    for a in 0..3 {
        for b in 0..3 {
            if segments_cross_2d(&p[a], &p[(a + 1) % 3], &q[b], &q[(b + 1) % 3], eps) {
                return true;
            }
        }
    }
    let centroid = |t: &[[f64; 2]; 3]| [(t[0][0] + t[1][0] + t[2][0]) / 3.0, (t[0][1] + t[1][1] + t[2][1]) / 3.0];
    p.iter()
        .chain(std::iter::once(&centroid(&p)))
        .any(|v| strictly_inside_2d(v, &q, eps))
        || q.iter()
            .chain(std::iter::once(&centroid(&q)))
            .any(|v| strictly_inside_2d(v, &p, eps))
}

fn line_distance_2d(p: &[f64; 2], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let ex = b[0] - a[0];
    let ey = b[1] - a[1];
    let len = (ex * ex + ey * ey).sqrt();
    if len == 0.0 {
        return 0.0;
    }
    (ex * (p[1] - a[1]) - ey * (p[0] - a[0])) / len
}

fn segments_cross_2d(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2], d: &[f64; 2], eps: f64) -> bool {
    let d1 = line_distance_2d(c, a, b);
    let d2 = line_distance_2d(d, a, b);
    let d3 = line_distance_2d(a, c, d);
    let d4 = line_distance_2d(b, c, d);
    ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
}

fn strictly_inside_2d(p: &[f64; 2], t: &[[f64; 2]; 3], eps: f64) -> bool {
    let s0 = line_distance_2d(p, &t[0], &t[1]);
    let s1 = line_distance_2d(p, &t[1], &t[2]);
    let s2 = line_distance_2d(p, &t[2], &t[0]);
    (s0 > eps && s1 > eps && s2 > eps) || (s0 < -eps && s1 < -eps && s2 < -eps)
}

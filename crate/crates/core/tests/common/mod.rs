//! Independent oracles and fixture runners shared by the integration tests.
//! Nothing here calls the library routine it is used to check.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vstent_core::fixtures::Fixture;
use vstent_core::io::ResolvedStent;
use vstent_core::pipeline::{prepare_axis, PreparedAxis};
use vstent_core::{
    build_ancestry, deploy, CenterlineTree, DeploymentParams, DeploymentReport, StentField, TriMesh, Vec3,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec3 {
    Vec3::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi))
}

fn orient(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a))
}

const ORIENT_EPS: f64 = 1e-12;

/// Whether segment pq passes through the interior of triangle t, decided
/// by signed volumes only. `None` when a predicate is too close to zero.
pub fn segment_crosses_triangle(p: &Vec3, q: &Vec3, t: &[Vec3; 3]) -> Option<bool> {
    let sp = orient(&t[0], &t[1], &t[2], p);
    let sq = orient(&t[0], &t[1], &t[2], q);
    if sp.abs() < ORIENT_EPS || sq.abs() < ORIENT_EPS {
        return None;
    }
    if (sp > 0.0) == (sq > 0.0) {
        return Some(false);
    }
    let s = [
        orient(p, q, &t[0], &t[1]),
        orient(p, q, &t[1], &t[2]),
        orient(p, q, &t[2], &t[0]),
    ];
    if s.iter().any(|x| x.abs() < ORIENT_EPS) {
        return None;
    }
    Some(s.iter().all(|&x| x > 0.0) || s.iter().all(|&x| x < 0.0))
}

/// Two triangles in general position overlap iff an edge of one crosses
/// the other.
pub fn triangles_cross(a: &[Vec3; 3], b: &[Vec3; 3]) -> Option<bool> {
    let mut hit = false;
    for (s, t) in [(a, b), (b, a)] {
        for e in 0..3 {
            hit |= segment_crosses_triangle(&s[e], &s[(e + 1) % 3], t)?;
        }
    }
    Some(hit)
}

/// All face pairs without a shared vertex whose triangles cross.
/// Panics on an undecidable pair, so callers must use generic meshes.
pub fn brute_self_intersections(mesh: &TriMesh) -> Vec<(u32, u32)> {
    let faces = mesh.faces();
    let mut out = Vec::new();
    for i in 0..faces.len() {
        for j in i + 1..faces.len() {
            if faces[i].iter().any(|v| faces[j].contains(v)) {
                continue;
            }
            let hit = triangles_cross(&mesh.triangle(i), &mesh.triangle(j)).expect("degenerate pair in oracle mesh");
            if hit {
                out.push((i as u32, j as u32));
            }
        }
    }
    out
}

fn segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Point to triangle distance: plane distance when the projection falls
/// inside (barycentric signs), otherwise the nearest edge.
pub fn point_triangle_distance(p: &Vec3, t: &[Vec3; 3]) -> f64 {
    let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
    let nn = n.norm_squared();
    let proj = p - n * ((p - t[0]).dot(&n) / nn);
    let inside = (0..3).all(|e| (t[(e + 1) % 3] - t[e]).cross(&(proj - t[e])).dot(&n) >= 0.0);
    if inside {
        return (p - proj).norm();
    }
    (0..3)
        .map(|e| segment_distance(p, &t[e], &t[(e + 1) % 3]))
        .fold(f64::INFINITY, f64::min)
}

pub fn brute_mesh_distance(mesh: &TriMesh, p: &Vec3) -> f64 {
    (0..mesh.face_count())
        .map(|f| point_triangle_distance(p, &mesh.triangle(f)))
        .fold(f64::INFINITY, f64::min)
}

pub fn brute_near_field(positions: &[Vec3], field: &StentField, r: f64, d_con: f64) -> Vec<u32> {
    (0..positions.len() as u32)
        .filter(|&i| field.eval(&positions[i as usize], r) < d_con)
        .collect()
}

pub fn brute_within(positions: &[Vec3], seeds: &[u32], d: f64) -> Vec<u32> {
    (0..positions.len() as u32)
        .filter(|&i| {
            let p = positions[i as usize];
            seeds.iter().any(|&s| (positions[s as usize] - p).norm() < d)
        })
        .collect()
}

pub fn central_difference(f: impl Fn(&Vec3) -> f64, p: &Vec3, h: f64) -> Vec3 {
    let mut g = Vec3::zeros();
    for axis in 0..3 {
        let mut e = Vec3::zeros();
        e[axis] = h;
        g[axis] = (f(&(p + e)) - f(&(p - e))) / (2.0 * h);
    }
    g
}

/// Mean and population standard deviation, two-pass.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub struct Run {
    pub tree: CenterlineTree,
    pub params: DeploymentParams,
    pub prepared: PreparedAxis,
    pub mesh: TriMesh,
    pub report: DeploymentReport,
}

pub fn stent_for(f: &Fixture, params: DeploymentParams) -> ResolvedStent {
    ResolvedStent {
        selection: f.selection,
        diameter: f.diameter,
        nominal_length: None,
        foreshortening: 0.0,
        params,
    }
}

/// Deploy the fixture's reference stent with default parameters.
pub fn run_fixture(f: &Fixture, radius_correction: bool) -> Run {
    let tree = build_ancestry(f.centerline.clone()).unwrap();
    let mut params = DeploymentParams::from_diameter(f.diameter);
    params.radius_correction = radius_correction;
    let prepared = prepare_axis(&tree, &stent_for(f, params)).unwrap();
    let (mesh, report) = deploy(&f.mesh, &prepared.axis, &params, None).unwrap();
    Run {
        tree,
        params,
        prepared,
        mesh,
        report,
    }
}

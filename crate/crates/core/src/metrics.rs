//! Lumen size profiles along a polyline and their summary statistics.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::centerline::{resample_polyline, CenterlineError};
use crate::geom::Vec3;
use crate::mesh::{Bvh, TriMesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error(transparent)]
    Centerline(#[from] CenterlineError),
    #[error("no usable samples in arc-length range [{0}, {1}]")]
    EmptyRegion(f64, f64),
    #[error("mesh has no faces")]
    EmptyMesh,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SampleFlags {
    /// Ray parity places the query point outside the surface.
    pub outside: bool,
    /// No closed cross-section loop contains the point; the nearest was used.
    pub approximate: bool,
    /// The slice plane produced no closed loop.
    pub no_section: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileSample {
    pub arc_length: f64,
    pub point: [f64; 3],
    pub mis_radius: f64,
    pub equivalent_radius: Option<f64>,
    pub cross_section_area: Option<f64>,
    pub flags: SampleFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiameterSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub sd: f64,
    pub sample_count: usize,
}

// Fixed, mutually skewed directions for the parity vote.
const RAY_DIRS: [[f64; 3]; 3] = [
    [0.5773502691896258, 0.5773502691896257, 0.577_350_269_189_626],
    [-0.2672612419124244, 0.8017837257372732, -0.5345224838248488],
    [0.8164965809277261, -0.4082482904638631, -0.408_248_290_463_863],
];

/// Majority vote over three ray-parity tests.
pub fn is_inside(bvh: &Bvh, p: &Vec3) -> bool {
    let votes = RAY_DIRS
        .iter()
        .filter(|d| bvh.count_ray_hits(p, &Vec3::new(d[0], d[1], d[2])) % 2 == 1)
        .count();
    votes >= 2
}

/// Resampled points with their tangents (central differences, one-sided
/// at the ends) and arc lengths.
fn stations(polyline: &[Vec3], spacing: f64) -> Result<Vec<(f64, Vec3, Vec3)>, MetricsError> {
    let (pts, step) = resample_polyline(polyline, spacing)?;
    let n = pts.len();
    Ok((0..n)
        .map(|i| {
            let a = pts[i.saturating_sub(1)];
            let b = pts[(i + 1).min(n - 1)];
            (i as f64 * step, pts[i], (b - a).normalize())
        })
        .collect())
}

fn sample(arc: f64, p: Vec3) -> ProfileSample {
    ProfileSample {
        arc_length: arc,
        point: [p.x, p.y, p.z],
        mis_radius: 0.0,
        equivalent_radius: None,
        cross_section_area: None,
        flags: SampleFlags::default(),
    }
}

fn fill_mis(bvh: &Bvh, s: &mut ProfileSample) {
    let p = Vec3::from(s.point);
    s.mis_radius = bvh.closest(&p).map_or(0.0, |(_, d)| d);
    s.flags.outside = !is_inside(bvh, &p);
}

/// Largest inscribed sphere radius at points spaced along `polyline`:
/// the distance to the nearest triangle.
pub fn mis_radius_profile(mesh: &TriMesh, polyline: &[Vec3], spacing: f64) -> Result<Vec<ProfileSample>, MetricsError> {
    if mesh.face_count() == 0 {
        return Err(MetricsError::EmptyMesh);
    }
    let bvh = Bvh::build(mesh);
    Ok(stations(polyline, spacing)?
        .into_iter()
        .map(|(arc, p, _)| {
            let mut s = sample(arc, p);
            fill_mis(&bvh, &mut s);
            s
        })
        .collect())
}

/// Closed loops of the mesh cut by the plane through `origin` with normal
/// `normal`, each as 3-D points in order.
pub fn slice_loops(mesh: &TriMesh, origin: &Vec3, normal: &Vec3) -> Vec<Vec<Vec3>> {
    let pos = mesh.positions();
    let side: Vec<f64> = pos.iter().map(|p| (p - origin).dot(normal)).collect();
    // zero counts as positive so each vertex has a definite side
    let below = |i: u32| side[i as usize] < 0.0;
    let key = |a: u32, b: u32| (a.min(b), a.max(b));
    let mut points: HashMap<(u32, u32), Vec3> = HashMap::new();
    let mut links: HashMap<(u32, u32), Vec<(u32, u32)>> = HashMap::new();
    let mut order: Vec<(u32, u32)> = Vec::new();
    for f in mesh.faces() {
        let cut: Vec<(u32, u32)> = (0..3)
            .map(|k| (f[k], f[(k + 1) % 3]))
            .filter(|&(a, b)| below(a) != below(b))
            .map(|(a, b)| key(a, b))
            .collect();
        if cut.len() != 2 {
            continue;
        }
        for &e in &cut {
            points.entry(e).or_insert_with(|| {
                let (da, db) = (side[e.0 as usize], side[e.1 as usize]);
                let t = da / (da - db);
                pos[e.0 as usize] + (pos[e.1 as usize] - pos[e.0 as usize]) * t
            });
        }
        links.entry(cut[0]).or_default().push(cut[1]);
        links.entry(cut[1]).or_default().push(cut[0]);
        order.push(cut[0]);
    }
    let mut used: HashMap<(u32, u32), bool> = HashMap::new();
    let mut loops = Vec::new();
    for &start in &order {
        if used.contains_key(&start) {
            continue;
        }
        let mut chain = vec![start];
        used.insert(start, true);
        let mut prev = start;
        let mut cur = match links.get(&start).and_then(|l| l.first()) {
            Some(&c) => c,
            None => continue,
        };
        let mut closed = false;
        loop {
            if cur == start {
                closed = true;
                break;
            }
            if used.contains_key(&cur) {
                break;
            }
            used.insert(cur, true);
            chain.push(cur);
            let next = links[&cur].iter().copied().find(|&n| n != prev);
            match next {
                Some(n) if links[&cur].len() == 2 => {
                    prev = cur;
                    cur = n;
                }
                _ => break,
            }
        }
        if closed && chain.len() >= 3 {
            loops.push(chain.iter().map(|e| points[e]).collect());
        }
    }
    loops
}

fn plane_basis(n: &Vec3) -> (Vec3, Vec3) {
    let seed = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = (seed - n * seed.dot(n)).normalize();
    (u, n.cross(&u))
}

fn shoelace(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    0.5 * acc.abs()
}

fn contains_origin(poly: &[(f64, f64)]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[(i + n - 1) % n];
        if (yi > 0.0) != (yj > 0.0) {
            let x = xi + (0.0 - yi) * (xj - xi) / (yj - yi);
            if x > 0.0 {
                inside = !inside;
            }
        }
    }
    inside
}

/// Area of the cross-section loop around `origin` in the plane with normal
/// `normal`. Returns `(area, approximate)`, or `None` without closed loops.
pub fn cross_section_area(mesh: &TriMesh, origin: &Vec3, normal: &Vec3) -> Option<(f64, bool)> {
    let loops = slice_loops(mesh, origin, normal);
    if loops.is_empty() {
        return None;
    }
    let (u, v) = plane_basis(normal);
    let flat: Vec<Vec<(f64, f64)>> = loops
        .iter()
        .map(|l| {
            l.iter()
                .map(|p| {
                    let d = p - origin;
                    (d.dot(&u), d.dot(&v))
                })
                .collect()
        })
        .collect();
    let enclosing = flat
        .iter()
        .filter(|l| contains_origin(l))
        .map(|l| shoelace(l))
        .min_by(f64::total_cmp);
    if let Some(a) = enclosing {
        return Some((a, false));
    }
    let nearest = flat
        .iter()
        .min_by(|a, b| centroid_dist(a).total_cmp(&centroid_dist(b)))
        .unwrap();
    Some((shoelace(nearest), true))
}

fn centroid_dist(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len() as f64;
    let (sx, sy) = poly.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    (sx / n).hypot(sy / n)
}

/// Equivalent radius `sqrt(A / pi)` of the cross-section orthogonal to
/// the local tangent at points spaced along `polyline`.
pub fn equivalent_radius_profile(
    mesh: &TriMesh,
    polyline: &[Vec3],
    spacing: f64,
) -> Result<Vec<ProfileSample>, MetricsError> {
    Ok(stations(polyline, spacing)?
        .into_iter()
        .map(|(arc, p, t)| {
            let mut s = sample(arc, p);
            fill_section(mesh, &p, &t, &mut s);
            s
        })
        .collect())
}

fn fill_section(mesh: &TriMesh, p: &Vec3, t: &Vec3, s: &mut ProfileSample) {
    match cross_section_area(mesh, p, t) {
        Some((area, approx)) => {
            s.cross_section_area = Some(area);
            s.equivalent_radius = Some((area / std::f64::consts::PI).sqrt());
            s.flags.approximate = approx;
        }
        None => s.flags.no_section = true,
    }
}

/// Both profiles in one pass.
pub fn full_profile(mesh: &TriMesh, polyline: &[Vec3], spacing: f64) -> Result<Vec<ProfileSample>, MetricsError> {
    if mesh.face_count() == 0 {
        return Err(MetricsError::EmptyMesh);
    }
    let bvh = Bvh::build(mesh);
    Ok(stations(polyline, spacing)?
        .into_iter()
        .map(|(arc, p, t)| {
            let mut s = sample(arc, p);
            fill_mis(&bvh, &mut s);
            fill_section(mesh, &p, &t, &mut s);
            s
        })
        .collect())
}

/// Diameter statistics over samples with arc length in `[from, to]`,
/// skipping samples outside the surface. Standard deviation is the
/// population one.
pub fn summarize(profile: &[ProfileSample], from: f64, to: f64) -> Result<DiameterSummary, MetricsError> {
    let (lo, hi) = (from.min(to), from.max(to));
    let d: Vec<f64> = profile
        .iter()
        .filter(|s| s.arc_length >= lo - 1e-9 && s.arc_length <= hi + 1e-9 && !s.flags.outside)
        .map(|s| 2.0 * s.mis_radius)
        .collect();
    if d.is_empty() {
        return Err(MetricsError::EmptyRegion(lo, hi));
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(DiameterSummary {
        min: d.iter().copied().fold(f64::INFINITY, f64::min),
        max: d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean,
        sd: var.sqrt(),
        sample_count: d.len(),
    })
}

/// Comma-separated profile with a header row. Missing values are empty.
pub fn profile_to_csv(profile: &[ProfileSample]) -> String {
    let mut out = String::from("arc_length,mis_radius,equivalent_radius,area,flags\n");
    for s in profile {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut flags = Vec::new();
        if s.flags.outside {
            flags.push("outside");
        }
        if s.flags.approximate {
            flags.push("approximate");
        }
        if s.flags.no_section {
            flags.push("no_section");
        }
        let _ = writeln!(
            out,
            "{:.6},{:.6},{},{},{}",
            s.arc_length,
            s.mis_radius,
            opt(s.equivalent_radius),
            opt(s.cross_section_area),
            flags.join("|")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::f64::consts::PI;

    fn axis(len: f64) -> Vec<Vec3> {
        vec![Vec3::new(0., 0., 0.), Vec3::new(0., 0., len)]
    }

    #[test]
    fn cylinder_profiles() {
        let m = fixtures::cylinder(3.0, 20.0, 360, 0.5);
        let line = vec![Vec3::new(0., 0., 5.), Vec3::new(0., 0., 15.)];
        let prof = full_profile(&m, &line, 1.0).unwrap();
        assert_eq!(prof.len(), 11);
        for s in &prof {
            assert!((s.mis_radius - 3.0).abs() < 0.01, "{}", s.mis_radius);
            assert!((s.equivalent_radius.unwrap() - 3.0).abs() < 0.01);
            assert!(!s.flags.outside && !s.flags.approximate);
            assert!(s.equivalent_radius.unwrap() >= s.mis_radius - 1e-6);
        }
    }

    #[test]
    fn sphere_centre() {
        let m = fixtures::icosphere(4, 5.0);
        let prof = mis_radius_profile(&m, &[Vec3::new(0., 0., -1e-3), Vec3::new(0., 0., 1e-3)], 1.0).unwrap();
        // faceting of a 4-times subdivided icosphere keeps faces within 0.5% of the sphere
        assert!((prof[0].mis_radius - 5.0).abs() < 0.03);
        assert!(!prof[0].flags.outside);
    }

    #[test]
    fn outside_point_flagged() {
        let m = fixtures::cylinder(1.0, 5.0, 32, 0.5);
        let prof = mis_radius_profile(&m, &[Vec3::new(3., 0., 1.), Vec3::new(3., 0., 2.)], 1.0).unwrap();
        assert!(prof.iter().all(|s| s.flags.outside));
        assert!(summarize(&prof, 0.0, 1.0).is_err());
    }

    #[test]
    fn oblique_slice_is_an_ellipse() {
        let m = fixtures::cylinder(3.0, 40.0, 720, 0.5);
        let n = Vec3::new(0.0, (30f64).to_radians().sin(), (30f64).to_radians().cos());
        // plane at 60 degrees to the axis: semi-axes 3 and 3 / sin 60
        let (area, approx) = cross_section_area(&m, &Vec3::new(0., 0., 20.), &n).unwrap();
        let exact = PI * 3.0 * 3.0 / (60f64).to_radians().sin();
        assert!(!approx);
        assert!((area - exact).abs() / exact < 1e-3, "{area} vs {exact}");
    }

    #[test]
    fn picks_loop_around_query() {
        // two parallel tubes in one slice plane
        let a = fixtures::cylinder(1.0, 10.0, 64, 0.5);
        let b = fixtures::cylinder(2.0, 10.0, 64, 0.5);
        let shift = Vec3::new(10.0, 0., 0.);
        let mut pos = a.positions().to_vec();
        let off = pos.len() as u32;
        pos.extend(b.positions().iter().map(|p| p + shift));
        let mut faces = a.faces().to_vec();
        faces.extend(b.faces().iter().map(|f| f.map(|i| i + off)));
        let m = TriMesh::new(pos, faces).unwrap();
        let z = Vec3::z();
        let (small, _) = cross_section_area(&m, &Vec3::new(0., 0., 5.), &z).unwrap();
        let (big, _) = cross_section_area(&m, &Vec3::new(10., 0., 5.), &z).unwrap();
        assert!(small < 3.2 && big > 12.0);
        // between the lumens: nearest loop by centroid, flagged
        let (near, approx) = cross_section_area(&m, &Vec3::new(3., 0., 5.), &z).unwrap();
        assert!(approx);
        assert!((near - small).abs() < 1e-9);
    }

    #[test]
    fn summary_statistics() {
        let mk = |arc: f64, r: f64| ProfileSample {
            mis_radius: r,
            ..sample(arc, Vec3::zeros())
        };
        let prof: Vec<_> = [2.9, 3.0, 2.8, 2.95, 3.0]
            .iter()
            .enumerate()
            .map(|(i, &r)| mk(i as f64, r))
            .collect();
        let s = summarize(&prof, 0.0, 4.0).unwrap();
        // diameters 5.8 6.0 5.6 5.9 6.0
        assert!((s.mean - 5.86).abs() < 1e-12);
        assert!((s.min - 5.6).abs() < 1e-12 && (s.max - 6.0).abs() < 1e-12);
        let var = [5.8f64, 6.0, 5.6, 5.9, 6.0]
            .iter()
            .map(|d| (d - 5.86).powi(2))
            .sum::<f64>()
            / 5.0;
        assert!((s.sd - var.sqrt()).abs() < 1e-12);
        let c = summarize(&[mk(0.0, 3.0), mk(1.0, 3.0)], 0.0, 1.0).unwrap();
        assert_eq!((c.min, c.max, c.mean, c.sd), (6.0, 6.0, 6.0, 0.0));
        assert!(summarize(&prof, 10.0, 20.0).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let m = fixtures::cylinder(3.0, 10.0, 64, 0.5);
        let csv = profile_to_csv(&full_profile(&m, &axis(10.0), 5.0).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "arc_length,mis_radius,equivalent_radius,area,flags");
        assert_eq!(lines.len(), 4);
    }
}

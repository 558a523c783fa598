//! Synthetic meshes and centerlines used by tests, benchmarks and the
//! `fixture` CLI command.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::centerline::{ArcPosition, AxisSelection, CenterlinePath};
use crate::geom::Vec3;
use crate::mesh::TriMesh;
use crate::sdf::{capsule_sdf, smin, CapsuleSegment};

/// A vessel model with its centerline and a reference stent placement.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub mesh: TriMesh,
    pub centerline: Vec<CenterlinePath>,
    pub selection: AxisSelection,
    pub diameter: f64,
}

fn v(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

/// Regular tetrahedron centred at the origin with circumradius `size * sqrt(3)`.
pub fn tetrahedron(size: f64) -> TriMesh {
    let p = vec![
        v(size, size, size),
        v(size, -size, -size),
        v(-size, size, -size),
        v(-size, -size, size),
    ];
    let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    TriMesh::new(p, faces).expect("tetrahedron is valid")
}

/// Subdivided icosahedron projected onto a sphere.
pub fn icosphere(subdivisions: u32, radius: f64) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut pts: Vec<Vec3> = [
        (-1., t, 0.),
        (1., t, 0.),
        (-1., -t, 0.),
        (1., -t, 0.),
        (0., -1., t),
        (0., 1., t),
        (0., -1., -t),
        (0., 1., -t),
        (t, 0., -1.),
        (t, 0., 1.),
        (-t, 0., -1.),
        (-t, 0., 1.),
    ]
    .iter()
    .map(|&(x, y, z)| v(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, pts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                pts.push(((pts[a as usize] + pts[b as usize]) * 0.5).normalize());
                (pts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut pts);
            let bc = midpoint(b, c, &mut pts);
            let ca = midpoint(c, a, &mut pts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let pts = pts.into_iter().map(|p| p * radius).collect();
    TriMesh::new(pts, faces).expect("icosphere is valid")
}

/// Closed tube swept along `centers`. `radius(i, theta)` gives the wall
/// distance on ring `i` at angle `theta`. Ends are closed with flat fans.
pub fn swept_tube(centers: &[Vec3], n_around: usize, radius: impl Fn(usize, f64) -> f64) -> TriMesh {
    let n = centers.len();
    assert!(n >= 2 && n_around >= 3);
    let tangents: Vec<Vec3> = (0..n)
        .map(|i| {
            let a = centers[i.saturating_sub(1)];
            let b = centers[(i + 1).min(n - 1)];
            (b - a).normalize()
        })
        .collect();
    // parallel-transported frame
    let t0 = tangents[0];
    let seed = if t0.x.abs() < 0.9 { v(1., 0., 0.) } else { v(0., 1., 0.) };
    let mut normal = (seed - t0 * seed.dot(&t0)).normalize();
    let mut pts = Vec::with_capacity(n * n_around + 2);
    for i in 0..n {
        let t = tangents[i];
        normal = (normal - t * normal.dot(&t)).normalize();
        let binormal = t.cross(&normal);
        for j in 0..n_around {
            let theta = 2.0 * PI * j as f64 / n_around as f64;
            let r = radius(i, theta);
            pts.push(centers[i] + (normal * theta.cos() + binormal * theta.sin()) * r);
        }
    }
    let start = pts.len() as u32;
    pts.push(centers[0]);
    let end = pts.len() as u32;
    pts.push(centers[n - 1]);
    let m = n_around as u32;
    let id = |i: usize, j: u32| i as u32 * m + (j % m);
    let mut faces = Vec::with_capacity(2 * n * n_around);
    for i in 0..n - 1 {
        for j in 0..m {
            faces.push([id(i, j), id(i, j + 1), id(i + 1, j)]);
            faces.push([id(i, j + 1), id(i + 1, j + 1), id(i + 1, j)]);
        }
    }
    for j in 0..m {
        faces.push([start, id(0, j + 1), id(0, j)]);
        faces.push([end, id(n - 1, j), id(n - 1, j + 1)]);
    }
    TriMesh::new(pts, faces).expect("swept tube is valid")
}

/// Smooth cosine dip of depth 1 and half-width `half` centred at `c`.
fn bump(s: f64, c: f64, half: f64) -> f64 {
    let x = (s - c) / half;
    if x.abs() >= 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (PI * x).cos())
    }
}

fn line_points(from: Vec3, to: Vec3, spacing: f64) -> Vec<Vec3> {
    let n = (((to - from).norm() / spacing).round() as usize).max(1);
    (0..=n).map(|i| from + (to - from) * (i as f64 / n as f64)).collect()
}

fn path(id: u32, points: Vec<Vec3>, radius: impl Fn(usize) -> f64) -> CenterlinePath {
    let r = (0..points.len()).map(radius).collect();
    CenterlinePath::new(id, points, r).expect("fixture centerline is valid")
}

/// Capped cylinder along +z from the origin.
pub fn cylinder(radius: f64, length: f64, n_around: usize, spacing: f64) -> TriMesh {
    let centers = line_points(Vec3::zeros(), v(0., 0., length), spacing);
    swept_tube(&centers, n_around, |_, _| radius)
}

/// Cylinder of radius 3 mm and length 20 mm at 1 degree tessellation, with
/// its axis as centerline.
pub fn analytic_cylinder() -> Fixture {
    let line = line_points(Vec3::zeros(), v(0., 0., 20.), 0.5);
    Fixture {
        name: "cylinder",
        mesh: cylinder(3.0, 20.0, 360, 0.5),
        centerline: vec![path(1, line, |_| 3.0)],
        selection: AxisSelection {
            start: ArcPosition::new(1, 15.0),
            end: ArcPosition::new(1, 5.0),
        },
        diameter: 6.5,
    }
}

/// Flat disk of radius 1 in the xy plane; open, so it has boundary edges.
pub fn open_disk(n_around: usize) -> TriMesh {
    let mut pts = vec![Vec3::zeros()];
    for j in 0..n_around {
        let th = 2.0 * PI * j as f64 / n_around as f64;
        pts.push(v(th.cos(), th.sin(), 0.));
    }
    let m = n_around as u32;
    let faces = (0..m).map(|j| [0, 1 + j, 1 + (j + 1) % m]).collect();
    TriMesh::new(pts, faces).expect("disk is valid")
}

pub const TUBE_LENGTH: f64 = 60.0;
pub const TUBE_RADIUS: f64 = 2.58;
pub const TUBE_MIN_RADIUS: f64 = 2.0;

/// Straight tube along +z, 60 mm long, radius 2.58 mm narrowing smoothly
/// to 2.0 mm (4.0 mm diameter, about 40% area reduction) at z = 30.
pub fn stenotic_tube_with(n_around: usize, n_rings: usize) -> Fixture {
    let centers: Vec<Vec3> = (0..n_rings)
        .map(|i| v(0., 0., TUBE_LENGTH * i as f64 / (n_rings - 1) as f64))
        .collect();
    let radius = |s: f64| TUBE_RADIUS - (TUBE_RADIUS - TUBE_MIN_RADIUS) * bump(s, 30.0, 10.0);
    let mesh = swept_tube(&centers, n_around, |i, _| radius(centers[i].z));
    let line = line_points(Vec3::zeros(), v(0., 0., TUBE_LENGTH), 0.5);
    let cl = path(1, line.clone(), |i| radius(line[i].z));
    Fixture {
        name: "stenotic_tube",
        mesh,
        centerline: vec![cl],
        selection: AxisSelection {
            start: ArcPosition::new(1, 40.0),
            end: ArcPosition::new(1, 20.0),
        },
        diameter: 6.0,
    }
}

pub fn stenotic_tube() -> Fixture {
    stenotic_tube_with(96, 241)
}

/// About 100k triangles: the stenotic tube at 200 x 250 resolution.
pub fn large_stenotic_tube() -> Fixture {
    let mut f = stenotic_tube_with(200, 250);
    f.name = "large_stenotic_tube";
    f
}

/// Points along a curve given as a function of arc length.
fn sample_curve(length: f64, spacing: f64, curve: impl Fn(f64) -> Vec3) -> Vec<Vec3> {
    let n = ((length / spacing).round() as usize).max(1);
    (0..=n).map(|i| curve(length * i as f64 / n as f64)).collect()
}

/// Planar circular arc of bend radius 25 mm over 100 degrees with a mild
/// stenosis at its midpoint.
pub fn curved_arc() -> Fixture {
    let bend = 25.0;
    let length = bend * 100f64.to_radians();
    let curve = |s: f64| {
        let a = s / bend;
        v(bend * (1.0 - a.cos()), 0., bend * a.sin())
    };
    let radius = |s: f64| 2.2 - 0.6 * bump(s, length / 2.0, 8.0);
    let rings = sample_curve(length, 0.25, curve);
    let ds = length / (rings.len() - 1) as f64;
    let mesh = swept_tube(&rings, 96, |i, _| radius(i as f64 * ds));
    let line = sample_curve(length, 0.5, curve);
    let dl = length / (line.len() - 1) as f64;
    let mid = length / 2.0;
    Fixture {
        name: "curved_arc",
        mesh,
        centerline: vec![path(1, line, |i| radius(i as f64 * dl))],
        selection: AxisSelection {
            start: ArcPosition::new(1, mid + 10.0),
            end: ArcPosition::new(1, mid - 10.0),
        },
        diameter: 4.8,
    }
}

/// Two opposite 60 degree arcs of bend radius 20 mm joined at an inflection.
pub fn s_curve() -> Fixture {
    let bend = 20.0;
    let half = bend * 60f64.to_radians();
    let lead = 8.0;
    let length = 2.0 * lead + 2.0 * half;
    let a1 = half / bend;
    let p1 = v(bend * (1.0 - a1.cos()), 0., lead + bend * a1.sin());
    // the second arc bends back, its centre on the far side of p1
    let centre2 = p1 - v(a1.cos(), 0., -a1.sin()) * bend;
    let curve = move |s: f64| {
        if s <= lead {
            v(0., 0., s)
        } else if s <= lead + half {
            let a = (s - lead) / bend;
            v(bend * (1.0 - a.cos()), 0., lead + bend * a.sin())
        } else if s <= lead + 2.0 * half {
            let h = a1 - (s - lead - half) / bend;
            centre2 + v(h.cos(), 0., -h.sin()) * bend
        } else {
            let end = lead + 2.0 * half;
            v(2.0 * bend * (1.0 - a1.cos()), 0., lead + 2.0 * bend * a1.sin()) + v(0., 0., s - end)
        }
    };
    let radius = |s: f64| 2.0 - 0.4 * bump(s, lead + half, 6.0);
    let rings = sample_curve(length, 0.25, curve);
    let ds = length / (rings.len() - 1) as f64;
    let mesh = swept_tube(&rings, 96, |i, _| radius(i as f64 * ds));
    let line = sample_curve(length, 0.5, curve);
    let dl = length / (line.len() - 1) as f64;
    let mid = lead + half;
    Fixture {
        name: "s_curve",
        mesh,
        centerline: vec![path(1, line, |i| radius(i as f64 * dl))],
        selection: AxisSelection {
            start: ArcPosition::new(1, mid + 9.0),
            end: ArcPosition::new(1, mid - 9.0),
        },
        diameter: 4.4,
    }
}

/// Straight tube whose stenosis indents one side of the wall only.
pub fn eccentric_stenosis() -> Fixture {
    let length = 50.0;
    let rings = line_points(Vec3::zeros(), v(0., 0., length), 0.25);
    let wall = |z: f64, theta: f64| 2.5 - 0.9 * bump(z, 25.0, 9.0) * 0.5 * (1.0 + theta.cos());
    let mesh = swept_tube(&rings, 96, |i, th| wall(rings[i].z, th));
    let line = line_points(Vec3::zeros(), v(0., 0., length), 0.5);
    Fixture {
        name: "eccentric_stenosis",
        mesh,
        centerline: vec![path(1, line.clone(), |i| wall(line[i].z, 0.0))],
        selection: AxisSelection {
            start: ArcPosition::new(1, 34.0),
            end: ArcPosition::new(1, 16.0),
        },
        diameter: 5.0,
    }
}

/// Long gradual waist: radius 3.8 mm narrowing to 2.6 mm over 30 mm.
pub fn hourglass() -> Fixture {
    let length = 70.0;
    let rings = line_points(Vec3::zeros(), v(0., 0., length), 0.25);
    let radius = |z: f64| 3.8 - 1.2 * bump(z, 35.0, 15.0);
    let mesh = swept_tube(&rings, 120, |i, _| radius(rings[i].z));
    let line = line_points(Vec3::zeros(), v(0., 0., length), 0.5);
    Fixture {
        name: "hourglass",
        mesh,
        centerline: vec![path(1, line.clone(), |i| radius(line[i].z))],
        selection: AxisSelection {
            start: ArcPosition::new(1, 50.0),
            end: ArcPosition::new(1, 20.0),
        },
        diameter: 7.3,
    }
}

/// Parent vessel along +z (radius 2.5 mm, 30 mm) splitting into two
/// children (radius 2.0 mm, 25 mm) at +-25 degrees. The surface is the
/// smooth union of three capsules, polygonised with marching tetrahedra.
/// The reference selection crosses the junction from child 2 into the parent.
pub fn y_bifurcation() -> Fixture {
    let junction = v(0., 0., 30.);
    let ang = 25f64.to_radians();
    let tip2 = junction + v(ang.sin(), 0., ang.cos()) * 25.0;
    let tip3 = junction + v(-ang.sin(), 0., ang.cos()) * 25.0;
    let caps = [
        (CapsuleSegment::new(Vec3::zeros(), junction).unwrap(), 2.5),
        (CapsuleSegment::new(junction, tip2).unwrap(), 2.0),
        (CapsuleSegment::new(junction, tip3).unwrap(), 2.0),
    ];
    let field = |p: &Vec3| {
        let mut acc = capsule_sdf(p, &caps[0].0, caps[0].1);
        for (c, r) in &caps[1..] {
            acc = smin(acc, capsule_sdf(p, c, *r), 1.0);
        }
        acc
    };
    let lo = v(-14.0, -3.5, -3.5);
    let hi = v(14.0, 3.5, 56.0);
    let mesh = marching_tetrahedra(&field, lo, hi, 0.4);
    let c1 = line_points(Vec3::zeros(), junction, 0.5);
    let c2 = line_points(junction, tip2, 0.5);
    let c3 = line_points(junction, tip3, 0.5);
    Fixture {
        name: "y_bifurcation",
        mesh,
        centerline: vec![path(1, c1, |_| 2.5), path(2, c2, |_| 2.0), path(3, c3, |_| 2.0)],
        selection: AxisSelection {
            start: ArcPosition::new(2, 12.0),
            end: ArcPosition::new(1, 20.0),
        },
        diameter: 4.6,
    }
}

/// Polygonise the zero level set of `f` (negative inside) over a grid of
/// cubes of size `h`, each split into six tetrahedra around its main
/// diagonal. Grid values are pushed at least `h / 20` away from zero so no
/// output vertex lands on a grid node.
pub fn marching_tetrahedra(f: &dyn Fn(&Vec3) -> f64, lo: Vec3, hi: Vec3, h: f64) -> TriMesh {
    let dims = ((hi - lo) / h).map(|x| x.ceil() as usize + 1);
    let (nx, ny, nz) = (dims.x, dims.y, dims.z);
    let node = |i: usize, j: usize, k: usize| (i * ny + j) * nz + k;
    let pos = |n: usize| {
        let k = n % nz;
        let j = (n / nz) % ny;
        let i = n / (nz * ny);
        lo + v(i as f64, j as f64, k as f64) * h
    };
    let floor = h / 20.0;
    let mut val = vec![0.0; nx * ny * nz];
    for (n, slot) in val.iter_mut().enumerate() {
        let x = f(&pos(n));
        *slot = if x >= 0.0 { x.max(floor) } else { x.min(-floor) };
    }
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut pts: Vec<Vec3> = Vec::new();
    let mut cache: HashMap<(usize, usize), u32> = HashMap::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut edge_point = |a: usize, b: usize, pts: &mut Vec<Vec3>| -> u32 {
        let key = (a.min(b), a.max(b));
        *cache.entry(key).or_insert_with(|| {
            let (fa, fb) = (val[key.0], val[key.1]);
            let t = fa / (fa - fb);
            pts.push(pos(key.0) + (pos(key.1) - pos(key.0)) * t);
            (pts.len() - 1) as u32
        })
    };
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            for k in 0..nz - 1 {
                let corner = [i, j, k];
                for perm in PERMS {
                    let mut c = corner;
                    let mut tet = [node(c[0], c[1], c[2]); 4];
                    for (s, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = node(c[0], c[1], c[2]);
                    }
                    let inside: Vec<usize> = tet.iter().copied().filter(|&n| val[n] < 0.0).collect();
                    let outside: Vec<usize> = tet.iter().copied().filter(|&n| val[n] >= 0.0).collect();
                    if inside.is_empty() || outside.is_empty() {
                        continue;
                    }
                    let cin = inside.iter().map(|&n| pos(n)).sum::<Vec3>() / inside.len() as f64;
                    let cout = outside.iter().map(|&n| pos(n)).sum::<Vec3>() / outside.len() as f64;
                    let out_dir = cout - cin;
                    let mut emit = |tri: [u32; 3], pts: &Vec<Vec3>| {
                        let [a, b, c] = tri.map(|x| pts[x as usize]);
                        if (b - a).cross(&(c - a)).dot(&out_dir) < 0.0 {
                            faces.push([tri[0], tri[2], tri[1]]);
                        } else {
                            faces.push(tri);
                        }
                    };
                    match inside.len() {
                        1 | 3 => {
                            let (single, others) = if inside.len() == 1 {
                                (inside[0], outside.clone())
                            } else {
                                (outside[0], inside.clone())
                            };
                            let tri = [
                                edge_point(single, others[0], &mut pts),
                                edge_point(single, others[1], &mut pts),
                                edge_point(single, others[2], &mut pts),
                            ];
                            emit(tri, &pts);
                        }
                        _ => {
                            let (a, b) = (inside[0], inside[1]);
                            let (c, d) = (outside[0], outside[1]);
                            let ac = edge_point(a, c, &mut pts);
                            let ad = edge_point(a, d, &mut pts);
                            let bd = edge_point(b, d, &mut pts);
                            let bc = edge_point(b, c, &mut pts);
                            emit([ac, ad, bd], &pts);
                            emit([ac, bd, bc], &pts);
                        }
                    }
                }
            }
        }
    }
    TriMesh::new(pts, faces).expect("marching tetrahedra output is valid")
}

/// Four-segment axis with lengths 2.5, 0.5, 0.5, 2.5 mm turning by
/// -27, 10 and 27 degrees in the xz plane.
pub fn twist_polyline() -> Vec<Vec3> {
    let lengths = [2.5, 0.5, 0.5, 2.5];
    let turns = [-27.0f64, 10.0, 27.0];
    let mut heading = 0.0f64;
    let mut pts = vec![Vec3::zeros()];
    for (i, &len) in lengths.iter().enumerate() {
        if i > 0 {
            heading += turns[i - 1].to_radians();
        }
        let last = *pts.last().unwrap();
        pts.push(last + v(heading.sin(), 0., heading.cos()) * len);
    }
    pts
}

/// Names accepted by [`by_name`].
pub const FIXTURE_NAMES: [&str; 8] = [
    "stenotic_tube",
    "large_stenotic_tube",
    "curved_arc",
    "s_curve",
    "eccentric_stenosis",
    "hourglass",
    "y_bifurcation",
    "cylinder",
];

pub fn by_name(name: &str) -> Option<Fixture> {
    Some(match name {
        "stenotic_tube" => stenotic_tube(),
        "large_stenotic_tube" => large_stenotic_tube(),
        "curved_arc" => curved_arc(),
        "s_curve" => s_curve(),
        "eccentric_stenosis" => eccentric_stenosis(),
        "hourglass" => hourglass(),
        "y_bifurcation" => y_bifurcation(),
        "cylinder" => analytic_cylinder(),
        _ => return None,
    })
}

/// Every deployment geometry in the validation suite.
pub fn deployment_suite() -> Vec<Fixture> {
    vec![
        stenotic_tube(),
        curved_arc(),
        s_curve(),
        eccentric_stenosis(),
        hourglass(),
        y_bifurcation(),
    ]
}

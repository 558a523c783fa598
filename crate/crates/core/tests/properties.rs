use proptest::prelude::*;

use vstent_core::deform::fall_off;
use vstent_core::io::{
    doc_to_mesh, mesh_to_polydata, parse_config, read_obj, read_polydata, write_obj, write_polydata,
};
use vstent_core::sdf::{capsule_sdf, smin, smin_grad, CapsuleSegment};
use vstent_core::*;

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn polyline() -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec(vec3(10.0), 2..8).prop_filter("distinct consecutive points", |pts| {
        pts.windows(2).all(|w| (w[1] - w[0]).norm() > 0.1)
    })
}

proptest! {
    #[test]
    fn smin_bounds_and_symmetry(a in -50.0..50.0f64, b in -50.0..50.0f64, k in 0.0..5.0f64) {
        let s = smin(a, b, k);
        prop_assert!(s <= a.min(b));
        prop_assert!(s >= a.min(b) - k / 4.0 - 1e-12);
        prop_assert_eq!(s, smin(b, a, k));
        prop_assert_eq!(smin(a, b, 0.0), a.min(b));
    }

    #[test]
    fn smin_seam_is_continuous(a in -50.0..50.0f64, k in 0.01..5.0f64) {
        let b = a + k;
        prop_assert!((smin(a, b, k) - a).abs() < 1e-9);
        let ga = Vec3::x();
        let gb = Vec3::y();
        let g = smin_grad(a, b, &ga, &gb, k);
        prop_assert!((g - ga).norm() < 1e-12);
    }

    #[test]
    fn capsule_distance_is_one_lipschitz(
        a in vec3(5.0), d in vec3(5.0), p in vec3(10.0), q in vec3(10.0), r in 0.0..3.0f64
    ) {
        prop_assume!(d.norm() > 1e-3);
        let seg = CapsuleSegment::new(a, a + d).unwrap();
        let diff = capsule_sdf(&p, &seg, r) - capsule_sdf(&q, &seg, r);
        prop_assert!(diff.abs() <= (p - q).norm() + 1e-12);
    }

    #[test]
    fn field_level_sets_nest(pts in polyline(), p in vec3(15.0), r1 in 0.0..3.0f64, dr in 0.01..2.0f64) {
        let field = StentField::from_polyline(&pts, 0.4, 2.0).unwrap();
        let shift = field.eval(&p, r1) - field.eval(&p, r1 + dr);
        prop_assert!((shift - dr).abs() < 1e-9);
    }

    #[test]
    fn field_lies_between_min_and_blended_floor(pts in polyline(), p in vec3(15.0), k in 0.0..1.0f64) {
        let field = StentField::from_polyline(&pts, k, 2.0).unwrap();
        let min = field.segments().iter().map(|s| s.sdf(&p, 1.0)).fold(f64::INFINITY, f64::min);
        let v = field.eval(&p, 1.0);
        prop_assert!(v <= min + 1e-12);
        prop_assert!(v >= min - k - 1e-12);
    }

    #[test]
    fn field_is_exact_away_from_blends(pts in polyline(), p in vec3(15.0)) {
        let k = 0.4;
        let field = StentField::from_polyline(&pts, k, 2.0).unwrap();
        let vals: Vec<f64> = field.segments().iter().map(|s| s.sdf(&p, 1.0)).collect();
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let separated = vals.iter().filter(|&&v| v - min <= k).count() == 1;
        prop_assume!(separated);
        prop_assert!((field.eval(&p, 1.0) - min).abs() < 1e-12);
    }

    #[test]
    fn field_box_bounds_level_set(pts in polyline(), p in vec3(20.0), r in 0.1..3.0f64, pad in 0.0..2.0f64) {
        let field = StentField::from_polyline(&pts, 0.4, 2.0).unwrap();
        if field.eval(&p, r) <= pad {
            prop_assert!(field.aabb(r, pad).contains(&p));
        }
    }

    #[test]
    fn fall_off_is_a_decreasing_unit_profile(d1 in -1.0..10.0f64, d2 in -1.0..10.0f64, d_infl in 0.1..8.0f64) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let (a, b) = (fall_off(lo, d_infl), fall_off(hi, d_infl));
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(a >= b);
    }

    #[test]
    fn resampled_axis_is_uniform(pts in polyline(), interval in 0.3..3.0f64) {
        let axis = resample_arclength(&pts, interval).unwrap();
        let first = axis.points[0];
        let last = *axis.points.last().unwrap();
        prop_assert!((first - pts[0]).norm() < 1e-12);
        prop_assert!((last - pts[pts.len() - 1]).norm() < 1e-12);
        prop_assert!(axis.segment_length > 0.0);
    }

    #[test]
    fn vertex_sets_are_sorted_and_unique(raw in prop::collection::vec(0u32..500, 0..200)) {
        let set = VertexIndexSet::from_unsorted(raw.clone());
        prop_assert!(set.as_slice().windows(2).all(|w| w[0] < w[1]));
        for i in &raw {
            prop_assert!(set.contains(*i));
        }
    }

    #[test]
    fn polydata_and_obj_round_trip(pts in prop::collection::vec(vec3(1e3), 3..40), seed in 0usize..1000) {
        let n = pts.len() as u32;
        let faces: Vec<[u32; 3]> = (0..n)
            .map(|i| [i, (i + 1 + seed as u32) % n, (i + 2 + 2 * seed as u32) % n])
            .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
            .collect();
        prop_assume!(!faces.is_empty());
        let mesh = TriMesh::new(pts, faces).unwrap();
        let back = doc_to_mesh(&read_polydata(&write_polydata(&mesh_to_polydata(&mesh))).unwrap()).unwrap();
        prop_assert_eq!(&back, &mesh);
        let obj = read_obj(&write_obj(&mesh)).unwrap();
        prop_assert_eq!(obj.positions(), mesh.positions());
        prop_assert_eq!(obj.faces(), mesh.faces());
    }

    #[test]
    fn sweeps_enumerate_the_cartesian_product(
        diameters in prop::collection::vec(1.0..8.0f64, 1..4),
        lengths in prop::collection::vec(5.0..30.0f64, 0..3),
        positions in 1usize..3,
        second in prop::collection::vec(1.0..8.0f64, 1..3),
    ) {
        let axes: Vec<String> = (0..positions)
            .map(|i| format!(r#"{{"start": {{"path": 0, "arc": {}}}, "end": {{"path": 0, "arc": 1}}}}"#, 10 + i))
            .collect();
        let len_field = if lengths.is_empty() {
            String::new()
        } else {
            format!(r#", "nominal_length": {:?}"#, lengths)
        };
        let doc = format!(
            r#"{{"schema": 1, "mesh_path": "m.vtp", "centerline_path": "c.vtp", "output_path": "out",
                "stents": [
                  {{"axis": [{}], "target_diameter": {:?}{}}},
                  {{"axis": {{"start": {{"path": 0, "arc": 4}}, "end": {{"path": 0, "arc": 0}}}}, "target_diameter": {:?}}}
                ]}}"#,
            axes.join(","), diameters, len_field, second
        );
        let cfg = parse_config(doc.as_bytes()).unwrap();
        let runs = cfg.runs();
        let per_first = positions * diameters.len() * lengths.len().max(1);
        prop_assert_eq!(runs.len(), per_first * second.len());
        // independent enumeration, first stent slowest
        let mut expected = Vec::new();
        for pos in 0..positions {
            for &d in &diameters {
                let ls: Vec<Option<f64>> = if lengths.is_empty() { vec![None] } else { lengths.iter().map(|&l| Some(l)).collect() };
                for l in ls {
                    for &d2 in &second {
                        expected.push((10.0 + pos as f64, d, l, d2));
                    }
                }
            }
        }
        for (run, e) in runs.iter().zip(&expected) {
            prop_assert_eq!(run.stents.len(), 2);
            prop_assert_eq!(run.stents[0].selection.start.arc, e.0);
            prop_assert_eq!(run.stents[0].diameter, e.1);
            prop_assert_eq!(run.stents[0].nominal_length, e.2);
            prop_assert_eq!(run.stents[1].diameter, e.3);
            prop_assert_eq!(run.stents[0].params.r_target, e.1 / 2.0);
        }
    }
}

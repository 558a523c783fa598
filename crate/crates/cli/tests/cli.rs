mod common;

use std::fs;

use common::{code, deploy_tube, fixture, run, stderr, stdout};
use serde_json::{json, Value};

#[test]
fn deploy_opens_the_stenosis() {
    let dir = tempfile::tempdir().unwrap();
    let (mesh, cl) = fixture(dir.path(), "stenotic_tube");
    let out = dir.path().join("out/stented.vtp");
    let csv = dir.path().join("profile.csv");
    let res = deploy_tube(&mesh, &cl, &out, &["--json", "--metrics-out", csv.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let report: Value = serde_json::from_str(&stdout(&res)).unwrap();
    let s = &report["summary"];
    let (min, max, mean) = (
        s["min"].as_f64().unwrap(),
        s["max"].as_f64().unwrap(),
        s["mean"].as_f64().unwrap(),
    );
    assert!(max <= 6.0 + 1e-3, "max {max}");
    assert!(mean > 5.85 && mean <= 6.0, "mean {mean}");
    assert!(min > 5.5, "min {min}");
    assert_eq!(report["report"]["validity"]["is_watertight"], true);
    assert!(fs::read_to_string(&csv).unwrap().starts_with("arc_length,mis_radius"));

    let check = run(&["check", "--mesh", out.to_str().unwrap()]);
    assert_eq!(code(&check), 0, "{}", stdout(&check));
}

#[test]
fn deploy_is_deterministic_and_human_readable() {
    let dir = tempfile::tempdir().unwrap();
    let (mesh, cl) = fixture(dir.path(), "stenotic_tube");
    let a = dir.path().join("a.vtp");
    let b = dir.path().join("b.vtp");
    let ra = deploy_tube(&mesh, &cl, &a, &[]);
    assert_eq!(code(&ra), 0, "{}", stderr(&ra));
    let text = stdout(&ra);
    for needle in ["stent: 6.000 mm", "steps", "watertight", "MIS diameter: min", "wrote"] {
        assert!(text.contains(needle), "{needle} missing from\n{text}");
    }
    assert_eq!(code(&deploy_tube(&mesh, &cl, &b, &[])), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn bad_arguments_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (mesh, cl) = fixture(dir.path(), "stenotic_tube");
    let out = dir.path().join("x.vtp");
    let args = |extra: &[&str]| {
        let mut v = vec![
            "deploy",
            "--mesh",
            mesh.to_str().unwrap(),
            "--centerline",
            cl.to_str().unwrap(),
        ];
        v.extend([
            "--start-path",
            "0",
            "--start-arc",
            "40",
            "--end-path",
            "0",
            "--end-arc",
            "20",
        ]);
        v.extend(["--out", out.to_str().unwrap()]);
        v.extend_from_slice(extra);
        run(&v)
    };
    for extra in [
        &["--diameter", "0"][..],
        &["--diameter", "-3"],
        &["--diameter", "6", "--dr", "0"],
        &["--diameter", "6", "--foreshortening", "1"],
        &["--diameter", "6", "--bogus"],
        &[],
    ] {
        let r = args(extra);
        assert_eq!(code(&r), 2, "{extra:?}: {}", stderr(&r));
    }
    assert!(!out.exists());
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["fixture", "no_such_vessel"])), 2);
}

#[test]
fn missing_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let none = dir.path().join("none.vtp");
    let r = deploy_tube(&none, &none, &dir.path().join("x.vtp"), &[]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("none.vtp"));
}

fn write_config(dir: &std::path::Path, stents: Value) -> std::path::PathBuf {
    let cfg = json!({
        "schema": 1,
        "mesh_path": "stenotic_tube.vtp",
        "centerline_path": "stenotic_tube_centerline.vtp",
        "output_path": "runs",
        "stents": stents,
    });
    let p = dir.join("config.json");
    fs::write(&p, cfg.to_string()).unwrap();
    p
}

fn manifest(dir: &std::path::Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(dir.join("runs/manifest.csv")).unwrap();
    let header = r.headers().unwrap().clone();
    assert_eq!(&header[0], "run");
    assert_eq!(&header[1], "status");
    r.records().map(|x| x.unwrap()).collect()
}

#[test]
fn batch_sweeps_diameters() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "stenotic_tube");
    let axis = json!({ "start": { "path": 0, "arc": 40 }, "end": { "path": 0, "arc": 20 } });
    let cfg = write_config(dir.path(), json!([{ "axis": axis, "target_diameter": [5, 6, 7] }]));
    let r = run(&["batch", cfg.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}\n{}", stdout(&r), stderr(&r));
    let rows = manifest(dir.path());
    assert_eq!(rows.len(), 3);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(&row[0], format!("run_{i:03}"));
        assert_eq!(&row[1], "ok");
        assert!(dir.path().join("runs").join(&row[2]).exists());
        assert!(dir.path().join("runs").join(&row[3]).exists());
    }
    let diameters: Vec<&str> = rows.iter().map(|r| &r[6]).collect();
    assert_eq!(diameters, ["5", "6", "7"]);

    // a batch run is the same deployment as a single one
    let single = dir.path().join("single.vtp");
    let (mesh, cl) = (
        dir.path().join("stenotic_tube.vtp"),
        dir.path().join("stenotic_tube_centerline.vtp"),
    );
    assert_eq!(code(&deploy_tube(&mesh, &cl, &single, &[])), 0);
    assert_eq!(
        fs::read(single).unwrap(),
        fs::read(dir.path().join("runs/run_001.vtp")).unwrap()
    );
}

#[test]
fn batch_takes_the_cartesian_product() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "stenotic_tube");
    let axes = json!([
        { "start": { "path": 0, "arc": 40 }, "end": { "path": 0, "arc": 20 } },
        { "start": { "path": 0, "arc": 38 }, "end": { "path": 0, "arc": 24 } },
    ]);
    let cfg = write_config(dir.path(), json!([{ "axis": axes, "target_diameter": [5.5, 6] }]));
    let r = run(&["batch", cfg.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let rows = manifest(dir.path());
    assert_eq!(rows.len(), 4);
    let combos: Vec<(String, String)> = rows.iter().map(|r| (r[5].to_string(), r[6].to_string())).collect();
    assert_eq!(combos[0], ("0:40>0:20".into(), "5.5".into()));
    assert_eq!(combos[3], ("0:38>0:24".into(), "6".into()));
}

#[test]
fn batch_without_stents_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "stenotic_tube");
    let cfg = write_config(dir.path(), json!([]));
    let r = run(&["batch", cfg.to_str().unwrap()]);
    assert_ne!(code(&r), 0);
    assert!(stderr(&r).contains("stent"), "{}", stderr(&r));
    assert!(!dir.path().join("runs").exists());
}

#[test]
fn batch_records_failed_runs_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "stenotic_tube");
    let axes = json!([
        { "start": { "path": 0, "arc": 40 }, "end": { "path": 0, "arc": 20 } },
        { "start": { "path": 7, "arc": 40 }, "end": { "path": 7, "arc": 20 } },
    ]);
    let cfg = write_config(dir.path(), json!([{ "axis": axes, "target_diameter": 6 }]));
    let r = run(&["batch", cfg.to_str().unwrap()]);
    assert_eq!(code(&r), 1);
    let rows = manifest(dir.path());
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][1], "ok");
    assert_eq!(&rows[1][1], "failed");
    assert!(!rows[1][19].is_empty());
}

#[test]
fn metrics_of_a_cylinder() {
    let dir = tempfile::tempdir().unwrap();
    let (mesh, cl) = fixture(dir.path(), "cylinder");
    let out = dir.path().join("cyl.csv");
    let r = run(&[
        "metrics",
        "--mesh",
        mesh.to_str().unwrap(),
        "--centerline",
        cl.to_str().unwrap(),
        "--from",
        "4",
        "--to",
        "16",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let mut n = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let arc: f64 = rec[0].parse().unwrap();
        // the caps bound the inscribed sphere within 3 mm of either end
        if (4.0..=16.0).contains(&arc) {
            let r: f64 = rec[1].parse().unwrap();
            assert!((r - 3.0).abs() < 0.01, "mis radius {r} at {arc}");
            let eq: f64 = rec[2].parse().unwrap();
            assert!((eq - 3.0).abs() < 0.01, "equivalent radius {eq} at {arc}");
            n += 1;
        }
    }
    assert!(n >= 45);
    assert!(
        stdout(&r).contains("MIS diameter: min 6.000 max 6.000"),
        "{}",
        stdout(&r)
    );

    let line = dir.path().join("line.txt");
    fs::write(&line, "0 0 5\n0 0 15\n").unwrap();
    let r = run(&[
        "metrics",
        "--mesh",
        mesh.to_str().unwrap(),
        "--polyline",
        line.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert_eq!(stdout(&r).lines().count(), 1 + 41);
}

#[test]
fn check_reports_open_surfaces() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(&["fixture", "open_disk", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&r), 0);
    let disk = dir.path().join("open_disk.vtp");
    let r = run(&["check", "--mesh", disk.to_str().unwrap(), "--json"]);
    assert_eq!(code(&r), 3);
    let v: Value = serde_json::from_str(&stdout(&r)).unwrap();
    assert_eq!(v["is_watertight"], false);
    assert!(v["boundary_edge_count"].as_u64().unwrap() > 0);

    let (mesh, _) = fixture(dir.path(), "hourglass");
    assert_eq!(code(&run(&["check", "--mesh", mesh.to_str().unwrap()])), 0);
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;

use vstent_core::centerline::extract_subpath;
use vstent_core::fixtures::{self, FIXTURE_NAMES};
use vstent_core::io::{centerline_to_polydata, parse_config, write_polydata, ResolvedStent, RunSpec};
use vstent_core::metrics::{full_profile, profile_to_csv, summarize};
use vstent_core::pipeline::{run_stents, StentOutcome};
use vstent_core::{
    check_validity, ArcPosition, AxisSelection, CenterlineTree, DiameterSummary, TriMesh, ValidityReport,
};

use crate::args::{BatchArgs, CheckArgs, DeployArgs, FixtureArgs, MetricsArgs};
use crate::error::{CliError, CliResult};
use crate::inputs::{parse_polyline, read_mesh, read_tree, write_file, write_mesh};

fn validity_line(v: &ValidityReport) -> String {
    format!(
        "validity: {}, {} boundary edges, {} non-manifold edges, {} self-intersecting face pairs",
        if v.is_watertight {
            "watertight"
        } else {
            "not watertight"
        },
        v.boundary_edge_count,
        v.non_manifold_edge_count,
        v.self_intersecting_face_pairs.len()
    )
}

fn summary_line(s: &DiameterSummary) -> String {
    format!(
        "MIS diameter: min {:.3} max {:.3} mean {:.3} sd {:.3} ({} samples)",
        s.min, s.max, s.mean, s.sd, s.sample_count
    )
}

#[derive(Serialize)]
struct DeployJson<'a> {
    output: &'a Path,
    axis_length: f64,
    segment_length: f64,
    #[serde(flatten)]
    outcome: &'a StentOutcome,
}

pub fn deploy(a: &DeployArgs) -> CliResult {
    let params = a.params.build(a.diameter)?;
    if !(0.0..1.0).contains(&a.foreshortening) {
        return Err(CliError::Usage(format!(
            "--foreshortening must be in [0, 1), got {}",
            a.foreshortening
        )));
    }
    if let Some(l) = a.length.filter(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(CliError::Usage(format!("--length must be > 0, got {l}")));
    }
    let mesh = read_mesh(&a.mesh)?;
    let tree = read_tree(&a.centerline)?;
    let stent = ResolvedStent {
        selection: a.selection.selection(),
        diameter: a.diameter,
        nominal_length: a.length,
        foreshortening: a.foreshortening,
        params,
    };
    let mut progress = |_: usize, rec: &vstent_core::StepRecord, _: &[(u32, vstent_core::Vec3)]| {
        log::debug!(
            "step {} r={:.3} contact={} influence={}",
            rec.index,
            rec.radius,
            rec.contact_count,
            rec.influence_count
        );
    };
    let (out, outcomes) = run_stents(&mesh, &tree, &[stent], true, Some(&mut progress))?;
    let o = &outcomes[0];
    write_mesh(&a.out, &out)?;
    if let Some(path) = &a.metrics_out {
        write_file(path, profile_to_csv(&o.profile).as_bytes())?;
    }

    if a.json {
        let doc = DeployJson {
            output: &a.out,
            axis_length: o.axis.length(),
            segment_length: o.axis.segment_length,
            outcome: o,
        };
        println!("{}", serde_json::to_string_pretty(&doc).map_err(anyhow::Error::from)?);
    } else {
        let r = &o.report;
        println!(
            "stent: {:.3} mm, axis {:.2} mm in {} capsules of {:.3} mm",
            a.diameter,
            o.axis.length(),
            o.axis.points.len() - 1,
            o.axis.segment_length
        );
        println!(
            "deployment: {} steps, {} vertices moved, {:.1} ms",
            r.steps.len(),
            r.moved_vertex_count,
            r.wall_time_ms
        );
        for w in &r.warnings {
            println!("warning: {w}");
        }
        println!("{}", validity_line(&r.validity));
        if let Some(s) = &o.summary {
            println!("{}", summary_line(s));
        }
        println!("wrote {}", a.out.display());
    }
    if !o.report.validity.is_valid() {
        return Err(CliError::Invalid(format!(
            "deformed mesh failed the validity check; written to {}",
            a.out.display()
        )));
    }
    Ok(())
}

const MANIFEST_HEADER: [&str; 20] = [
    "run",
    "status",
    "mesh",
    "metrics",
    "stents",
    "axis",
    "diameter",
    "length",
    "foreshortening",
    "k",
    "d_infl",
    "dr",
    "steps",
    "time_ms",
    "min_diameter",
    "max_diameter",
    "mean_diameter",
    "sd_diameter",
    "valid",
    "error",
];

fn axis_label(sel: &AxisSelection) -> String {
    let p = |a: &ArcPosition| format!("{}:{}", a.path, a.arc);
    format!("{}>{}", p(&sel.start), p(&sel.end))
}

/// Values of every stent in a run, `;` separated.
fn joined<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(";")
}

fn parameter_cells(run: &RunSpec) -> Vec<String> {
    let s = &run.stents;
    vec![
        s.len().to_string(),
        joined(s, |x| axis_label(&x.selection)),
        joined(s, |x| x.diameter.to_string()),
        joined(s, |x| x.nominal_length.map(|l| l.to_string()).unwrap_or_default()),
        joined(s, |x| x.foreshortening.to_string()),
        joined(s, |x| x.params.k.to_string()),
        joined(s, |x| x.params.d_infl.to_string()),
        joined(s, |x| x.params.dr.to_string()),
    ]
}

struct RunResult {
    mesh_file: String,
    metrics_files: Vec<String>,
    outcomes: Vec<StentOutcome>,
    valid: bool,
}

fn run_one(
    mesh: &TriMesh,
    tree: &CenterlineTree,
    run: &RunSpec,
    out_dir: &Path,
    emit_metrics: bool,
) -> anyhow::Result<RunResult> {
    let (out, outcomes) = run_stents(mesh, tree, &run.stents, emit_metrics, None)?;
    let mesh_file = format!("run_{:03}.vtp", run.index);
    write_mesh(&out_dir.join(&mesh_file), &out)?;
    let mut metrics_files = Vec::new();
    if emit_metrics {
        for (k, o) in outcomes.iter().enumerate() {
            let name = format!("run_{:03}_stent{}.csv", run.index, k + 1);
            write_file(&out_dir.join(&name), profile_to_csv(&o.profile).as_bytes())?;
            metrics_files.push(name);
        }
    }
    let valid = outcomes.last().is_some_and(|o| o.report.validity.is_valid());
    Ok(RunResult {
        mesh_file,
        metrics_files,
        outcomes,
        valid,
    })
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn batch(a: &BatchArgs) -> CliResult {
    let bytes = fs::read(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let cfg = parse_config(&bytes).with_context(|| format!("in {}", a.config.display()))?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let mesh = read_mesh(&resolve(base, &cfg.mesh_path))?;
    let tree = read_tree(&resolve(base, &cfg.centerline_path))?;
    let out_dir = resolve(base, &cfg.output_path);
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let runs = cfg.runs();
    let manifest_path = out_dir.join("manifest.csv");
    let mut w =
        csv::Writer::from_path(&manifest_path).with_context(|| format!("creating {}", manifest_path.display()))?;
    w.write_record(MANIFEST_HEADER).map_err(anyhow::Error::from)?;
    let (mut failed, mut invalid) = (0, 0);
    for run in &runs {
        let mut row = vec![format!("run_{:03}", run.index)];
        let params = parameter_cells(run);
        match run_one(&mesh, &tree, run, &out_dir, cfg.emit_metrics) {
            Ok(r) => {
                if !r.valid {
                    invalid += 1;
                }
                row.push(if r.valid { "ok" } else { "invalid" }.into());
                row.push(r.mesh_file);
                row.push(r.metrics_files.join(";"));
                row.extend(params);
                let o = &r.outcomes;
                row.push(joined(o, |x| x.report.steps.len().to_string()));
                row.push(joined(o, |x| format!("{:.1}", x.report.wall_time_ms)));
                let stat = |f: fn(&DiameterSummary) -> f64| {
                    joined(o, move |x| {
                        x.summary.map(|s| format!("{:.4}", f(&s))).unwrap_or_default()
                    })
                };
                row.push(stat(|s| s.min));
                row.push(stat(|s| s.max));
                row.push(stat(|s| s.mean));
                row.push(stat(|s| s.sd));
                row.push(r.valid.to_string());
                row.push(String::new());
                println!(
                    "run_{:03}: {}",
                    run.index,
                    if r.valid { "ok" } else { "invalid output" }
                );
            }
            Err(e) => {
                failed += 1;
                row.extend(["failed".into(), String::new(), String::new()]);
                row.extend(params);
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push(format!("{e:#}"));
                println!("run_{:03}: failed: {e:#}", run.index);
            }
        }
        w.write_record(&row).map_err(anyhow::Error::from)?;
        w.flush().map_err(anyhow::Error::from)?;
    }
    println!(
        "{} runs, {} failed, {} invalid; manifest {}",
        runs.len(),
        failed,
        invalid,
        manifest_path.display()
    );
    if failed > 0 {
        return Err(CliError::Failed(anyhow!("{failed} of {} runs failed", runs.len())));
    }
    if invalid > 0 {
        return Err(CliError::Invalid(format!(
            "{invalid} of {} outputs failed the validity check",
            runs.len()
        )));
    }
    Ok(())
}

/// The whole root path, from its far end back to its start.
fn root_selection(tree: &CenterlineTree) -> anyhow::Result<AxisSelection> {
    let root = tree.path(tree.root())?;
    Ok(AxisSelection {
        start: ArcPosition::new(root.id(), root.length()),
        end: ArcPosition::new(root.id(), 0.0),
    })
}

pub fn metrics(a: &MetricsArgs) -> CliResult {
    if !(a.spacing.is_finite() && a.spacing > 0.0) {
        return Err(CliError::Usage(format!("--spacing must be > 0, got {}", a.spacing)));
    }
    let selection = a.selection()?;
    let mesh = read_mesh(&a.mesh)?;
    let polyline = match (&a.polyline, &a.centerline) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_polyline(&text).with_context(|| format!("in {}", p.display()))?
        }
        (None, Some(c)) => {
            let tree = read_tree(c)?;
            let sel = match selection {
                Some(s) => s,
                None => root_selection(&tree)?,
            };
            extract_subpath(&tree, &sel).map_err(anyhow::Error::from)?
        }
        (None, None) => return Err(CliError::Usage("give --centerline or --polyline".into())),
    };
    let profile = full_profile(&mesh, &polyline, a.spacing).map_err(anyhow::Error::from)?;
    let csv = profile_to_csv(&profile);
    let end = profile.last().map_or(0.0, |s| s.arc_length);
    let summary = summarize(&profile, a.from.unwrap_or(0.0), a.to.unwrap_or(end));
    let line = match &summary {
        Ok(s) => summary_line(s),
        Err(e) => format!("no summary: {e}"),
    };
    match &a.out {
        Some(path) => {
            write_file(path, csv.as_bytes())?;
            println!("{line}");
            println!("wrote {}", path.display());
        }
        None => {
            print!("{csv}");
            eprintln!("{line}");
        }
    }
    let flagged = profile.iter().filter(|s| s.flags.outside).count();
    if flagged > 0 {
        eprintln!("warning: {flagged} samples lie outside the surface");
    }
    Ok(())
}

pub fn check(a: &CheckArgs) -> CliResult {
    let mesh = read_mesh(&a.mesh)?;
    let report = check_validity(&mesh);
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?
        );
    } else {
        println!("{} vertices, {} faces", mesh.vertex_count(), mesh.face_count());
        println!("{}", validity_line(&report));
    }
    if report.is_valid() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!(
            "{} is not a valid closed surface",
            a.mesh.display()
        )))
    }
}

pub fn fixture(a: &FixtureArgs) -> CliResult {
    if a.name == "open_disk" {
        let path = a.out_dir.join("open_disk.vtp");
        write_mesh(&path, &fixtures::open_disk(32))?;
        println!("wrote {}", path.display());
        return Ok(());
    }
    let Some(f) = fixtures::by_name(&a.name) else {
        return Err(CliError::Usage(format!(
            "unknown fixture {:?}; choose one of {}, open_disk",
            a.name,
            FIXTURE_NAMES.join(", ")
        )));
    };
    let mesh_path = a.out_dir.join(format!("{}.vtp", f.name));
    let cl_path = a.out_dir.join(format!("{}_centerline.vtp", f.name));
    write_mesh(&mesh_path, &f.mesh)?;
    write_file(&cl_path, &write_polydata(&centerline_to_polydata(&f.centerline)))?;
    // centerline files number their paths by cell index, in id order
    let mut ids: Vec<u32> = f.centerline.iter().map(|p| p.id()).collect();
    ids.sort_unstable();
    let index_of = |id: u32| ids.iter().position(|&i| i == id).unwrap_or(0);
    let s = f.selection;
    println!("wrote {} and {}", mesh_path.display(), cl_path.display());
    println!(
        "reference stent: --start-path {} --start-arc {} --end-path {} --end-arc {} --diameter {}",
        index_of(s.start.path),
        s.start.arc,
        index_of(s.end.path),
        s.end.arc,
        f.diameter
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use vstent_core::DeploymentParams;

    #[test]
    fn manifest_cells_join_stents() {
        let stent = |path, d| ResolvedStent {
            selection: AxisSelection {
                start: ArcPosition::new(path, 12.5),
                end: ArcPosition::new(path, 2.0),
            },
            diameter: d,
            nominal_length: None,
            foreshortening: 0.1,
            params: DeploymentParams::from_diameter(d),
        };
        let run = RunSpec {
            index: 4,
            stents: vec![stent(0, 5.0), stent(1, 6.5)],
        };
        let cells = parameter_cells(&run);
        assert_eq!(cells.len() + 4 + 7 + 1, MANIFEST_HEADER.len());
        assert_eq!(cells[0], "2");
        assert_eq!(cells[1], "0:12.5>0:2;1:12.5>1:2");
        assert_eq!(cells[2], "5;6.5");
        assert_eq!(cells[3], ";");
    }

    #[test]
    fn relative_paths_follow_the_config() {
        assert_eq!(resolve(Path::new("/a/b"), "m.vtp"), PathBuf::from("/a/b/m.vtp"));
        assert_eq!(resolve(Path::new("/a/b"), "/x/m.vtp"), PathBuf::from("/x/m.vtp"));
    }
}

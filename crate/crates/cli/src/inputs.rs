//! File loading and writing by extension.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context};

use vstent_core::io::{
    doc_to_mesh, mesh_to_polydata, read_centerline, read_obj, read_polydata, write_obj, write_polydata,
};
use vstent_core::{CenterlineTree, TriMesh, Vec3};

fn is_obj(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"))
}

pub fn read_mesh(path: &Path) -> anyhow::Result<TriMesh> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mesh = if is_obj(path) {
        let text = std::str::from_utf8(&bytes).map_err(|_| anyhow!("{} is not UTF-8", path.display()))?;
        read_obj(text)
    } else {
        read_polydata(&bytes).and_then(|d| doc_to_mesh(&d))
    };
    mesh.with_context(|| format!("loading mesh {}", path.display()))
}

pub fn read_tree(path: &Path) -> anyhow::Result<CenterlineTree> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    read_polydata(&bytes)
        .and_then(|d| read_centerline(&d))
        .with_context(|| format!("loading centerline {}", path.display()))
}

/// Bytes of `mesh` in the format implied by `path` (OBJ or polydata).
pub fn encode_mesh(path: &Path, mesh: &TriMesh) -> Vec<u8> {
    if is_obj(path) {
        write_obj(mesh).into_bytes()
    } else {
        write_polydata(&mesh_to_polydata(mesh))
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn write_mesh(path: &Path, mesh: &TriMesh) -> anyhow::Result<()> {
    write_file(path, &encode_mesh(path, mesh))
}

/// Points as whitespace or comma separated `x y z` lines; `#` starts a
/// comment.
pub fn parse_polyline(text: &str) -> anyhow::Result<Vec<Vec3>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| anyhow!("line {}: {e}", n + 1))?;
        if v.len() != 3 {
            bail!("line {}: expected 3 coordinates, got {}", n + 1, v.len());
        }
        out.push(Vec3::new(v[0], v[1], v[2]));
    }
    if out.len() < 2 {
        bail!("polyline needs at least 2 points");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use vstent_core::fixtures;

    #[test]
    fn polyline_text() {
        let pts = parse_polyline("# axis\n0 0 0\n0,0,1.5  # tip\n\n").unwrap();
        assert_eq!(pts, vec![Vec3::zeros(), Vec3::new(0.0, 0.0, 1.5)]);
        assert!(parse_polyline("0 0\n1 1 1").is_err());
        assert!(parse_polyline("0 0 0").is_err());
    }

    #[test]
    fn mesh_files_round_trip_by_extension() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = fixtures::icosphere(1, 2.0);
        for name in ["a.vtp", "nested/b.obj"] {
            let p = dir.path().join(name);
            write_mesh(&p, &mesh).unwrap();
            assert_eq!(read_mesh(&p).unwrap(), mesh);
        }
        let missing = read_mesh(&dir.path().join("none.vtp")).unwrap_err();
        assert!(format!("{missing:#}").contains("none.vtp"));
    }
}

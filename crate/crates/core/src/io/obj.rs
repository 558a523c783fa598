use std::fmt::Write as _;

use super::IoError;
use crate::geom::Vec3;
use crate::mesh::TriMesh;

/// Read `v` and `f` records. Faces may use `i/t/n` syntax and negative
/// indices; polygons are fan-triangulated. Other records are ignored.
pub fn read_obj(text: &str) -> Result<TriMesh, IoError> {
    let mut pos = Vec::new();
    let mut faces = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let err = |message: String| IoError::Obj { line, message };
        let mut it = raw.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|_| err(format!("bad coordinate {t:?}"))))
                    .collect::<Result<_, _>>()?;
                if c.len() != 3 {
                    return Err(err("vertex needs three coordinates".into()));
                }
                pos.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = it
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|_| err(format!("bad index {t:?}")))?;
                        let resolved = if i < 0 { pos.len() as i64 + i } else { i - 1 };
                        if resolved < 0 || resolved >= pos.len() as i64 {
                            return Err(err(format!("index {i} out of range")));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs at least three vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(TriMesh::new(pos, faces)?)
}

/// Write `v` and `f` records with round-trip precision.
pub fn write_obj(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for p in mesh.positions() {
        let _ = writeln!(out, "v {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

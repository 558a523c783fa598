use std::collections::BTreeMap;
use std::fmt::Write as _;

use roxmltree::{Document, Node};

use super::IoError;
use crate::centerline::{build_ancestry, CenterlinePath, CenterlineTree};
use crate::geom::Vec3;
use crate::mesh::{PointArray, TriMesh};

/// Point-data names searched, in order, for per-point centerline radii.
pub const RADIUS_ARRAY_NAMES: [&str; 2] = ["MaximumInscribedSphereRadius", "Radius"];

/// In-memory polydata: points, triangles, polylines and named point arrays.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolyDataDocument {
    pub points: Vec<Vec3>,
    pub polys: Vec<[u32; 3]>,
    pub lines: Vec<Vec<u32>>,
    pub point_data: BTreeMap<String, PointArray>,
}

fn attr<'a>(node: &Node<'a, '_>, name: &str) -> Option<&'a str> {
    node.attribute(name)
}

fn child<'a, 'i>(node: &Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.has_tag_name(tag))
}

fn count_attr(piece: &Node, name: &str) -> Result<usize, IoError> {
    match attr(piece, name) {
        None => Ok(0),
        Some(s) => s
            .trim()
            .parse()
            .map_err(|_| IoError::Format(format!("bad {name} value {s:?}"))),
    }
}

/// Parse a DataArray's ASCII payload. Rejects anything not ASCII.
fn array_values(node: &Node) -> Result<Vec<f64>, IoError> {
    let format = attr(node, "format").unwrap_or("ascii");
    if format != "ascii" {
        return Err(IoError::UnsupportedEncoding(format!("DataArray format {format:?}")));
    }
    let text = node.text().unwrap_or("");
    text.split_ascii_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| IoError::Format(format!("bad number {t:?} in DataArray")))
        })
        .collect()
}

fn components(node: &Node) -> Result<usize, IoError> {
    match attr(node, "NumberOfComponents") {
        None => Ok(1),
        Some(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(IoError::Format(format!("bad NumberOfComponents {s:?}"))),
        },
    }
}

fn index_values(node: &Node, what: &str) -> Result<Vec<u64>, IoError> {
    array_values(node)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u64)
            } else {
                Err(IoError::Format(format!("{what}: {v} is not a valid index")))
            }
        })
        .collect()
}

/// Cells of a Lines/Polys block as vertex index lists.
fn read_cells(block: &Node, name: &str, expected: usize, n_points: usize) -> Result<Vec<Vec<u32>>, IoError> {
    let mut conn = None;
    let mut offs = None;
    for a in block.children().filter(|c| c.has_tag_name("DataArray")) {
        match attr(&a, "Name") {
            Some("connectivity") => conn = Some(index_values(&a, "connectivity")?),
            Some("offsets") => offs = Some(index_values(&a, "offsets")?),
            _ => {}
        }
    }
    let (conn, offs) = match (conn, offs) {
        (Some(c), Some(o)) => (c, o),
        _ => return Err(IoError::Format(format!("{name} needs connectivity and offsets arrays"))),
    };
    if offs.len() != expected {
        return Err(IoError::Format(format!(
            "{name}: {} offsets for {expected} cells",
            offs.len()
        )));
    }
    let mut cells = Vec::with_capacity(expected);
    let mut start = 0usize;
    for &end in &offs {
        let end = end as usize;
        if end < start || end > conn.len() {
            return Err(IoError::Format(format!(
                "{name}: offsets are not increasing within bounds"
            )));
        }
        let cell: Vec<u32> = conn[start..end].iter().map(|&i| i as u32).collect();
        if let Some(&bad) = cell.iter().find(|&&i| i as usize >= n_points) {
            return Err(IoError::Format(format!(
                "{name}: index {bad} out of range for {n_points} points"
            )));
        }
        cells.push(cell);
        start = end;
    }
    if start != conn.len() {
        return Err(IoError::Format(format!("{name}: connectivity longer than offsets")));
    }
    Ok(cells)
}

/// Parse the supported ASCII subset of VTK XML polydata. Polygons with
/// more than three vertices are fan-triangulated.
pub fn read_polydata(bytes: &[u8]) -> Result<PolyDataDocument, IoError> {
    let text = std::str::from_utf8(bytes).map_err(|e| IoError::Xml(e.to_string()))?;
    let doc = Document::parse(text).map_err(|e| IoError::Xml(e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("VTKFile") {
        return Err(IoError::Format(format!(
            "root element is <{}>, expected <VTKFile>",
            root.tag_name().name()
        )));
    }
    if attr(&root, "type") != Some("PolyData") {
        return Err(IoError::Format(format!(
            "VTKFile type {:?} is not PolyData",
            attr(&root, "type").unwrap_or("")
        )));
    }
    if let Some(c) = attr(&root, "compressor") {
        return Err(IoError::UnsupportedEncoding(format!("compressor {c}")));
    }
    if child(&root, "AppendedData").is_some() {
        return Err(IoError::UnsupportedEncoding("AppendedData section".into()));
    }
    let poly = child(&root, "PolyData").ok_or_else(|| IoError::Format("missing <PolyData>".into()))?;
    let pieces: Vec<Node> = poly.children().filter(|c| c.has_tag_name("Piece")).collect();
    if pieces.len() != 1 {
        return Err(IoError::Format(format!("expected one <Piece>, found {}", pieces.len())));
    }
    let piece = pieces[0];
    let n_points = count_attr(&piece, "NumberOfPoints")?;
    for unsupported in ["NumberOfVerts", "NumberOfStrips"] {
        if count_attr(&piece, unsupported)? > 0 {
            return Err(IoError::Format(format!("{unsupported} > 0 is not supported")));
        }
    }

    let points = if n_points == 0 {
        Vec::new()
    } else {
        let arr = child(&piece, "Points")
            .and_then(|p| child(&p, "DataArray"))
            .ok_or_else(|| IoError::Format("missing <Points> DataArray".into()))?;
        if components(&arr)? != 3 {
            return Err(IoError::Format("Points must have 3 components".into()));
        }
        let v = array_values(&arr)?;
        if v.len() != 3 * n_points {
            return Err(IoError::Format(format!(
                "Points has {} values, expected {}",
                v.len(),
                3 * n_points
            )));
        }
        v.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
    };

    let mut polys = Vec::new();
    let n_polys = count_attr(&piece, "NumberOfPolys")?;
    if n_polys > 0 {
        let block = child(&piece, "Polys").ok_or_else(|| IoError::Format("missing <Polys>".into()))?;
        for (ci, cell) in read_cells(&block, "Polys", n_polys, n_points)?.into_iter().enumerate() {
            if cell.len() < 3 {
                return Err(IoError::Format(format!("polygon {ci} has {} vertices", cell.len())));
            }
            for k in 1..cell.len() - 1 {
                polys.push([cell[0], cell[k], cell[k + 1]]);
            }
        }
    }

    let mut lines = Vec::new();
    let n_lines = count_attr(&piece, "NumberOfLines")?;
    if n_lines > 0 {
        let block = child(&piece, "Lines").ok_or_else(|| IoError::Format("missing <Lines>".into()))?;
        lines = read_cells(&block, "Lines", n_lines, n_points)?;
    }

    let mut point_data = BTreeMap::new();
    if let Some(pd) = child(&piece, "PointData") {
        for a in pd.children().filter(|c| c.has_tag_name("DataArray")) {
            let name = attr(&a, "Name")
                .ok_or_else(|| IoError::Format("PointData array without Name".into()))?
                .to_string();
            let comps = components(&a)?;
            let values = array_values(&a)?;
            if values.len() != comps * n_points {
                return Err(IoError::Format(format!(
                    "point array {name:?} has {} values, expected {}",
                    values.len(),
                    comps * n_points
                )));
            }
            point_data.insert(
                name,
                PointArray {
                    components: comps,
                    values,
                },
            );
        }
    }
    Ok(PolyDataDocument {
        points,
        polys,
        lines,
        point_data,
    })
}

fn push_floats(out: &mut String, values: impl Iterator<Item = f64>, per_line: usize) {
    for (i, v) in values.enumerate() {
        if i % per_line == 0 {
            out.push_str("\n          ");
        } else {
            out.push(' ');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push_str("\n        ");
}

fn push_ints(out: &mut String, values: impl Iterator<Item = u64>, per_line: usize) {
    for (i, v) in values.enumerate() {
        if i % per_line == 0 {
            out.push_str("\n          ");
        } else {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push_str("\n        ");
}

fn push_cells(out: &mut String, tag: &str, cells: &[&[u32]]) {
    let _ = writeln!(out, "      <{tag}>");
    out.push_str("        <DataArray type=\"Int64\" Name=\"connectivity\" format=\"ascii\">");
    push_ints(out, cells.iter().flat_map(|c| c.iter().map(|&i| i as u64)), 12);
    out.push_str("</DataArray>\n");
    out.push_str("        <DataArray type=\"Int64\" Name=\"offsets\" format=\"ascii\">");
    let mut acc = 0u64;
    push_ints(
        out,
        cells.iter().map(|c| {
            acc += c.len() as u64;
            acc
        }),
        12,
    );
    out.push_str("</DataArray>\n");
    let _ = writeln!(out, "      </{tag}>");
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Serialise to ASCII VTK XML polydata. Floats carry 17 significant digits
/// so 64-bit values survive a round trip; output is deterministic.
pub fn write_polydata(doc: &PolyDataDocument) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\"?>\n");
    out.push_str("<VTKFile type=\"PolyData\" version=\"0.1\" byte_order=\"LittleEndian\">\n");
    out.push_str("  <PolyData>\n");
    let _ = writeln!(
        out,
        "    <Piece NumberOfPoints=\"{}\" NumberOfVerts=\"0\" NumberOfLines=\"{}\" NumberOfStrips=\"0\" NumberOfPolys=\"{}\">",
        doc.points.len(),
        doc.lines.len(),
        doc.polys.len()
    );
    if !doc.point_data.is_empty() {
        out.push_str("      <PointData>\n");
        for (name, arr) in &doc.point_data {
            let _ = write!(
                out,
                "        <DataArray type=\"Float64\" Name=\"{}\" NumberOfComponents=\"{}\" format=\"ascii\">",
                xml_escape(name),
                arr.components
            );
            push_floats(&mut out, arr.values.iter().copied(), arr.components.max(3));
            out.push_str("</DataArray>\n");
        }
        out.push_str("      </PointData>\n");
    }
    out.push_str("      <Points>\n");
    out.push_str("        <DataArray type=\"Float64\" NumberOfComponents=\"3\" format=\"ascii\">");
    push_floats(&mut out, doc.points.iter().flat_map(|p| [p.x, p.y, p.z]), 3);
    out.push_str("</DataArray>\n");
    out.push_str("      </Points>\n");
    if !doc.lines.is_empty() {
        let cells: Vec<&[u32]> = doc.lines.iter().map(|l| l.as_slice()).collect();
        push_cells(&mut out, "Lines", &cells);
    }
    if !doc.polys.is_empty() {
        let cells: Vec<&[u32]> = doc.polys.iter().map(|p| p.as_slice()).collect();
        push_cells(&mut out, "Polys", &cells);
    }
    out.push_str("    </Piece>\n");
    out.push_str("  </PolyData>\n");
    out.push_str("</VTKFile>\n");
    out.into_bytes()
}

pub fn mesh_to_polydata(mesh: &TriMesh) -> PolyDataDocument {
    PolyDataDocument {
        points: mesh.positions().to_vec(),
        polys: mesh.faces().to_vec(),
        lines: Vec::new(),
        point_data: mesh.point_data().clone(),
    }
}

pub fn doc_to_mesh(doc: &PolyDataDocument) -> Result<TriMesh, IoError> {
    if doc.polys.is_empty() {
        return Err(IoError::Format("document has no polygons".into()));
    }
    Ok(TriMesh::with_point_data(
        doc.points.clone(),
        doc.polys.clone(),
        doc.point_data.clone(),
    )?)
}

/// One path per line cell, numbered by cell order.
pub fn read_centerline(doc: &PolyDataDocument) -> Result<CenterlineTree, IoError> {
    if doc.lines.is_empty() {
        return Err(IoError::MissingLines);
    }
    let radius = RADIUS_ARRAY_NAMES
        .iter()
        .find_map(|n| doc.point_data.get(*n))
        .ok_or(IoError::MissingRadius)?;
    if radius.components != 1 {
        return Err(IoError::Format("radius array must have one component".into()));
    }
    let mut paths = Vec::with_capacity(doc.lines.len());
    for (id, cell) in doc.lines.iter().enumerate() {
        let pts = cell.iter().map(|&i| doc.points[i as usize]).collect();
        let r = cell.iter().map(|&i| radius.values[i as usize]).collect();
        paths.push(CenterlinePath::new(id as u32, pts, r)?);
    }
    Ok(build_ancestry(paths)?)
}

/// Paths as line cells (ordered by id) with the radius array.
pub fn centerline_to_polydata(paths: &[CenterlinePath]) -> PolyDataDocument {
    let mut sorted: Vec<&CenterlinePath> = paths.iter().collect();
    sorted.sort_by_key(|p| p.id());
    let mut doc = PolyDataDocument::default();
    let mut radii = Vec::new();
    for p in sorted {
        let start = doc.points.len() as u32;
        doc.points.extend_from_slice(p.points());
        radii.extend_from_slice(p.mis_radius());
        doc.lines.push((start..start + p.points().len() as u32).collect());
    }
    doc.point_data.insert(
        RADIUS_ARRAY_NAMES[0].to_string(),
        PointArray {
            components: 1,
            values: radii,
        },
    );
    doc
}

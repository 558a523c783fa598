//! Readers and writers: ASCII VTK XML polydata, OBJ and the JSON
//! deployment configuration. Everything works on in-memory bytes.

mod config;
mod obj;
mod vtp;

use thiserror::Error;

use crate::centerline::CenterlineError;
use crate::mesh::MeshError;

pub use config::{
    parse_config, AxisSpec, DeploymentConfig, OneOrMany, ResolvedStent, RunSpec, StentConfig, CONFIG_SCHEMA,
};
pub use obj::{read_obj, write_obj};
pub use vtp::{
    centerline_to_polydata, doc_to_mesh, mesh_to_polydata, read_centerline, read_polydata, write_polydata,
    PolyDataDocument, RADIUS_ARRAY_NAMES,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("unsupported encoding: {0} (only ASCII data arrays are supported)")]
    UnsupportedEncoding(String),
    #[error("invalid polydata: {0}")]
    Format(String),
    #[error("centerline has no radius array; accepted names: {}", RADIUS_ARRAY_NAMES.join(", "))]
    MissingRadius,
    #[error("centerline document has no line cells")]
    MissingLines,
    #[error("OBJ line {line}: {message}")]
    Obj { line: usize, message: String },
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Centerline(#[from] CenterlineError),
}

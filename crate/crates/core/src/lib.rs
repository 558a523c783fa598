//! Virtual stent deployment on triangle surface meshes.
//!
//! A stent is modelled as a chain of capsules joined by a quadratic smooth
//! minimum. Its radius is grown step by step and mesh vertices near the
//! advancing surface are pushed outward along the field gradient.

pub mod centerline;
pub mod deform;
pub mod fixtures;
pub mod geom;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod sdf;

pub use centerline::{
    apply_foreshortening, build_ancestry, build_stent_axis, extract_subpath, resample_arclength, selection_length,
    ArcPosition, AxisSelection, CenterlineError, CenterlinePath, CenterlineTree, PathId, StentAxis,
};
pub use deform::{deploy, Deployment, DeploymentError, DeploymentParams, DeploymentReport, StepRecord};
pub use geom::{Aabb, Vec3};
pub use mesh::{check_validity, MeshError, TriMesh, ValidityReport, VertexIndexSet};
pub use metrics::{DiameterSummary, ProfileSample};
pub use sdf::{SdfError, StentField};

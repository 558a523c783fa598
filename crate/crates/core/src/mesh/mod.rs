//! Indexed triangle meshes, spatial indices and validity checks.

mod bvh;
mod kdtree;
mod query;
mod topology;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geom::{triangle_area, Aabb, Vec3};

pub use bvh::Bvh;
pub use kdtree::KdTree;
pub use query::{vertices_near_field, vertices_within, vertices_within_with_leaf_size};
pub use topology::{build_edge_map, check_validity, EdgeMap, ValidityReport};

/// Faces with less area than this are rejected on construction.
pub const MIN_FACE_AREA: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: u32, count: usize },
    #[error("face {face} repeats a vertex index")]
    RepeatedIndex { face: usize },
    #[error("face {face} is degenerate (area {area:e} mm^2)")]
    DegenerateFace { face: usize, area: f64 },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("point-data array {name:?} has {len} values, expected {expected}")]
    PointDataLength { name: String, len: usize, expected: usize },
    #[error("expected {expected} positions, got {got}")]
    PositionCount { expected: usize, got: usize },
}

/// A named per-vertex attribute array.
#[derive(Debug, Clone, PartialEq)]
pub struct PointArray {
    pub components: usize,
    pub values: Vec<f64>,
}

/// Indexed triangle surface. Faces are counter-clockwise seen from outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    positions: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    point_data: BTreeMap<String, PointArray>,
}

impl TriMesh {
    pub fn new(positions: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        Self::with_point_data(positions, faces, BTreeMap::new())
    }

    pub fn with_point_data(
        positions: Vec<Vec3>,
        faces: Vec<[u32; 3]>,
        point_data: BTreeMap<String, PointArray>,
    ) -> Result<Self, MeshError> {
        if let Some(i) = positions
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(MeshError::NonFinite(i));
        }
        let n = positions.len();
        for (fi, f) in faces.iter().enumerate() {
            for &i in f {
                if i as usize >= n {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: i,
                        count: n,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::RepeatedIndex { face: fi });
            }
            let area = triangle_area(
                &positions[f[0] as usize],
                &positions[f[1] as usize],
                &positions[f[2] as usize],
            );
            if area < MIN_FACE_AREA {
                return Err(MeshError::DegenerateFace { face: fi, area });
            }
        }
        for (name, arr) in &point_data {
            if arr.values.len() != n * arr.components {
                return Err(MeshError::PointDataLength {
                    name: name.clone(),
                    len: arr.values.len(),
                    expected: n * arr.components,
                });
            }
        }
        Ok(Self {
            positions,
            faces,
            point_data,
        })
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn point_data(&self) -> &BTreeMap<String, PointArray> {
        &self.point_data
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let f = self.faces[face];
        [
            self.positions[f[0] as usize],
            self.positions[f[1] as usize],
            self.positions[f[2] as usize],
        ]
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.positions)
    }

    /// Same connectivity with new vertex positions. Only finiteness is
    /// re-checked; deformation may legitimately thin faces.
    pub fn with_positions(&self, positions: Vec<Vec3>) -> Result<TriMesh, MeshError> {
        if positions.len() != self.positions.len() {
            return Err(MeshError::PositionCount {
                expected: self.positions.len(),
                got: positions.len(),
            });
        }
        if let Some(i) = positions
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(MeshError::NonFinite(i));
        }
        Ok(TriMesh {
            positions,
            faces: self.faces.clone(),
            point_data: self.point_data.clone(),
        })
    }

    pub(crate) fn positions_mut(&mut self) -> &mut [Vec3] {
        &mut self.positions
    }

    /// Total surface area.
    pub fn area(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                triangle_area(&a, &b, &c)
            })
            .sum()
    }

    /// Shortest edge length over all faces.
    pub fn min_edge_length(&self) -> f64 {
        let mut best = f64::INFINITY;
        for f in &self.faces {
            for k in 0..3 {
                let a = self.positions[f[k] as usize];
                let b = self.positions[f[(k + 1) % 3] as usize];
                best = best.min((a - b).norm());
            }
        }
        best
    }
}

/// Sorted set of distinct vertex indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct VertexIndexSet(Vec<u32>);

impl VertexIndexSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn from_unsorted(mut indices: Vec<u32>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self(indices)
    }

    /// Wraps an already strictly increasing sequence.
    pub(crate) fn from_sorted(indices: Vec<u32>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self(indices)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: u32) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn is_subset(&self, other: &VertexIndexSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }
}

impl FromIterator<u32> for VertexIndexSet {
    fn from_iter<T: IntoIterator<Item = u32>>(iter: T) -> Self {
        Self::from_unsorted(iter.into_iter().collect())
    }
}

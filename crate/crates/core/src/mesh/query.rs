use crate::geom::Aabb;
use crate::sdf::StentField;

use super::kdtree::DEFAULT_LEAF_SIZE;
use super::{KdTree, TriMesh, VertexIndexSet};

/// Vertices inside `cull` whose field value at radius `r` is below `d_con`.
///
/// `cull` must bound every point with field value below `d_con`
/// (see [`StentField::aabb`]); it only skips work, never changes the result.
pub fn vertices_near_field(mesh: &TriMesh, field: &StentField, r: f64, d_con: f64, cull: &Aabb) -> VertexIndexSet {
    let hits = mesh
        .positions()
        .iter()
        .enumerate()
        .filter(|(_, p)| cull.contains(p) && field.eval(p, r) < d_con)
        .map(|(i, _)| i as u32)
        .collect();
    VertexIndexSet::from_sorted(hits)
}

/// All vertices strictly closer than `d_infl` to at least one seed
/// (seeds included).
pub fn vertices_within(mesh: &TriMesh, seeds: &VertexIndexSet, d_infl: f64) -> VertexIndexSet {
    vertices_within_with_leaf_size(mesh, seeds, d_infl, DEFAULT_LEAF_SIZE)
}

/// [`vertices_within`] with an explicit kd-tree bucket size.
pub fn vertices_within_with_leaf_size(
    mesh: &TriMesh,
    seeds: &VertexIndexSet,
    d_infl: f64,
    leaf_size: usize,
) -> VertexIndexSet {
    if seeds.is_empty() {
        return VertexIndexSet::new();
    }
    let pos = mesh.positions();
    let tree = KdTree::with_leaf_size(
        seeds.iter().map(|i| pos[i as usize]).collect(),
        seeds.as_slice().to_vec(),
        leaf_size,
    );
    // nothing outside the seeds' box grown by d_infl can qualify
    let reach = Aabb::from_points(seeds.iter().map(|i| &pos[i as usize])).inflated(d_infl);
    let hits = pos
        .iter()
        .enumerate()
        .filter(|(_, p)| reach.contains(p) && tree.nearest_within(p, d_infl).is_some())
        .map(|(i, _)| i as u32)
        .collect();
    VertexIndexSet::from_sorted(hits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geom::Vec3;

    #[test]
    fn single_seed_small_radius() {
        let m = fixtures::icosphere(2, 1.0);
        let seeds = VertexIndexSet::from_unsorted(vec![5]);
        let got = vertices_within(&m, &seeds, 0.5 * m.min_edge_length());
        assert_eq!(got.as_slice(), &[5]);
    }

    #[test]
    fn huge_radius_takes_everything() {
        let m = fixtures::icosphere(1, 1.0);
        let seeds = VertexIndexSet::from_unsorted(vec![0]);
        let got = vertices_within(&m, &seeds, 10.0);
        assert_eq!(got.len(), m.vertex_count());
    }

    #[test]
    fn near_field_empty_cases() {
        let m = fixtures::icosphere(2, 5.0);
        let f = StentField::from_polyline(&[Vec3::new(0., 0., -1.), Vec3::new(0., 0., 1.)], 0.4, 1.0).unwrap();
        // every vertex is ~4 mm outside the capsule
        let cull = f.aabb(1.0, 10.0);
        assert!(vertices_near_field(&m, &f, 1.0, 0.0, &cull).is_empty());
        let far = Aabb::new(Vec3::repeat(100.0), Vec3::repeat(101.0));
        assert!(vertices_near_field(&m, &f, 4.9, 1.0, &far).is_empty());
        assert!(!vertices_near_field(&m, &f, 4.9, 1.0, &cull).is_empty());
    }
}

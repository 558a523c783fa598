//! Vessel centerline trees and construction of the stent axis.
//!
//! Arc lengths grow from the inlet (root) toward the outlets, so larger arc
//! positions and deeper branches are distal. An [`AxisSelection`] runs from
//! its distal `start` to its proximal `end`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;

pub type PathId = u32;

/// Distance under which a child's first point counts as lying on its parent.
pub const ATTACH_TOLERANCE: f64 = 1e-3;

/// Default capsule length when no radius-aware choice is made.
pub const DEFAULT_SEGMENT_LENGTH: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CenterlineError {
    #[error("path {0} needs at least two points")]
    TooFewPoints(PathId),
    #[error("path {0}: points and radii differ in length")]
    RadiusCount(PathId),
    #[error("path {id}: consecutive points {index} and {next} coincide", next = index + 1)]
    RepeatedPoint { id: PathId, index: usize },
    #[error("path {id}: radius at point {index} must be positive")]
    NonPositiveRadius { id: PathId, index: usize },
    #[error("path {0}: non-finite coordinate")]
    NonFinite(PathId),
    #[error("duplicate path id {0}")]
    DuplicateId(PathId),
    #[error("path {id} attaches ambiguously to paths {candidates:?}")]
    AmbiguousAttachment { id: PathId, candidates: Vec<PathId> },
    #[error("path {0} is not connected to the root path")]
    Orphan(PathId),
    #[error("ancestry of path {0} forms a cycle")]
    Cycle(PathId),
    #[error("no path with id {0}")]
    UnknownPath(PathId),
    #[error("arc length {arc} is outside path {path} (length {length})")]
    ArcOutOfRange { path: PathId, arc: f64, length: f64 },
    #[error("selection not a simple path: paths {0} and {1} are on unrelated branches")]
    NotSimplePath(PathId, PathId),
    #[error("polyline has zero length")]
    ZeroLength,
    #[error("resampling interval must be positive, got {0}")]
    InvalidInterval(f64),
    #[error("foreshortening fraction must lie in [0, 1), got {0}")]
    InvalidForeshortening(f64),
    #[error("nominal length must be positive, got {0}")]
    InvalidLength(f64),
    #[error("stent needs {needed} mm of centerline from the distal anchor but only {available} mm exist")]
    InsufficientLength { needed: f64, available: f64 },
}

/// One branch run of the centerline with per-point inscribed-sphere radii.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterlinePath {
    id: PathId,
    points: Vec<Vec3>,
    mis_radius: Vec<f64>,
    cumulative: Vec<f64>,
}

impl CenterlinePath {
    pub fn new(id: PathId, points: Vec<Vec3>, mis_radius: Vec<f64>) -> Result<Self, CenterlineError> {
        if points.len() < 2 {
            return Err(CenterlineError::TooFewPoints(id));
        }
        if points.len() != mis_radius.len() {
            return Err(CenterlineError::RadiusCount(id));
        }
        if points
            .iter()
            .any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(CenterlineError::NonFinite(id));
        }
        if let Some(index) = mis_radius.iter().position(|&r| r.is_nan() || r <= 0.0) {
            return Err(CenterlineError::NonPositiveRadius { id, index });
        }
        if let Some(index) = points.windows(2).position(|w| w[0] == w[1]) {
            return Err(CenterlineError::RepeatedPoint { id, index });
        }
        let cumulative = cumulative_lengths(&points);
        Ok(Self {
            id,
            points,
            mis_radius,
            cumulative,
        })
    }

    pub fn id(&self) -> PathId {
        self.id
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn mis_radius(&self) -> &[f64] {
        &self.mis_radius
    }

    pub fn arc_lengths(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn check_arc(&self, arc: f64) -> Result<(), CenterlineError> {
        let length = self.length();
        if !(arc >= -1e-9 && arc <= length + 1e-9) {
            return Err(CenterlineError::ArcOutOfRange {
                path: self.id,
                arc,
                length,
            });
        }
        Ok(())
    }

    pub fn point_at(&self, arc: f64) -> Result<Vec3, CenterlineError> {
        self.check_arc(arc)?;
        Ok(interpolate(&self.points, &self.cumulative, arc))
    }

    /// Polyline from arc `from` to arc `to` (either direction), with the
    /// path vertices strictly between them.
    fn sub_polyline(&self, from: f64, to: f64) -> Vec<Vec3> {
        let mut out = vec![interpolate(&self.points, &self.cumulative, from)];
        if from <= to {
            for (p, &s) in self.points.iter().zip(&self.cumulative) {
                if s > from && s < to {
                    out.push(*p);
                }
            }
        } else {
            for (p, &s) in self.points.iter().zip(&self.cumulative).rev() {
                if s < from && s > to {
                    out.push(*p);
                }
            }
        }
        out.push(interpolate(&self.points, &self.cumulative, to));
        out
    }
}

fn cumulative_lengths(points: &[Vec3]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(points.len());
    out.push(0.0);
    for w in points.windows(2) {
        acc += (w[1] - w[0]).norm();
        out.push(acc);
    }
    out
}

/// Point at arc length `s` on a polyline with cumulative lengths `cum`.
fn interpolate(points: &[Vec3], cum: &[f64], s: f64) -> Vec3 {
    let last = points.len() - 1;
    if s <= 0.0 {
        return points[0];
    }
    if s >= cum[last] {
        return points[last];
    }
    // first index with cum > s
    let hi = cum.partition_point(|&c| c <= s);
    let lo = hi - 1;
    let span = cum[hi] - cum[lo];
    if span <= 0.0 {
        return points[lo];
    }
    let t = (s - cum[lo]) / span;
    points[lo] + (points[hi] - points[lo]) * t
}

pub fn polyline_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Centerline paths organised by ancestry.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterlineTree {
    paths: Vec<CenterlinePath>,
    parent: BTreeMap<PathId, PathId>,
    attach_point: BTreeMap<PathId, usize>,
}

impl CenterlineTree {
    pub fn paths(&self) -> &[CenterlinePath] {
        &self.paths
    }

    pub fn path(&self, id: PathId) -> Result<&CenterlinePath, CenterlineError> {
        self.paths
            .binary_search_by_key(&id, |p| p.id)
            .map(|i| &self.paths[i])
            .map_err(|_| CenterlineError::UnknownPath(id))
    }

    pub fn parent(&self, id: PathId) -> Option<PathId> {
        self.parent.get(&id).copied()
    }

    pub fn parents(&self) -> &BTreeMap<PathId, PathId> {
        &self.parent
    }

    /// Index on the parent path where `id` branches off.
    pub fn attach_point(&self, id: PathId) -> Option<usize> {
        self.attach_point.get(&id).copied()
    }

    pub fn attach_points(&self) -> &BTreeMap<PathId, usize> {
        &self.attach_point
    }

    fn attach_arc(&self, id: PathId) -> f64 {
        let parent = self.parent[&id];
        let idx = self.attach_point[&id];
        self.path(parent).unwrap().cumulative[idx]
    }

    pub fn root(&self) -> PathId {
        self.paths
            .iter()
            .find(|p| !self.parent.contains_key(&p.id))
            .map(|p| p.id)
            .expect("a validated tree has a root")
    }

    /// `id` followed by its ancestors up to the root.
    pub fn lineage(&self, id: PathId) -> Vec<PathId> {
        let mut out = vec![id];
        let mut cur = id;
        while let Some(&p) = self.parent.get(&cur) {
            out.push(p);
            cur = p;
        }
        out
    }

    pub fn position(&self, at: &ArcPosition) -> Result<Vec3, CenterlineError> {
        self.path(at.path)?.point_at(at.arc)
    }
}

/// Organise paths into a tree by matching each path's first point against
/// the points of the others.
///
/// Matches against another path's first point are ignored (siblings start at
/// the same junction). More than one candidate parent is an error, as is a
/// second root: all paths must hang off the root with the smallest id.
pub fn build_ancestry(mut paths: Vec<CenterlinePath>) -> Result<CenterlineTree, CenterlineError> {
    paths.sort_by_key(|p| p.id);
    for w in paths.windows(2) {
        if w[0].id == w[1].id {
            return Err(CenterlineError::DuplicateId(w[0].id));
        }
    }
    let mut parent = BTreeMap::new();
    let mut attach_point = BTreeMap::new();
    for p in &paths {
        let head = p.points[0];
        let mut candidates: Vec<(PathId, usize)> = Vec::new();
        for q in &paths {
            if q.id == p.id {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for (j, pt) in q.points.iter().enumerate().skip(1) {
                let d = (pt - head).norm();
                if d <= ATTACH_TOLERANCE && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            if let Some((j, _)) = best {
                candidates.push((q.id, j));
            }
        }
        match candidates.len() {
            0 => {}
            1 => {
                parent.insert(p.id, candidates[0].0);
                attach_point.insert(p.id, candidates[0].1);
            }
            _ => {
                return Err(CenterlineError::AmbiguousAttachment {
                    id: p.id,
                    candidates: candidates.iter().map(|c| c.0).collect(),
                })
            }
        }
    }
    for p in &paths {
        let mut cur = p.id;
        let mut hops = 0;
        while let Some(&next) = parent.get(&cur) {
            cur = next;
            hops += 1;
            if hops > paths.len() {
                return Err(CenterlineError::Cycle(p.id));
            }
        }
    }
    let mut roots = paths.iter().filter(|p| !parent.contains_key(&p.id));
    // a cycle-free, non-empty forest has at least one root
    if let Some(extra) = roots.nth(1) {
        return Err(CenterlineError::Orphan(extra.id));
    }
    Ok(CenterlineTree {
        paths,
        parent,
        attach_point,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcPosition {
    pub path: PathId,
    pub arc: f64,
}

impl ArcPosition {
    pub fn new(path: PathId, arc: f64) -> Self {
        Self { path, arc }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSelection {
    /// Distal end of the stent.
    pub start: ArcPosition,
    /// Proximal end of the stent.
    pub end: ArcPosition,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    path: PathId,
    from: f64,
    to: f64,
}

impl Piece {
    fn length(&self) -> f64 {
        (self.to - self.from).abs()
    }
}

/// Tree walk between the two ends of a selection, as per-path arc ranges.
fn walk(tree: &CenterlineTree, sel: &AxisSelection) -> Result<Vec<Piece>, CenterlineError> {
    let (s, e) = (sel.start, sel.end);
    tree.path(s.path)?.check_arc(s.arc)?;
    tree.path(e.path)?.check_arc(e.arc)?;
    if s.path == e.path {
        return Ok(vec![Piece {
            path: s.path,
            from: s.arc,
            to: e.arc,
        }]);
    }
    let up = tree.lineage(s.path);
    if let Some(k) = up.iter().position(|&p| p == e.path) {
        // climb from start to its ancestor `end`
        let mut pieces = vec![Piece {
            path: s.path,
            from: s.arc,
            to: 0.0,
        }];
        for i in 1..k {
            pieces.push(Piece {
                path: up[i],
                from: tree.attach_arc(up[i - 1]),
                to: 0.0,
            });
        }
        pieces.push(Piece {
            path: e.path,
            from: tree.attach_arc(up[k - 1]),
            to: e.arc,
        });
        return Ok(pieces);
    }
    let down = tree.lineage(e.path);
    if down.contains(&s.path) {
        let rev = walk(tree, &AxisSelection { start: e, end: s })?;
        return Ok(rev
            .into_iter()
            .rev()
            .map(|p| Piece {
                path: p.path,
                from: p.to,
                to: p.from,
            })
            .collect());
    }
    Err(CenterlineError::NotSimplePath(s.path, e.path))
}

fn pieces_to_polyline(tree: &CenterlineTree, pieces: &[Piece]) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::new();
    for piece in pieces {
        let path = tree.path(piece.path).unwrap();
        for p in path.sub_polyline(piece.from, piece.to) {
            match out.last() {
                Some(last) if (last - p).norm() <= ATTACH_TOLERANCE => {}
                _ => out.push(p),
            }
        }
    }
    if out.len() == 1 {
        out.push(out[0]);
    }
    out
}

/// Contiguous polyline from `sel.start` to `sel.end` along the tree.
pub fn extract_subpath(tree: &CenterlineTree, sel: &AxisSelection) -> Result<Vec<Vec3>, CenterlineError> {
    let pieces = walk(tree, sel)?;
    Ok(pieces_to_polyline(tree, &pieces))
}

/// Walk length between the selection ends.
pub fn selection_length(tree: &CenterlineTree, sel: &AxisSelection) -> Result<f64, CenterlineError> {
    Ok(walk(tree, sel)?.iter().map(Piece::length).sum())
}

/// Uniform arc-length resampling into `round(L / interval)` segments
/// (at least one). Both endpoints are kept bit-exact.
pub fn resample_polyline(points: &[Vec3], interval: f64) -> Result<(Vec<Vec3>, f64), CenterlineError> {
    if !(interval > 0.0 && interval.is_finite()) {
        return Err(CenterlineError::InvalidInterval(interval));
    }
    if points.len() < 2 {
        return Err(CenterlineError::ZeroLength);
    }
    let cum = cumulative_lengths(points);
    let total = *cum.last().unwrap();
    if total.is_nan() || total <= 0.0 {
        return Err(CenterlineError::ZeroLength);
    }
    let n = ((total / interval).round() as usize).max(1);
    let spacing = total / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    out.push(points[0]);
    for i in 1..n {
        out.push(interpolate(points, &cum, spacing * i as f64));
    }
    out.push(*points.last().unwrap());
    Ok((out, spacing))
}

/// Resampled stent axis, distal point first.
#[derive(Debug, Clone, PartialEq)]
pub struct StentAxis {
    pub points: Vec<Vec3>,
    pub segment_length: f64,
    pub source: Option<AxisSelection>,
}

impl StentAxis {
    pub fn length(&self) -> f64 {
        polyline_length(&self.points)
    }

    /// Turning angle at each interior joint, in degrees.
    pub fn joint_angles(&self) -> Vec<f64> {
        self.points
            .windows(3)
            .map(|w| {
                let u = (w[1] - w[0]).normalize();
                let v = (w[2] - w[1]).normalize();
                u.dot(&v).clamp(-1.0, 1.0).acos().to_degrees()
            })
            .collect()
    }
}

pub fn resample_arclength(points: &[Vec3], requested_interval: f64) -> Result<StentAxis, CenterlineError> {
    let (pts, spacing) = resample_polyline(points, requested_interval)?;
    Ok(StentAxis {
        points: pts,
        segment_length: spacing,
        source: None,
    })
}

/// Extract and resample the axis for a selection.
pub fn build_stent_axis(
    tree: &CenterlineTree,
    sel: &AxisSelection,
    interval: f64,
) -> Result<StentAxis, CenterlineError> {
    let poly = extract_subpath(tree, sel)?;
    let mut axis = resample_arclength(&poly, interval)?;
    axis.source = Some(*sel);
    Ok(axis)
}

/// Walk from the selection's start through its end, continued to the end
/// of the tree in the same sense: distally to the outlet of the last path,
/// or proximally back to the root inlet.
fn extended_walk(tree: &CenterlineTree, sel: &AxisSelection) -> Result<Vec<Piece>, CenterlineError> {
    let mut pieces = walk(tree, sel)?;
    let last = *pieces.last().unwrap();
    let path = tree.path(last.path)?;
    let distal = last.to > last.from;
    let tail = pieces.last_mut().unwrap();
    if distal {
        tail.to = path.length();
        return Ok(pieces);
    }
    tail.to = 0.0;
    let mut cur = last.path;
    while let Some(p) = tree.parent(cur) {
        pieces.push(Piece {
            path: p,
            from: tree.attach_arc(cur),
            to: 0.0,
        });
        cur = p;
    }
    Ok(pieces)
}

/// Shorten (or lengthen) a selection to `nominal_length * (1 - pct)`,
/// keeping the distal start fixed and moving the end along the walk.
pub fn apply_foreshortening(
    tree: &CenterlineTree,
    sel: &AxisSelection,
    nominal_length: f64,
    pct: f64,
) -> Result<AxisSelection, CenterlineError> {
    if !(0.0..1.0).contains(&pct) {
        return Err(CenterlineError::InvalidForeshortening(pct));
    }
    if !(nominal_length > 0.0 && nominal_length.is_finite()) {
        return Err(CenterlineError::InvalidLength(nominal_length));
    }
    let needed = nominal_length * (1.0 - pct);
    let pieces = extended_walk(tree, sel)?;
    let available: f64 = pieces.iter().map(Piece::length).sum();
    if needed > available + 1e-9 {
        return Err(CenterlineError::InsufficientLength { needed, available });
    }
    let mut remaining = needed;
    for (i, piece) in pieces.iter().enumerate() {
        let len = piece.length();
        if remaining <= len || i == pieces.len() - 1 {
            let step = remaining.min(len);
            let arc = if piece.to >= piece.from {
                piece.from + step
            } else {
                piece.from - step
            };
            return Ok(AxisSelection {
                start: sel.start,
                end: ArcPosition::new(piece.path, arc),
            });
        }
        remaining -= len;
    }
    unreachable!("walk has at least one piece")
}

//! Stent deployment: grow the stent radius step by step and push the
//! vessel wall out of the way.
//!
//! Each step finds the contact vertices (field value below `d_con`), the
//! vertices within `d_infl` of any contact vertex, and moves the latter
//! along the field gradient by a fall-off weighted step, tapered by the
//! distance to the nearest contact vertex. Displacements are computed
//! against a frozen copy of the positions and applied together.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::centerline::StentAxis;
use crate::geom::{Aabb, Vec3};
use crate::mesh::{check_validity, KdTree, MeshError, TriMesh, ValidityReport, VertexIndexSet};
use crate::sdf::{auto_segment_length, SdfError, StentField, GRADIENT_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeploymentParams {
    pub r_init: f64,
    /// Prescribed (nominal) stent radius.
    pub r_target: f64,
    pub dr: f64,
    pub d_con: f64,
    pub d_infl: f64,
    pub k: f64,
    /// Evaluate at `r - k/4` so the welded surface meets the prescribed radius.
    pub radius_correction: bool,
    /// Capsule length for axis resampling; `None` picks it from `k` and the radius.
    pub segment_length: Option<f64>,
}

impl DeploymentParams {
    pub const DEFAULT_R_INIT: f64 = 0.1;
    pub const DEFAULT_DR: f64 = 0.1;
    pub const DEFAULT_D_CON: f64 = 0.001;
    pub const DEFAULT_D_INFL: f64 = 6.5;
    pub const DEFAULT_K: f64 = 0.4;

    pub fn new(r_target: f64) -> Self {
        Self {
            r_init: Self::DEFAULT_R_INIT,
            r_target,
            dr: Self::DEFAULT_DR,
            d_con: Self::DEFAULT_D_CON,
            d_infl: Self::DEFAULT_D_INFL,
            k: Self::DEFAULT_K,
            radius_correction: true,
            segment_length: None,
        }
    }

    pub fn from_diameter(diameter: f64) -> Self {
        Self::new(diameter / 2.0)
    }

    /// Radius the field is evaluated at for a given prescribed radius.
    pub fn effective_radius(&self, nominal: f64) -> f64 {
        if self.radius_correction {
            (nominal - 0.25 * self.k).max(0.0)
        } else {
            nominal
        }
    }

    /// Prescribed radius that corresponds to an evaluation radius.
    pub fn nominal_radius(&self, effective: f64) -> f64 {
        if self.radius_correction {
            effective + 0.25 * self.k
        } else {
            effective
        }
    }

    pub fn segment_length(&self) -> f64 {
        self.segment_length
            .unwrap_or_else(|| auto_segment_length(self.k, self.effective_radius(self.r_target)))
    }

    pub fn validate(&self) -> Result<(), DeploymentError> {
        let bad = |msg: String| Err(DeploymentError::InvalidParams(msg));
        let all = [self.r_init, self.r_target, self.dr, self.d_con, self.d_infl, self.k];
        if all.iter().any(|x| !x.is_finite()) {
            return bad("parameters must be finite".into());
        }
        if self.r_init < 0.0 {
            return bad(format!("r_init must be >= 0, got {}", self.r_init));
        }
        if self.r_target <= 0.0 {
            return bad(format!("target radius must be > 0, got {}", self.r_target));
        }
        if self.dr <= 0.0 {
            return bad(format!("dr must be > 0, got {}", self.dr));
        }
        if self.d_con <= 0.0 {
            return bad(format!("d_con must be > 0, got {}", self.d_con));
        }
        if self.d_infl <= 0.0 {
            return bad(format!("d_infl must be > 0, got {}", self.d_infl));
        }
        if self.k < 0.0 {
            return bad(format!("k must be >= 0, got {}", self.k));
        }
        if let Some(s) = self.segment_length {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("segment length must be > 0, got {s}"));
            }
        }
        let eff = self.effective_radius(self.r_target);
        if eff <= self.r_init {
            return bad(format!(
                "effective target radius {eff} must exceed r_init {}",
                self.r_init
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DeploymentError {
    #[error("invalid deployment parameters: {0}")]
    InvalidParams(String),
    #[error("stent axis point {index} lies outside the mesh bounding box")]
    AxisOutsideMesh { index: usize },
    #[error(transparent)]
    Sdf(#[from] SdfError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub index: usize,
    /// Evaluation radius the wall was pushed to by this step.
    pub radius: f64,
    pub contact_count: usize,
    pub influence_count: usize,
    pub max_displacement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeploymentReport {
    pub steps: Vec<StepRecord>,
    pub moved_vertex_count: usize,
    pub wall_time_ms: f64,
    pub validity: ValidityReport,
    pub warnings: Vec<String>,
    pub final_radius: f64,
    pub segment_length: f64,
}

/// `(1 - (d / d_infl)^2)^2` on `[0, d_infl]`, zero beyond. Negative `d`
/// counts as zero.
pub fn fall_off(d: f64, d_infl: f64) -> f64 {
    let d = d.max(0.0);
    if d >= d_infl {
        return 0.0;
    }
    let x = d / d_infl;
    let t = 1.0 - x * x;
    t * t
}

/// Taper per influenced vertex: `1 - dist / d_infl` to the nearest contact
/// vertex, floored at zero. Aligned with `infl`.
pub fn alpha_mask(infl: &VertexIndexSet, contact: &VertexIndexSet, positions: &[Vec3], d_infl: f64) -> Vec<f64> {
    if contact.is_empty() {
        return vec![0.0; infl.len()];
    }
    let tree = KdTree::build(
        contact.iter().map(|i| positions[i as usize]).collect(),
        contact.as_slice().to_vec(),
    );
    infl.iter()
        .map(|w| match tree.nearest_within(&positions[w as usize], d_infl) {
            Some((_, d)) => 1.0 - d / d_infl,
            None => 0.0,
        })
        .collect()
}

/// Outward push for one vertex with field value `phi`. Vertices already
/// inside the stent are ejected onto the next level set.
fn push(field: &StentField, p: &Vec3, phi: f64, r: f64, step: f64, d_infl: f64) -> Vec3 {
    let magnitude = if phi < 0.0 {
        -phi + step * fall_off(0.0, d_infl)
    } else {
        step * fall_off(phi, d_infl)
    };
    if magnitude == 0.0 {
        return Vec3::zeros();
    }
    let dir = match field.eval_with_grad(p, r) {
        Ok((_, g)) if g.norm() > GRADIENT_EPS => g / g.norm(),
        _ => field.fallback_direction(p),
    };
    dir * magnitude
}

/// Gradient-directed, fall-off weighted displacement per influenced vertex,
/// before tapering. Aligned with `infl`.
pub fn base_displacements(
    infl: &VertexIndexSet,
    field: &StentField,
    r: f64,
    dr: f64,
    d_infl: f64,
    positions: &[Vec3],
) -> Vec<Vec3> {
    infl.iter()
        .map(|w| {
            let p = positions[w as usize];
            push(field, &p, field.eval(&p, r), r, dr, d_infl)
        })
        .collect()
}

/// Everything one step computes, before it is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDisplacements {
    pub contact: VertexIndexSet,
    pub influence: VertexIndexSet,
    /// Aligned with `influence`.
    pub displacements: Vec<Vec3>,
}

/// Displacements for one step at evaluation radius `r` with step size
/// `step`. Only `candidates` (sorted, a superset of anything that can be
/// in contact or influence) are examined.
pub fn step_displacements(
    positions: &[Vec3],
    candidates: &[u32],
    field: &StentField,
    r: f64,
    step: f64,
    d_con: f64,
    d_infl: f64,
) -> StepDisplacements {
    let phis: Vec<f64> = candidates
        .iter()
        .map(|&i| field.eval(&positions[i as usize], r))
        .collect();
    let contact: Vec<u32> = candidates
        .iter()
        .zip(&phis)
        .filter(|(_, &phi)| phi < d_con)
        .map(|(&i, _)| i)
        .collect();
    if contact.is_empty() {
        return StepDisplacements {
            contact: VertexIndexSet::new(),
            influence: VertexIndexSet::new(),
            displacements: Vec::new(),
        };
    }
    let tree = KdTree::build(
        contact.iter().map(|&i| positions[i as usize]).collect(),
        contact.clone(),
    );
    // the field is 1-Lipschitz, so nothing at or beyond this level can be
    // within d_infl of a contact vertex
    let reach = d_con + d_infl + 1e-9;
    let mut influence = Vec::new();
    let mut displacements = Vec::new();
    for (&i, &phi) in candidates.iter().zip(&phis) {
        if phi >= reach {
            continue;
        }
        let p = positions[i as usize];
        if let Some((_, d)) = tree.nearest_within(&p, d_infl) {
            let alpha = 1.0 - d / d_infl;
            influence.push(i);
            displacements.push(push(field, &p, phi, r, step, d_infl) * alpha);
        }
    }
    StepDisplacements {
        contact: VertexIndexSet::from_sorted(contact),
        influence: VertexIndexSet::from_sorted(influence),
        displacements,
    }
}

/// Resumable deployment of one stent into one mesh copy.
#[derive(Debug, Clone)]
pub struct Deployment {
    original: TriMesh,
    mesh: TriMesh,
    field: StentField,
    params: DeploymentParams,
    cull: Aabb,
    candidates: Vec<u32>,
    radius: f64,
    steps: Vec<StepRecord>,
    moved: Vec<bool>,
    warnings: Vec<String>,
    elapsed_ms: f64,
    segment_length: f64,
}

impl Deployment {
    pub fn new(mesh: &TriMesh, axis: &StentAxis, params: &DeploymentParams) -> Result<Self, DeploymentError> {
        params.validate()?;
        let bb = mesh.aabb();
        if let Some(index) = axis.points.iter().position(|p| !bb.contains(p)) {
            return Err(DeploymentError::AxisOutsideMesh { index });
        }
        let field = StentField::from_polyline(&axis.points, params.k, params.r_target)?;
        let r_final = params.effective_radius(params.r_target);
        // anything that can ever enter an influence set lies in this box
        let cull = field.aabb(r_final, params.d_infl + params.d_con);
        let candidates = mesh
            .positions()
            .iter()
            .enumerate()
            .filter(|(_, p)| cull.contains(p))
            .map(|(i, _)| i as u32)
            .collect();
        let mut warnings = Vec::new();
        let buried = mesh
            .positions()
            .iter()
            .filter(|p| cull.contains(p) && field.eval(p, params.r_init) < -params.d_con)
            .count();
        if buried > 0 {
            let msg = format!(
                "{buried} vertices lie inside the stent at r_init = {}; the axis may leave the lumen",
                params.r_init
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        Ok(Self {
            original: mesh.clone(),
            mesh: mesh.clone(),
            field,
            params: *params,
            cull,
            candidates,
            radius: params.r_init,
            steps: Vec::new(),
            moved: vec![false; mesh.vertex_count()],
            warnings,
            elapsed_ms: 0.0,
            segment_length: axis.segment_length,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn field(&self) -> &StentField {
        &self.field
    }

    pub fn params(&self) -> &DeploymentParams {
        &self.params
    }

    /// Current evaluation radius.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Current prescribed-equivalent radius.
    pub fn nominal_radius(&self) -> f64 {
        self.params.nominal_radius(self.radius)
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn cull_box(&self) -> &Aabb {
        &self.cull
    }

    /// Vertices that may move at some step, sorted.
    pub fn candidates(&self) -> &[u32] {
        &self.candidates
    }

    /// Undo all steps.
    pub fn reset(&mut self) {
        self.mesh = self.original.clone();
        self.radius = self.params.r_init;
        self.steps.clear();
        self.moved.iter_mut().for_each(|m| *m = false);
        self.elapsed_ms = 0.0;
    }

    /// Next evaluation radius on the `r_init + i * dr` grid, capped at `target`.
    fn next_radius(&self, target: f64) -> f64 {
        let p = &self.params;
        let i = ((self.radius - p.r_init) / p.dr + 1e-9).floor() + 1.0;
        let grid = p.r_init + i * p.dr;
        if grid >= target - 1e-9 {
            target
        } else {
            grid
        }
    }

    /// Compute the displacements for the step from the current radius to
    /// `next`, without applying them.
    pub fn plan_step(&self, next: f64) -> StepDisplacements {
        step_displacements(
            self.mesh.positions(),
            &self.candidates,
            &self.field,
            self.radius,
            next - self.radius,
            self.params.d_con,
            self.params.d_infl,
        )
    }

    /// Run one step toward evaluation radius `target`. Returns the record
    /// and the changed vertices with their new positions.
    pub fn step(&mut self, target: f64) -> Option<(StepRecord, Vec<(u32, Vec3)>)> {
        if self.radius >= target - 1e-12 {
            return None;
        }
        let t0 = Instant::now();
        let next = self.next_radius(target);
        let plan = self.plan_step(next);
        let mut changed = Vec::new();
        let mut max_disp: f64 = 0.0;
        let positions = self.mesh.positions_mut();
        for (i, u) in plan.influence.iter().zip(&plan.displacements) {
            if *u == Vec3::zeros() {
                continue;
            }
            let p = &mut positions[i as usize];
            *p += u;
            max_disp = max_disp.max(u.norm());
            self.moved[i as usize] = true;
            changed.push((i, *p));
        }
        self.radius = next;
        let record = StepRecord {
            index: self.steps.len(),
            radius: next,
            contact_count: plan.contact.len(),
            influence_count: plan.influence.len(),
            max_displacement: max_disp,
        };
        self.steps.push(record);
        self.elapsed_ms += t0.elapsed().as_secs_f64() * 1e3;
        log::debug!(
            "step {} r={:.4} contact={} infl={} max|u|={:.4}",
            record.index,
            record.radius,
            record.contact_count,
            record.influence_count,
            record.max_displacement
        );
        Some((record, changed))
    }

    /// Inflate until the prescribed-equivalent radius reaches `nominal`
    /// (clamped to the deployment's target). Returns the number of steps.
    pub fn advance_to(&mut self, nominal: f64, mut observer: impl FnMut(&StepRecord, &[(u32, Vec3)])) -> usize {
        let target = self.params.effective_radius(nominal.min(self.params.r_target));
        let mut n = 0;
        while let Some((rec, changed)) = self.step(target) {
            observer(&rec, &changed);
            n += 1;
        }
        n
    }

    pub fn report(&self, validity: ValidityReport) -> DeploymentReport {
        DeploymentReport {
            steps: self.steps.clone(),
            moved_vertex_count: self.moved.iter().filter(|&&m| m).count(),
            wall_time_ms: self.elapsed_ms,
            validity,
            warnings: self.warnings.clone(),
            final_radius: self.radius,
            segment_length: self.segment_length,
        }
    }

    pub fn into_mesh(self) -> TriMesh {
        self.mesh
    }
}

/// Called after each step with the record and the moved vertices.
pub type StepObserver<'a> = &'a mut dyn FnMut(&StepRecord, &[(u32, Vec3)]);

/// Deploy one stent along `axis` and return the deformed mesh.
pub fn deploy(
    mesh: &TriMesh,
    axis: &StentAxis,
    params: &DeploymentParams,
    observer: Option<StepObserver>,
) -> Result<(TriMesh, DeploymentReport), DeploymentError> {
    let start = Instant::now();
    let mut session = Deployment::new(mesh, axis, params)?;
    match observer {
        Some(obs) => session.advance_to(params.r_target, |r, c| obs(r, c)),
        None => session.advance_to(params.r_target, |_, _| {}),
    };
    let validity = check_validity(session.mesh());
    let mut report = session.report(validity);
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((session.into_mesh(), report))
}

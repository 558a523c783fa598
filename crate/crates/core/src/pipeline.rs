//! Selection to deployed mesh: foreshortening, axis extraction and
//! resampling, deployment and the stented-region profile. Shared by the
//! single-run, batch and interactive front ends so they agree exactly.

use serde::Serialize;
use thiserror::Error;

use crate::centerline::{
    apply_foreshortening, build_stent_axis, extract_subpath, selection_length, AxisSelection, CenterlineError,
    CenterlineTree, StentAxis,
};
use crate::deform::{deploy, DeploymentError, DeploymentReport, StepRecord};
use crate::geom::Vec3;
use crate::io::ResolvedStent;
use crate::mesh::TriMesh;
use crate::metrics::{full_profile, summarize, DiameterSummary, MetricsError, ProfileSample};

/// Sample spacing of reported profiles, mm.
pub const PROFILE_SPACING: f64 = 0.25;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Centerline(#[from] CenterlineError),
    #[error(transparent)]
    Deployment(#[from] DeploymentError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Selection after foreshortening, the walk polyline and the resampled axis.
#[derive(Debug, Clone)]
pub struct PreparedAxis {
    pub selection: AxisSelection,
    pub polyline: Vec<Vec3>,
    pub axis: StentAxis,
}

/// Apply foreshortening when a length or fraction is given, then extract
/// and resample the axis at the parameters' segment length.
pub fn prepare_axis(tree: &CenterlineTree, stent: &ResolvedStent) -> Result<PreparedAxis, PipelineError> {
    let sel = match (stent.nominal_length, stent.foreshortening) {
        (None, 0.0) => stent.selection,
        (len, f) => {
            let nominal = match len {
                Some(l) => l,
                None => selection_length(tree, &stent.selection)?,
            };
            apply_foreshortening(tree, &stent.selection, nominal, f)?
        }
    };
    let polyline = extract_subpath(tree, &sel)?;
    let axis = build_stent_axis(tree, &sel, stent.params.segment_length())?;
    Ok(PreparedAxis {
        selection: sel,
        polyline,
        axis,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StentOutcome {
    pub stent: ResolvedStent,
    pub selection: AxisSelection,
    #[serde(skip)]
    pub axis: StentAxis,
    pub report: DeploymentReport,
    #[serde(skip)]
    pub profile: Vec<ProfileSample>,
    pub summary: Option<DiameterSummary>,
}

/// Like [`crate::deform::StepObserver`], also given the stent's index.
pub type StentStepObserver<'a> = &'a mut dyn FnMut(usize, &StepRecord, &[(u32, Vec3)]);

/// Deploy each stent in turn, each into the result of the previous one.
pub fn run_stents(
    mesh: &TriMesh,
    tree: &CenterlineTree,
    stents: &[ResolvedStent],
    with_metrics: bool,
    mut observer: Option<StentStepObserver>,
) -> Result<(TriMesh, Vec<StentOutcome>), PipelineError> {
    let mut current = mesh.clone();
    let mut outcomes = Vec::with_capacity(stents.len());
    for (i, stent) in stents.iter().enumerate() {
        let prepared = prepare_axis(tree, stent)?;
        let (out, report) = match observer.as_mut() {
            Some(obs) => {
                let mut f = |r: &StepRecord, c: &[(u32, Vec3)]| obs(i, r, c);
                deploy(&current, &prepared.axis, &stent.params, Some(&mut f))?
            }
            None => deploy(&current, &prepared.axis, &stent.params, None)?,
        };
        current = out;
        let (profile, summary) = if with_metrics {
            let profile = full_profile(&current, &prepared.polyline, PROFILE_SPACING)?;
            let len = prepared.axis.length();
            let summary = summarize(&profile, 0.0, len).ok();
            (profile, summary)
        } else {
            (Vec::new(), None)
        };
        outcomes.push(StentOutcome {
            stent: stent.clone(),
            selection: prepared.selection,
            axis: prepared.axis,
            report,
            profile,
            summary,
        });
    }
    Ok((current, outcomes))
}

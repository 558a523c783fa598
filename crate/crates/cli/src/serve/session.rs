//! One client's interactive deployment, independent of the transport.

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::json;

use vstent_core::centerline::{extract_subpath, polyline_length};
use vstent_core::fixtures;
use vstent_core::io::{centerline_to_polydata, read_centerline, ResolvedStent};
use vstent_core::metrics::{full_profile, summarize};
use vstent_core::pipeline::{prepare_axis, PreparedAxis, PROFILE_SPACING};
use vstent_core::{AxisSelection, CenterlineTree, Deployment, DeploymentParams, TriMesh, Vec3};

use super::protocol::{encode_delta, envelope, parse_request, BadRequest, LoadBody, ParamsBody, Request};
use crate::inputs::{encode_mesh, read_mesh, read_tree, write_file};

/// Fastest rate at which mesh deltas are sent.
pub const MAX_DELTA_RATE_HZ: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Outbound {
    Text(String),
    Binary(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Inbound {
    Text(String),
    Binary,
    Closed,
}

/// Transport seen from the session: blocking and non-blocking receive, and send.
pub trait Link {
    fn recv(&mut self) -> Inbound;
    fn poll(&mut self) -> Option<Inbound>;
    fn send(&mut self, out: Outbound);
}

struct Stent {
    settings: ParamsBody,
    params: DeploymentParams,
}

struct Active {
    prepared: PreparedAxis,
    deployment: Deployment,
}

/// What to do with a message that arrives mid-inflation.
enum Interrupt {
    None,
    Abort,
}

pub struct Session {
    export_dir: PathBuf,
    out_seq: u64,
    last_in_seq: Option<u64>,
    /// Mesh stents are deployed into: the loaded mesh, or the result of
    /// earlier stents once a new one is configured.
    base: Option<TriMesh>,
    tree: Option<CenterlineTree>,
    selection: Option<AxisSelection>,
    stent: Option<Stent>,
    active: Option<Active>,
    delta_interval: Duration,
}

impl Session {
    pub fn new(export_dir: PathBuf) -> Self {
        Self {
            export_dir,
            out_seq: 0,
            last_in_seq: None,
            base: None,
            tree: None,
            selection: None,
            stent: None,
            active: None,
            delta_interval: Duration::from_secs_f64(1.0 / MAX_DELTA_RATE_HZ),
        }
    }

    /// Serve messages until the link closes.
    pub fn run(&mut self, link: &mut impl Link) {
        loop {
            match link.recv() {
                Inbound::Closed => return,
                Inbound::Binary => self.error(link, None, "binary frames are not accepted"),
                Inbound::Text(t) => {
                    if let Interrupt::Abort = self.handle_text(link, &t, false) {
                        return;
                    }
                }
            }
        }
    }

    fn send(&mut self, link: &mut impl Link, kind: &str, re: Option<u64>, body: impl Serialize) {
        self.out_seq += 1;
        link.send(Outbound::Text(envelope(self.out_seq, kind, re, body, false)));
    }

    fn error(&mut self, link: &mut impl Link, re: Option<u64>, msg: &str) {
        log::debug!("error reply: {msg}");
        self.send(link, "error", re, json!({ "message": msg }));
    }

    fn ack(&mut self, link: &mut impl Link, re: u64, body: impl Serialize) {
        self.send(link, "ack", Some(re), body);
    }

    fn send_delta(&mut self, link: &mut impl Link, re: u64, pending: &mut BTreeMap<u32, Vec3>) {
        let changes: Vec<(u32, Vec3)> = std::mem::take(pending).into_iter().collect();
        self.out_seq += 1;
        let head = envelope(
            self.out_seq,
            "mesh_delta",
            Some(re),
            json!({ "count": changes.len() }),
            true,
        );
        link.send(Outbound::Text(head));
        link.send(Outbound::Binary(encode_delta(&changes)));
    }

    /// Parse and dispatch one frame. With `inflating` set, only requests
    /// that make sense mid-inflation are served.
    fn handle_text(&mut self, link: &mut impl Link, text: &str, inflating: bool) -> Interrupt {
        let (seq, req) = match parse_request(text) {
            Ok(r) => r,
            Err(BadRequest { seq, message }) => {
                self.error(link, seq, &message);
                return Interrupt::None;
            }
        };
        if self.last_in_seq.is_some_and(|last| seq <= last) {
            let msg = format!("seq {seq} is not greater than {}", self.last_in_seq.unwrap());
            self.error(link, Some(seq), &msg);
            return Interrupt::None;
        }
        self.last_in_seq = Some(seq);
        let result = match req {
            Request::Reset => {
                self.reset(link, seq);
                return if inflating { Interrupt::Abort } else { Interrupt::None };
            }
            Request::Export(b) => self.export(link, seq, &b.path),
            Request::InflateTo(b) if !inflating => {
                self.inflate(link, seq, b.radius);
                Ok(())
            }
            _ if inflating => Err("inflation in progress".to_string()),
            Request::Load(b) => self.load(link, seq, &b),
            Request::SelectAxis(sel) => self.select_axis(link, seq, sel),
            Request::SetParams(p) => self.set_params(link, seq, p),
            Request::InflateTo(_) => unreachable!("handled above"),
        };
        if let Err(msg) = result {
            self.error(link, Some(seq), &msg);
        }
        Interrupt::None
    }

    fn load(&mut self, link: &mut impl Link, seq: u64, b: &LoadBody) -> Result<(), String> {
        let (mesh, tree, name) = match (&b.fixture, &b.mesh, &b.centerline) {
            (Some(name), None, None) => {
                let f = fixtures::by_name(name).ok_or_else(|| format!("unknown fixture {name:?}"))?;
                // number paths as a centerline file would
                let tree = read_centerline(&centerline_to_polydata(&f.centerline)).map_err(|e| e.to_string())?;
                (f.mesh, tree, name.clone())
            }
            (None, Some(m), Some(c)) => {
                let mesh = read_mesh(m).map_err(|e| format!("{e:#}"))?;
                let tree = read_tree(c).map_err(|e| format!("{e:#}"))?;
                (mesh, tree, m.display().to_string())
            }
            _ => return Err("load needs either fixture or both mesh and centerline".into()),
        };
        log::info!(
            "loaded {name}: {} vertices, {} paths",
            mesh.vertex_count(),
            tree.paths().len()
        );
        let body = mesh_full_body(&mesh, &tree);
        self.base = Some(mesh);
        self.tree = Some(tree);
        self.selection = None;
        self.active = None;
        self.send(link, "mesh_full", Some(seq), body);
        self.ack(link, seq, json!({ "loaded": name }));
        Ok(())
    }

    /// Make the current deployment the new base so the next stent is
    /// deployed into it.
    fn commit(&mut self) {
        if let Some(a) = self.active.take() {
            if !a.deployment.steps().is_empty() {
                self.base = Some(a.deployment.into_mesh());
            }
        }
    }

    fn resolved(&self) -> Option<ResolvedStent> {
        let (sel, st) = (self.selection?, self.stent.as_ref()?);
        Some(ResolvedStent {
            selection: sel,
            diameter: st.settings.diameter,
            nominal_length: st.settings.length,
            foreshortening: st.settings.foreshortening,
            params: st.params,
        })
    }

    fn select_axis(&mut self, link: &mut impl Link, seq: u64, sel: AxisSelection) -> Result<(), String> {
        let tree = self.tree.as_ref().ok_or("load a mesh first")?;
        let polyline = extract_subpath(tree, &sel).map_err(|e| e.to_string())?;
        self.commit();
        self.selection = Some(sel);
        let mut body = json!({
            "length": polyline_length(&polyline),
            "polyline": flat(&polyline),
        });
        if let Some(stent) = self.resolved() {
            let p = prepare_axis(self.tree.as_ref().unwrap(), &stent).map_err(|e| e.to_string())?;
            body["axis"] = json!(flat(&p.axis.points));
            body["segment_length"] = json!(p.axis.segment_length);
        }
        self.ack(link, seq, body);
        Ok(())
    }

    fn set_params(&mut self, link: &mut impl Link, seq: u64, s: ParamsBody) -> Result<(), String> {
        if !(s.diameter.is_finite() && s.diameter > 0.0) {
            return Err(format!("diameter must be > 0, got {}", s.diameter));
        }
        if !(0.0..1.0).contains(&s.foreshortening) {
            return Err(format!("foreshortening must be in [0, 1), got {}", s.foreshortening));
        }
        let mut p = DeploymentParams::from_diameter(s.diameter);
        p.k = s.k.unwrap_or(p.k);
        p.d_infl = s.d_infl.unwrap_or(p.d_infl);
        p.dr = s.dr.unwrap_or(p.dr);
        p.d_con = s.d_con.unwrap_or(p.d_con);
        p.r_init = s.r_init.unwrap_or(p.r_init);
        p.segment_length = s.segment_length;
        p.radius_correction = s.radius_correction.unwrap_or(true);
        p.validate().map_err(|e| e.to_string())?;
        self.commit();
        self.stent = Some(Stent { settings: s, params: p });
        self.ack(link, seq, json!({ "params": p, "segment_length": p.segment_length() }));
        Ok(())
    }

    fn ensure_active(&mut self) -> Result<&mut Active, String> {
        if self.active.is_none() {
            let base = self.base.as_ref().ok_or("load a mesh first")?;
            let stent = self.resolved().ok_or("select an axis and set parameters first")?;
            let prepared = prepare_axis(self.tree.as_ref().unwrap(), &stent).map_err(|e| e.to_string())?;
            let deployment = Deployment::new(base, &prepared.axis, &stent.params).map_err(|e| e.to_string())?;
            self.active = Some(Active { prepared, deployment });
        }
        Ok(self.active.as_mut().unwrap())
    }

    fn inflate(&mut self, link: &mut impl Link, seq: u64, radius: f64) {
        if !radius.is_finite() {
            return self.error(link, Some(seq), "radius must be finite");
        }
        let active = match self.ensure_active() {
            Ok(a) => a,
            Err(e) => return self.error(link, Some(seq), &e),
        };
        let d = &active.deployment;
        let params = *d.params();
        if radius <= d.nominal_radius() + 1e-12 || d.radius() >= params.effective_radius(params.r_target) - 1e-12 {
            let r = d.nominal_radius();
            return self.ack(link, seq, json!({ "radius": r, "steps": 0 }));
        }
        let target_of = |r: f64| params.effective_radius(r.min(params.r_target));
        let mut target = target_of(radius);
        let mut pending: BTreeMap<u32, Vec3> = BTreeMap::new();
        let mut last_flush: Option<Instant> = None;
        let mut steps = 0usize;
        loop {
            while let Some(msg) = link.poll() {
                let text = match msg {
                    Inbound::Text(t) => t,
                    Inbound::Binary => {
                        self.error(link, None, "binary frames are not accepted");
                        continue;
                    }
                    Inbound::Closed => return,
                };
                // retargeting is read here, before anything else sees it
                if let Ok((s, Request::InflateTo(b))) = parse_request(&text) {
                    if self.last_in_seq.is_none_or(|last| s > last) && b.radius.is_finite() {
                        self.last_in_seq = Some(s);
                        target = target_of(b.radius);
                        self.ack(link, s, json!({ "retarget": b.radius }));
                        continue;
                    }
                }
                if let Interrupt::Abort = self.handle_text(link, &text, true) {
                    self.ack(link, seq, json!({ "aborted": true, "steps": steps }));
                    return;
                }
            }
            let active = self.active.as_mut().unwrap();
            let Some((rec, changed)) = active.deployment.step(target) else {
                break;
            };
            steps += 1;
            pending.extend(changed);
            let nominal = params.nominal_radius(rec.radius);
            self.send(
                link,
                "step_info",
                Some(seq),
                json!({ "step": rec, "nominal_radius": nominal }),
            );
            if last_flush.is_none_or(|t| t.elapsed() >= self.delta_interval) {
                self.send_delta(link, seq, &mut pending);
                last_flush = Some(Instant::now());
            }
        }
        if !pending.is_empty() {
            if let Some(t) = last_flush {
                std::thread::sleep(self.delta_interval.saturating_sub(t.elapsed()));
            }
            self.send_delta(link, seq, &mut pending);
        }
        let active = self.active.as_ref().unwrap();
        let mesh = active.deployment.mesh();
        let metrics = match full_profile(mesh, &active.prepared.polyline, PROFILE_SPACING) {
            Ok(profile) => {
                let summary = summarize(&profile, 0.0, active.prepared.axis.length()).ok();
                json!({ "summary": summary, "profile": profile })
            }
            Err(e) => json!({ "error": e.to_string() }),
        };
        let r = active.deployment.nominal_radius();
        self.send(link, "metrics_update", Some(seq), metrics);
        self.ack(link, seq, json!({ "radius": r, "steps": steps }));
    }

    fn reset(&mut self, link: &mut impl Link, seq: u64) {
        match self.active.as_mut() {
            Some(a) => {
                a.deployment.reset();
                let tree = self.tree.as_ref().unwrap();
                let body = mesh_full_body(a.deployment.mesh(), tree);
                self.send(link, "mesh_full", Some(seq), body);
                self.ack(link, seq, json!({ "reset": true }));
            }
            None => self.ack(link, seq, json!({ "reset": false })),
        }
    }

    fn export(&mut self, link: &mut impl Link, seq: u64, path: &Path) -> Result<(), String> {
        let traverses = path
            .components()
            .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir));
        if traverses || path.as_os_str().is_empty() {
            return Err(format!("export path {} must be relative, without ..", path.display()));
        }
        let mesh = match (&self.active, &self.base) {
            (Some(a), _) => a.deployment.mesh(),
            (None, Some(m)) => m,
            (None, None) => return Err("load a mesh first".into()),
        };
        let target = self.export_dir.join(path);
        write_file(&target, &encode_mesh(&target, mesh)).map_err(|e| format!("{e:#}"))?;
        self.ack(link, seq, json!({ "path": target }));
        Ok(())
    }
}

fn flat(points: &[Vec3]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

fn mesh_full_body(mesh: &TriMesh, tree: &CenterlineTree) -> serde_json::Value {
    let faces: Vec<u32> = mesh.faces().iter().flatten().copied().collect();
    let paths: Vec<_> = tree
        .paths()
        .iter()
        .map(|p| {
            json!({
                "id": p.id(),
                "parent": tree.parent(p.id()),
                "points": flat(p.points()),
                "radius": p.mis_radius(),
                "length": p.length(),
            })
        })
        .collect();
    json!({
        "vertices": flat(mesh.positions()),
        "faces": faces,
        "centerline": paths,
    })
}

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

use vstent_core::{ArcPosition, AxisSelection, DeploymentParams};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "vstent",
    version,
    about = "Virtual stent deployment on vessel surface meshes"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deploy one stent and write the deformed mesh.
    Deploy(DeployArgs),
    /// Run every combination of a JSON deployment configuration.
    Batch(BatchArgs),
    /// Inscribed-sphere and equivalent-radius profile of a mesh.
    Metrics(MetricsArgs),
    /// Watertightness and self-intersection check.
    Check(CheckArgs),
    /// Write a synthetic vessel and its centerline.
    Fixture(FixtureArgs),
    /// Interactive session over a websocket.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SelectionArgs {
    /// Centerline path of the distal stent end.
    #[arg(long)]
    pub start_path: u32,
    /// Arc length (mm) of the distal stent end on its path.
    #[arg(long)]
    pub start_arc: f64,
    /// Centerline path of the proximal stent end.
    #[arg(long)]
    pub end_path: u32,
    /// Arc length (mm) of the proximal stent end on its path.
    #[arg(long)]
    pub end_arc: f64,
}

impl SelectionArgs {
    pub fn selection(&self) -> AxisSelection {
        AxisSelection {
            start: ArcPosition::new(self.start_path, self.start_arc),
            end: ArcPosition::new(self.end_path, self.end_arc),
        }
    }
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    /// Smooth-union blend width (mm).
    #[arg(long)]
    pub k: Option<f64>,
    /// Influence radius (mm).
    #[arg(long)]
    pub d_infl: Option<f64>,
    /// Radius increment per step (mm).
    #[arg(long)]
    pub dr: Option<f64>,
    /// Contact threshold (mm).
    #[arg(long)]
    pub d_con: Option<f64>,
    /// Starting radius (mm).
    #[arg(long)]
    pub r_init: Option<f64>,
    /// Capsule length (mm); chosen from k and the radius when omitted.
    #[arg(long)]
    pub segment_length: Option<f64>,
    /// Evaluate at the prescribed radius instead of radius - k/4.
    #[arg(long)]
    pub no_radius_correction: bool,
}

impl ParamArgs {
    pub fn build(&self, diameter: f64) -> CliResult<DeploymentParams> {
        if !(diameter.is_finite() && diameter > 0.0) {
            return Err(CliError::Usage(format!("--diameter must be > 0, got {diameter}")));
        }
        let mut p = DeploymentParams::from_diameter(diameter);
        if let Some(k) = self.k {
            p.k = k;
        }
        if let Some(v) = self.d_infl {
            p.d_infl = v;
        }
        if let Some(v) = self.dr {
            p.dr = v;
        }
        if let Some(v) = self.d_con {
            p.d_con = v;
        }
        if let Some(v) = self.r_init {
            p.r_init = v;
        }
        p.segment_length = self.segment_length;
        p.radius_correction = !self.no_radius_correction;
        p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
pub struct DeployArgs {
    /// Vessel surface (.vtp or .obj).
    #[arg(long)]
    pub mesh: PathBuf,
    /// Centerline polydata (.vtp) with an inscribed-sphere radius array.
    #[arg(long)]
    pub centerline: PathBuf,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Prescribed stent diameter (mm).
    #[arg(long)]
    pub diameter: f64,
    /// Nominal (unexpanded) stent length (mm); defaults to the selection length.
    #[arg(long)]
    pub length: Option<f64>,
    /// Fractional length loss on expansion, in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    pub foreshortening: f64,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Deformed mesh output (.vtp or .obj).
    #[arg(long)]
    pub out: PathBuf,
    /// Profile CSV output.
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// JSON deployment configuration. Relative paths inside it are taken
    /// from its directory.
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Centerline polydata; without a selection the root path is profiled.
    #[arg(long, conflicts_with = "polyline")]
    pub centerline: Option<PathBuf>,
    /// Query polyline as text, one "x y z" point per line.
    #[arg(long)]
    pub polyline: Option<PathBuf>,
    #[arg(long, requires = "centerline")]
    pub start_path: Option<u32>,
    #[arg(long, requires = "centerline")]
    pub start_arc: Option<f64>,
    #[arg(long, requires = "centerline")]
    pub end_path: Option<u32>,
    #[arg(long, requires = "centerline")]
    pub end_arc: Option<f64>,
    /// Sample spacing (mm).
    #[arg(long, default_value_t = 0.25)]
    pub spacing: f64,
    /// Summary region start (arc length, mm).
    #[arg(long)]
    pub from: Option<f64>,
    /// Summary region end (arc length, mm).
    #[arg(long)]
    pub to: Option<f64>,
    /// Profile CSV output; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl MetricsArgs {
    pub fn selection(&self) -> CliResult<Option<AxisSelection>> {
        match (self.start_path, self.start_arc, self.end_path, self.end_arc) {
            (None, None, None, None) => Ok(None),
            (Some(sp), Some(sa), Some(ep), Some(ea)) => Ok(Some(AxisSelection {
                start: ArcPosition::new(sp, sa),
                end: ArcPosition::new(ep, ea),
            })),
            _ => Err(CliError::Usage(
                "--start-path, --start-arc, --end-path and --end-arc go together".into(),
            )),
        }
    }
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// One of the built-in vessels, or open_disk.
    pub name: String,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory of static UI files served at /.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    /// Directory export requests write into.
    #[arg(long, default_value = ".")]
    pub export_dir: PathBuf,
}

use std::fmt;
use std::marker::PhantomData;

use serde::de::value::{MapAccessDeserializer, SeqAccessDeserializer};
use serde::de::{self, Deserializer, IntoDeserializer, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::centerline::AxisSelection;
use crate::deform::DeploymentParams;

pub const CONFIG_SCHEMA: u64 = 1;

pub type AxisSpec = AxisSelection;

/// A single value or a list of values to sweep over.
#[derive(Debug, Clone, PartialEq)]
pub struct OneOrMany<T>(pub Vec<T>);

impl<'de, T: Deserialize<'de>> Deserialize<'de> for OneOrMany<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V<T>(PhantomData<T>);
        impl<'de, T: Deserialize<'de>> Visitor<'de> for V<T> {
            type Value = OneOrMany<T>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a value or a non-empty list of values")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, seq: A) -> Result<Self::Value, A::Error> {
                let v: Vec<T> = Deserialize::deserialize(SeqAccessDeserializer::new(seq))?;
                if v.is_empty() {
                    return Err(de::Error::custom("list must not be empty"));
                }
                Ok(OneOrMany(v))
            }
            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<Self::Value, A::Error> {
                Ok(OneOrMany(vec![T::deserialize(MapAccessDeserializer::new(map))?]))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Ok(OneOrMany(vec![T::deserialize(v.into_deserializer())?]))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(OneOrMany(vec![T::deserialize(v.into_deserializer())?]))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(OneOrMany(vec![T::deserialize(v.into_deserializer())?]))
            }
        }
        d.deserialize_any(V(PhantomData))
    }
}

macro_rules! checked_f64 {
    ($name:ident, $check:expr, $what:expr) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        struct $name(f64);
        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let v = f64::deserialize(d)?;
                let ok: fn(f64) -> bool = $check;
                if v.is_finite() && ok(v) {
                    Ok($name(v))
                } else {
                    Err(de::Error::custom(format!("{v} must be {}", $what)))
                }
            }
        }
    };
}

checked_f64!(Positive, |v| v > 0.0, "> 0");
checked_f64!(NonNegative, |v| v >= 0.0, ">= 0");
checked_f64!(Fraction, |v| (0.0..1.0).contains(&v), "in [0, 1)");

struct Schema;

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u64::deserialize(d)?;
        if v == CONFIG_SCHEMA {
            Ok(Schema)
        } else {
            Err(de::Error::custom(format!(
                "unsupported schema version {v}, expected {CONFIG_SCHEMA}"
            )))
        }
    }
}

struct NonEmpty(String);

impl<'de> Deserialize<'de> for NonEmpty {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s.trim().is_empty() {
            return Err(de::Error::custom("path must not be empty"));
        }
        Ok(NonEmpty(s))
    }
}

fn default_true() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[allow(dead_code)]
    schema: Schema,
    mesh_path: NonEmpty,
    centerline_path: NonEmpty,
    output_path: NonEmpty,
    #[serde(default = "default_true")]
    emit_metrics: bool,
    stents: Vec<RawStent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStent {
    axis: OneOrMany<AxisSelection>,
    target_diameter: OneOrMany<Positive>,
    nominal_length: Option<OneOrMany<Positive>>,
    foreshortening: Option<Fraction>,
    k: Option<NonNegative>,
    d_infl: Option<Positive>,
    dr: Option<Positive>,
    d_con: Option<Positive>,
    r_init: Option<NonNegative>,
    segment_length: Option<Positive>,
    radius_correction: Option<bool>,
}

/// One stent's sweep lists with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StentConfig {
    pub axis: Vec<AxisSelection>,
    pub target_diameter: Vec<f64>,
    /// Empty means "use the selection's own length".
    pub nominal_length: Vec<f64>,
    pub foreshortening: f64,
    /// Shared parameters; `r_target` is set per run from the diameter.
    pub params: DeploymentParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeploymentConfig {
    pub mesh_path: String,
    pub centerline_path: String,
    pub output_path: String,
    pub emit_metrics: bool,
    pub stents: Vec<StentConfig>,
}

/// One concrete stent of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedStent {
    pub selection: AxisSelection,
    pub diameter: f64,
    pub nominal_length: Option<f64>,
    pub foreshortening: f64,
    pub params: DeploymentParams,
}

/// One combination of the sweep, stents deployed in order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub index: usize,
    pub stents: Vec<ResolvedStent>,
}

impl StentConfig {
    fn combinations(&self) -> Vec<ResolvedStent> {
        let lengths: Vec<Option<f64>> = if self.nominal_length.is_empty() {
            vec![None]
        } else {
            self.nominal_length.iter().map(|&l| Some(l)).collect()
        };
        let mut out = Vec::new();
        for sel in &self.axis {
            for &d in &self.target_diameter {
                for &len in &lengths {
                    let mut params = self.params;
                    params.r_target = d / 2.0;
                    out.push(ResolvedStent {
                        selection: *sel,
                        diameter: d,
                        nominal_length: len,
                        foreshortening: self.foreshortening,
                        params,
                    });
                }
            }
        }
        out
    }
}

impl DeploymentConfig {
    /// Cartesian product of every stent's axis, diameter and length lists.
    /// The first stent varies slowest; within a stent the axis varies
    /// slowest and the length fastest.
    pub fn runs(&self) -> Vec<RunSpec> {
        let mut acc: Vec<Vec<ResolvedStent>> = vec![Vec::new()];
        for stent in &self.stents {
            let combos = stent.combinations();
            acc = acc
                .into_iter()
                .flat_map(|prefix| {
                    combos.iter().map(move |c| {
                        let mut v = prefix.clone();
                        v.push(c.clone());
                        v
                    })
                })
                .collect();
        }
        acc.into_iter()
            .enumerate()
            .map(|(index, stents)| RunSpec { index, stents })
            .collect()
    }
}

/// Parse and validate a JSON deployment configuration.
pub fn parse_config(bytes: &[u8]) -> Result<DeploymentConfig, IoError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        IoError::Config {
            path: if path == "." { "(root)".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    if raw.stents.is_empty() {
        return Err(IoError::Config {
            path: "stents".into(),
            message: "at least one stent is required".into(),
        });
    }
    let stents = raw
        .stents
        .into_iter()
        .map(|s| {
            let d = DeploymentParams::new(s.target_diameter.0[0].0 / 2.0);
            StentConfig {
                axis: s.axis.0,
                target_diameter: s.target_diameter.0.iter().map(|v| v.0).collect(),
                nominal_length: s
                    .nominal_length
                    .map_or_else(Vec::new, |l| l.0.iter().map(|v| v.0).collect()),
                foreshortening: s.foreshortening.map_or(0.0, |f| f.0),
                params: DeploymentParams {
                    r_init: s.r_init.map_or(d.r_init, |v| v.0),
                    r_target: d.r_target,
                    dr: s.dr.map_or(d.dr, |v| v.0),
                    d_con: s.d_con.map_or(d.d_con, |v| v.0),
                    d_infl: s.d_infl.map_or(d.d_infl, |v| v.0),
                    k: s.k.map_or(d.k, |v| v.0),
                    radius_correction: s.radius_correction.unwrap_or(true),
                    segment_length: s.segment_length.map(|v| v.0),
                },
            }
        })
        .collect();
    Ok(DeploymentConfig {
        mesh_path: raw.mesh_path.0,
        centerline_path: raw.centerline_path.0,
        output_path: raw.output_path.0,
        emit_metrics: raw.emit_metrics,
        stents,
    })
}

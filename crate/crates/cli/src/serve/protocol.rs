//! Message framing for the interactive session.
//!
//! Every text frame is a JSON envelope `{seq, kind, body}`. Server replies
//! carry `re`, the `seq` of the request they answer. A `mesh_delta`
//! envelope has `binary: true` and is followed by exactly one binary frame:
//! a little-endian `u32` count, then `count` records of `u32` vertex index
//! and three `f32` coordinates.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use vstent_core::{AxisSelection, Vec3};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadBody {
    pub mesh: Option<PathBuf>,
    pub centerline: Option<PathBuf>,
    /// Built-in vessel instead of files.
    pub fixture: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBody {
    pub diameter: f64,
    pub length: Option<f64>,
    #[serde(default)]
    pub foreshortening: f64,
    pub k: Option<f64>,
    pub d_infl: Option<f64>,
    pub dr: Option<f64>,
    pub d_con: Option<f64>,
    pub r_init: Option<f64>,
    pub segment_length: Option<f64>,
    pub radius_correction: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflateBody {
    /// Prescribed (nominal) stent radius, mm.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportBody {
    /// Relative to the server's export directory.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct Empty {}

#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    Load(LoadBody),
    SelectAxis(AxisSelection),
    SetParams(ParamsBody),
    InflateTo(InflateBody),
    Reset,
    Export(ExportBody),
}

/// A frame that could not be understood. `seq` is set when the envelope
/// itself parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct BadRequest {
    pub seq: Option<u64>,
    pub message: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvelope {
    seq: u64,
    kind: String,
    #[serde(default)]
    body: Value,
}

fn body<T: for<'de> Deserialize<'de>>(kind: &str, v: Value) -> Result<T, String> {
    serde_json::from_value(v).map_err(|e| format!("bad {kind} body: {e}"))
}

pub fn parse_request(text: &str) -> Result<(u64, Request), BadRequest> {
    let raw: RawEnvelope = serde_json::from_str(text).map_err(|e| BadRequest {
        seq: None,
        message: format!("malformed envelope: {e}"),
    })?;
    let seq = raw.seq;
    let k = raw.kind.as_str();
    let req = match k {
        "load" => body(k, raw.body).map(Request::Load),
        "select_axis" => body(k, raw.body).map(Request::SelectAxis),
        "set_params" => body(k, raw.body).map(Request::SetParams),
        "inflate_to" => body(k, raw.body).map(Request::InflateTo),
        "reset" => match raw.body {
            Value::Null => Ok(Request::Reset),
            v => body::<Empty>(k, v).map(|_| Request::Reset),
        },
        "export" => body(k, raw.body).map(Request::Export),
        other => Err(format!("unknown kind {other:?}")),
    };
    req.map(|r| (seq, r)).map_err(|message| BadRequest {
        seq: Some(seq),
        message,
    })
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    seq: u64,
    kind: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    re: Option<u64>,
    body: T,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    binary: bool,
}

pub fn envelope<T: Serialize>(seq: u64, kind: &str, re: Option<u64>, body: T, binary: bool) -> String {
    let env = Envelope {
        seq,
        kind,
        re,
        body,
        binary,
    };
    serde_json::to_string(&env).expect("message bodies serialize")
}

pub const DELTA_RECORD_BYTES: usize = 16;

pub fn encode_delta(changes: &[(u32, Vec3)]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + changes.len() * DELTA_RECORD_BYTES);
    out.extend_from_slice(&(changes.len() as u32).to_le_bytes());
    for (i, p) in changes {
        out.extend_from_slice(&i.to_le_bytes());
        for c in p.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
pub fn decode_delta(bytes: &[u8]) -> Option<Vec<(u32, [f32; 3])>> {
    let count = u32::from_le_bytes(bytes.get(..4)?.try_into().ok()?) as usize;
    let rest = &bytes[4..];
    if rest.len() != count * DELTA_RECORD_BYTES {
        return None;
    }
    let word = |r: &[u8], at: usize| -> [u8; 4] { r[at..at + 4].try_into().unwrap() };
    Some(
        rest.chunks_exact(DELTA_RECORD_BYTES)
            .map(|r| {
                (
                    u32::from_le_bytes(word(r, 0)),
                    [
                        f32::from_le_bytes(word(r, 4)),
                        f32::from_le_bytes(word(r, 8)),
                        f32::from_le_bytes(word(r, 12)),
                    ],
                )
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use vstent_core::ArcPosition;

    #[test]
    fn requests_parse() {
        let (seq, r) = parse_request(r#"{"seq":3,"kind":"inflate_to","body":{"radius":2.5}}"#).unwrap();
        assert_eq!((seq, r), (3, Request::InflateTo(InflateBody { radius: 2.5 })));
        let (_, r) = parse_request(
            r#"{"seq":4,"kind":"select_axis","body":{"start":{"path":1,"arc":9},"end":{"path":0,"arc":2.5}}}"#,
        )
        .unwrap();
        assert_eq!(
            r,
            Request::SelectAxis(AxisSelection {
                start: ArcPosition::new(1, 9.0),
                end: ArcPosition::new(0, 2.5)
            })
        );
        assert_eq!(parse_request(r#"{"seq":5,"kind":"reset"}"#).unwrap().1, Request::Reset);
        assert_eq!(
            parse_request(r#"{"seq":5,"kind":"reset","body":{}}"#).unwrap().1,
            Request::Reset
        );
        let (_, r) = parse_request(r#"{"seq":6,"kind":"set_params","body":{"diameter":6}}"#).unwrap();
        let Request::SetParams(p) = r else { panic!() };
        assert_eq!((p.diameter, p.foreshortening, p.k), (6.0, 0.0, None));
    }

    #[test]
    fn bad_frames_report_what_they_can() {
        let e = parse_request("not json").unwrap_err();
        assert_eq!(e.seq, None);
        let e = parse_request(r#"{"seq":7,"kind":"fly"}"#).unwrap_err();
        assert_eq!(e.seq, Some(7));
        assert!(e.message.contains("fly"));
        let e = parse_request(r#"{"seq":8,"kind":"inflate_to","body":{"radius":1,"speed":2}}"#).unwrap_err();
        assert!(e.message.contains("speed"), "{}", e.message);
        assert!(parse_request(r#"{"seq":9,"kind":"reset","extra":1}"#).is_err());
        assert!(parse_request(r#"{"seq":-1,"kind":"reset"}"#).is_err());
    }

    #[test]
    fn envelopes_omit_empty_fields() {
        let s = envelope(1, "ack", None, serde_json::json!({}), false);
        assert_eq!(s, r#"{"seq":1,"kind":"ack","body":{}}"#);
        let s = envelope(2, "mesh_delta", Some(5), serde_json::json!({"count":0}), true);
        assert_eq!(
            s,
            r#"{"seq":2,"kind":"mesh_delta","re":5,"body":{"count":0},"binary":true}"#
        );
    }

    #[test]
    fn delta_layout() {
        let bytes = encode_delta(&[(7, Vec3::new(1.0, -2.5, 0.125)), (1, Vec3::new(0.1, 0.0, 3.0))]);
        assert_eq!(bytes.len(), 4 + 2 * DELTA_RECORD_BYTES);
        assert_eq!(&bytes[..8], &[2, 0, 0, 0, 7, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &1.0f32.to_le_bytes());
        let back = decode_delta(&bytes).unwrap();
        assert_eq!(back, vec![(7, [1.0, -2.5, 0.125]), (1, [0.1f64 as f32, 0.0, 3.0])]);
        assert!(decode_delta(&bytes[..bytes.len() - 1]).is_none());
        assert!(decode_delta(&[1, 0]).is_none());
        assert_eq!(decode_delta(&encode_delta(&[])).unwrap(), vec![]);
    }
}

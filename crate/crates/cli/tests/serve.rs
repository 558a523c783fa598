//! Drives `vstent serve` with a headless websocket client.

mod common;

use std::process::Stdio;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::io::{AsyncBufReadExt, BufReader};
use tokio::net::TcpStream;
use tokio::process::{Child, Command};
use tokio::time::timeout;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use common::{code, deploy_tube, fixture};
use vstent_core::io::{doc_to_mesh, read_polydata};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

const WAIT: Duration = Duration::from_secs(300);

struct Server {
    child: Child,
    url: String,
}

async fn start(export_dir: &std::path::Path) -> Server {
    let mut child = Command::new(env!("CARGO_BIN_EXE_vstent"))
        .args(["serve", "--port", "0", "--export-dir", export_dir.to_str().unwrap()])
        .stdout(Stdio::piped())
        .kill_on_drop(true)
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let line = timeout(WAIT, lines.next_line()).await.unwrap().unwrap().unwrap();
    let addr = line.strip_prefix("listening on http://").expect(&line).to_string();
    Server {
        child,
        url: format!("ws://{addr}/ws"),
    }
}

enum Frame {
    Json(Value),
    Bytes(Vec<u8>),
}

async fn next(ws: &mut Ws) -> Frame {
    loop {
        match timeout(WAIT, ws.next())
            .await
            .expect("reply in time")
            .expect("open")
            .unwrap()
        {
            Message::Text(t) => return Frame::Json(serde_json::from_str(t.as_str()).unwrap()),
            Message::Binary(b) => return Frame::Bytes(b.to_vec()),
            _ => continue,
        }
    }
}

async fn next_json(ws: &mut Ws) -> Value {
    match next(ws).await {
        Frame::Json(v) => v,
        Frame::Bytes(_) => panic!("unexpected binary frame"),
    }
}

async fn send(ws: &mut Ws, seq: u64, kind: &str, body: Value) {
    let text = json!({ "seq": seq, "kind": kind, "body": body }).to_string();
    ws.send(Message::text(text)).await.unwrap();
}

/// Frames up to and including the ack for `seq`.
async fn until_ack(ws: &mut Ws, seq: u64) -> Vec<Frame> {
    let mut out = Vec::new();
    loop {
        let f = next(ws).await;
        let done = matches!(&f, Frame::Json(v) if v["kind"] == "ack" && v["re"] == seq);
        if let Frame::Json(v) = &f {
            assert_ne!(v["kind"], "error", "{v}");
        }
        out.push(f);
        if done {
            return out;
        }
    }
}

/// Independent reading of the binary delta layout.
fn apply_delta(buf: &mut [[f32; 3]], bytes: &[u8]) {
    let le = |at: usize| <[u8; 4]>::try_from(&bytes[at..at + 4]).unwrap();
    let n = u32::from_le_bytes(le(0)) as usize;
    assert_eq!(bytes.len(), 4 + 16 * n);
    for r in 0..n {
        let at = 4 + 16 * r;
        let i = u32::from_le_bytes(le(at)) as usize;
        buf[i] = [
            f32::from_le_bytes(le(at + 4)),
            f32::from_le_bytes(le(at + 8)),
            f32::from_le_bytes(le(at + 12)),
        ];
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn headless_session_matches_deploy() {
    let dir = tempfile::tempdir().unwrap();
    let (mesh, cl) = fixture(dir.path(), "stenotic_tube");
    let reference = dir.path().join("reference.vtp");
    assert_eq!(code(&deploy_tube(&mesh, &cl, &reference, &[])), 0);
    let exports = dir.path().join("exports");
    let mut server = start(&exports).await;
    let (mut ws, _) = connect_async(&server.url).await.unwrap();

    send(&mut ws, 1, "load", json!({ "mesh": mesh, "centerline": cl })).await;
    let frames = until_ack(&mut ws, 1).await;
    let Frame::Json(full) = &frames[0] else { panic!() };
    assert_eq!(full["kind"], "mesh_full");
    let mut buf: Vec<[f32; 3]> = full["body"]["vertices"]
        .as_array()
        .unwrap()
        .chunks(3)
        .map(|c| [0, 1, 2].map(|k| c[k].as_f64().unwrap() as f32))
        .collect();
    assert_eq!(full["body"]["centerline"].as_array().unwrap().len(), 1);

    // only one client at a time
    let (mut other, _) = connect_async(&server.url).await.unwrap();
    let busy = next_json(&mut other).await;
    assert_eq!(busy["kind"], "error");
    assert_eq!(busy["body"]["message"], "session busy");

    send(&mut ws, 2, "set_params", json!({ "diameter": 6 })).await;
    until_ack(&mut ws, 2).await;
    let sel = json!({ "start": { "path": 0, "arc": 40 }, "end": { "path": 0, "arc": 20 } });
    send(&mut ws, 3, "select_axis", sel).await;
    let preview = until_ack(&mut ws, 3).await;
    let Some(Frame::Json(ack)) = preview.last() else {
        panic!()
    };
    assert!((ack["body"]["length"].as_f64().unwrap() - 20.0).abs() < 1e-9);

    let t0 = Instant::now();
    send(&mut ws, 4, "inflate_to", json!({ "radius": 3.0 })).await;
    let frames = until_ack(&mut ws, 4).await;
    let elapsed = t0.elapsed().as_secs_f64();
    let (mut steps, mut deltas, mut metrics) = (0, 0, None);
    let mut expect_binary = false;
    for f in &frames {
        match f {
            Frame::Json(v) => {
                assert!(!expect_binary, "delta header without payload");
                match v["kind"].as_str().unwrap() {
                    "step_info" => steps += 1,
                    "mesh_delta" => {
                        assert_eq!(v["binary"], true);
                        expect_binary = true;
                        deltas += 1;
                    }
                    "metrics_update" => metrics = Some(v.clone()),
                    _ => {}
                }
            }
            Frame::Bytes(b) => {
                assert!(expect_binary);
                expect_binary = false;
                apply_delta(&mut buf, b);
            }
        }
    }
    assert!(steps > 10);
    assert!(
        deltas >= 1 && deltas as f64 <= elapsed * 60.0 + 2.0,
        "{deltas} deltas in {elapsed:.2} s"
    );
    let summary = &metrics.expect("metrics sent")["body"]["summary"];
    assert!(summary["max"].as_f64().unwrap() <= 6.0 + 1e-3);

    send(&mut ws, 5, "inflate_to", json!({ "radius": 2.0 })).await;
    let only = next_json(&mut ws).await;
    assert_eq!((only["kind"].as_str(), only["re"].as_u64()), (Some("ack"), Some(5)));
    assert_eq!(only["body"]["steps"], 0);

    ws.send(Message::text("{oops")).await.unwrap();
    let err = next_json(&mut ws).await;
    assert_eq!(err["kind"], "error");
    assert!(err.get("re").is_none());

    send(&mut ws, 6, "export", json!({ "path": "session.vtp" })).await;
    until_ack(&mut ws, 6).await;
    let exported = std::fs::read(exports.join("session.vtp")).unwrap();
    assert!(
        exported == std::fs::read(&reference).unwrap(),
        "export differs from deploy output"
    );

    let out = doc_to_mesh(&read_polydata(&exported).unwrap()).unwrap();
    let want: Vec<[f32; 3]> = out
        .positions()
        .iter()
        .map(|p| [p.x as f32, p.y as f32, p.z as f32])
        .collect();
    assert!(buf == want, "composed deltas differ from the final mesh");

    // the slot frees once the first client leaves
    ws.close(None).await.unwrap();
    drop(ws);
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        let (mut again, _) = connect_async(&server.url).await.unwrap();
        send(&mut again, 1, "reset", Value::Null).await;
        let v = next_json(&mut again).await;
        if v["kind"] == "ack" {
            break;
        }
        assert_eq!(v["body"]["message"], "session busy");
        assert!(Instant::now() < deadline, "session slot never freed");
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    server.child.kill().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn index_page_is_served() {
    let dir = tempfile::tempdir().unwrap();
    let mut server = start(dir.path()).await;
    let addr = server
        .url
        .trim_start_matches("ws://")
        .trim_end_matches("/ws")
        .to_string();
    let mut s = TcpStream::connect(&addr).await.unwrap();
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    s.write_all(format!("GET / HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").as_bytes())
        .await
        .unwrap();
    let mut resp = String::new();
    timeout(WAIT, s.read_to_string(&mut resp)).await.unwrap().unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains("/ws"));
    server.child.kill().await.unwrap();
}

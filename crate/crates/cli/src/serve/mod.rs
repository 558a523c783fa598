//! Websocket front end. One client at a time; the session itself runs on
//! a worker thread and this layer only moves frames.

pub mod protocol;
pub mod session;

use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};

use anyhow::Context;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, Response};
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::sync::mpsc::{unbounded_channel, UnboundedSender};
use tower_http::services::ServeDir;

use crate::args::ServeArgs;
use crate::error::CliResult;
use session::{Inbound, Link, Outbound, Session};

const INDEX: &str = "<!doctype html><title>vstent</title>\
<p>vstent session server. Connect a websocket client to <code>/ws</code>.</p>";

#[derive(Clone)]
struct AppState {
    busy: Arc<AtomicBool>,
    export_dir: PathBuf,
}

struct ChannelLink {
    rx: mpsc::Receiver<Inbound>,
    tx: UnboundedSender<Outbound>,
}

impl Link for ChannelLink {
    fn recv(&mut self) -> Inbound {
        self.rx.recv().unwrap_or(Inbound::Closed)
    }

    fn poll(&mut self) -> Option<Inbound> {
        match self.rx.try_recv() {
            Ok(m) => Some(m),
            Err(mpsc::TryRecvError::Empty) => None,
            Err(mpsc::TryRecvError::Disconnected) => Some(Inbound::Closed),
        }
    }

    fn send(&mut self, out: Outbound) {
        // a closed socket is noticed on the receive side
        let _ = self.tx.send(out);
    }
}

/// Clears the busy flag however the worker ends.
struct BusyGuard(Arc<AtomicBool>);

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

pub fn serve(a: &ServeArgs) -> CliResult {
    std::fs::create_dir_all(&a.export_dir).with_context(|| format!("creating {}", a.export_dir.display()))?;
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(run(a))
}

async fn run(a: &ServeArgs) -> CliResult {
    let state = AppState {
        busy: Arc::new(AtomicBool::new(false)),
        export_dir: a.export_dir.clone(),
    };
    let mut app = Router::new().route("/ws", get(upgrade));
    app = match &a.ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { Html(INDEX) })),
    };
    let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
        .await
        .with_context(|| format!("binding {}:{}", a.host, a.port))?;
    let addr = listener.local_addr().context("reading bound address")?;
    println!("listening on http://{addr}");
    std::io::stdout().flush().ok();
    axum::serve(listener, app.with_state(state))
        .with_graceful_shutdown(async {
            tokio::signal::ctrl_c().await.ok();
        })
        .await
        .context("serving")?;
    Ok(())
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, state))
}

fn to_message(o: Outbound) -> Message {
    match o {
        Outbound::Text(t) => Message::Text(t.into()),
        Outbound::Binary(b) => Message::Binary(b.into()),
    }
}

async fn client(mut socket: WebSocket, state: AppState) {
    if state.busy.swap(true, Ordering::SeqCst) {
        log::info!("refusing a second client");
        let busy = protocol::envelope(
            1,
            "error",
            None,
            serde_json::json!({ "message": "session busy" }),
            false,
        );
        let _ = socket.send(Message::Text(busy.into())).await;
        let _ = socket.send(Message::Close(None)).await;
        return;
    }
    log::info!("client connected");
    let guard = BusyGuard(state.busy.clone());
    let (in_tx, in_rx) = mpsc::channel();
    let (out_tx, mut out_rx) = unbounded_channel();
    let dir = state.export_dir.clone();
    std::thread::spawn(move || {
        let _guard = guard;
        let mut link = ChannelLink { rx: in_rx, tx: out_tx };
        Session::new(dir).run(&mut link);
        log::info!("session ended");
    });

    let (mut sink, mut stream) = socket.split();
    let writer = tokio::spawn(async move {
        while let Some(o) = out_rx.recv().await {
            if sink.send(to_message(o)).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    while let Some(Ok(m)) = stream.next().await {
        let inbound = match m {
            Message::Text(t) => Inbound::Text(t.to_string()),
            Message::Binary(_) => Inbound::Binary,
            Message::Close(_) => break,
            Message::Ping(_) | Message::Pong(_) => continue,
        };
        if in_tx.send(inbound).is_err() {
            break;
        }
    }
    drop(in_tx);
    let _ = writer.await;
}

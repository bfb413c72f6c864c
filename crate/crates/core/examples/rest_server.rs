//! Serving a loaded hub over HTTP and querying it the way the dashboard does.
//! Binds an ephemeral port, makes a few requests and exits.
//!
//! Run with `cargo run --example rest_server`.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::Path;
use std::sync::Arc;

use openbadge::hub::server::{router, AppState};
use openbadge::hub::{Hub, HubConfig, IngestBatch, ManualClock};
use openbadge::sim::{simulate, BadgeConfig, ConversationScript};

fn get(addr: SocketAddr, path: &str) -> String {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(
        s,
        "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    let status = resp.lines().next().unwrap_or_default().to_string();
    let body = resp
        .split_once("\r\n\r\n")
        .map(|(_, b)| b)
        .unwrap_or_default();
    format!("{status}\n{body}")
}

#[tokio::main]
async fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/three_person_meeting.json");
    let script = ConversationScript::from_json_file(&path).expect("fixture");
    let out = simulate(&script, &vec![BadgeConfig::hardware(); 3]).expect("simulation");

    let dir = tempfile::tempdir().unwrap();
    let hub = Arc::new(Hub::open(HubConfig::with_data_dir(dir.path())).unwrap());
    hub.register(out.registry.clone()).unwrap();
    for b in &out.badges {
        let batch = IngestBatch {
            chunks: b.chunks.clone(),
            scans: b.scans.clone(),
            clock_offset_ms: 0,
        };
        hub.ingest(&batch, None).unwrap();
    }

    // Pin "now" to the end of the meeting so default ranges cover its last 5 minutes.
    let clock = Arc::new(ManualClock::new(script.end_ts()));
    let app = router(AppState { hub, clock });
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let server = tokio::spawn(async move { axum::serve(listener, app).await });

    let range = format!("from={}&to={}", script.start_ts, script.end_ts());
    let paths = [
        "/groups".to_string(),
        format!("/groups/g1/stats?{range}"),
        "/groups/g1/mediator".to_string(),
        format!("/groups/g1/proximity?{range}"),
        "/groups/nope/stats".to_string(),
    ];
    for p in paths {
        let resp = tokio::task::spawn_blocking(move || get(addr, &p))
            .await
            .unwrap();
        println!("{resp}\n");
    }
    server.abort();
}

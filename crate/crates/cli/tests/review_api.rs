mod common;

use std::io::{Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};

use common::*;
use rainforge_cli::server::{bind, serve_with, ReviewService};
use rainforge_core::curation::{curated_pair, Manifest, Status};
use rainforge_core::imaging::{decode_image, load_image};

fn curated(dir: &Path) -> (ReviewService, PathBuf) {
    let cfg = curated_corpus(dir);
    let o = bin()
        .args(["pipeline", "--config", p(&cfg)])
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let manifest = dir.join("out/manifest.jsonl");
    (
        ReviewService::open(&manifest, dir.join("out")).unwrap(),
        manifest,
    )
}

fn post(svc: &ReviewService, id: &str, body: &str) -> rainforge_cli::server::ApiResponse {
    svc.handle("POST", &format!("/api/pairs/{id}/review"), body.as_bytes())
}

#[test]
fn accept_round_trip_and_idempotence() {
    let dir = tempfile::tempdir().unwrap();
    let (svc, manifest) = curated(dir.path());

    let r = post(&svc, "s2_pan", r#"{"decision":"accept","note":"sharp"}"#);
    assert_eq!(r.status, 200);
    let rec = r.json_body();
    assert_eq!(rec["status"], "accepted");
    let revision = rec["revision"].as_u64().unwrap();

    let got = svc.handle("GET", "/api/pairs/s2_pan", b"").json_body();
    assert_eq!(got["status"], "accepted");
    assert_eq!(got["review"]["decision"], "accept");
    assert_eq!(got["review"]["note"], "sharp");

    // same decision again leaves the record alone
    let again = post(&svc, "s2_pan", r#"{"decision":"accept","note":"sharp"}"#);
    assert_eq!(again.status, 200);
    assert_eq!(again.json_body()["revision"].as_u64().unwrap(), revision);

    // persisted: a fresh load sees the decision
    let reloaded = Manifest::load(&manifest).unwrap();
    assert_eq!(reloaded.get("s2_pan").unwrap().status, Status::Accepted);

    let r = post(&svc, "s2_pan", r#"{"decision":"reject"}"#);
    assert_eq!(r.json_body()["status"], "rejected");
    assert_eq!(r.json_body()["revision"].as_u64().unwrap(), revision + 1);
}

#[test]
fn review_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (svc, _) = curated(dir.path());
    assert_eq!(post(&svc, "nope", r#"{"decision":"accept"}"#).status, 404);
    assert_eq!(post(&svc, "s2_pan", r#"{"decision":"maybe"}"#).status, 400);
    assert_eq!(post(&svc, "s2_pan", "not json").status, 400);
    assert_eq!(
        post(&svc, "s3_dark", r#"{"decision":"accept"}"#).status,
        409
    );
    assert_eq!(svc.handle("GET", "/api/pairs/nope", b"").status, 404);
    assert_eq!(
        svc.handle("GET", "/api/pairs/s2_pan/image", b"").status,
        400
    );
    assert_eq!(
        svc.handle("GET", "/api/pairs/s2_pan/image?view=sepia", b"")
            .status,
        400
    );
    assert_eq!(svc.handle("DELETE", "/api/pairs/s2_pan", b"").status, 405);
    assert_eq!(svc.handle("GET", "/api/elsewhere", b"").status, 404);
    assert_eq!(
        svc.handle("GET", "/api/pairs?status=approved", b"").status,
        400
    );
    assert_eq!(svc.handle("GET", "/api/pairs?page=0", b"").status, 400);
}

#[test]
fn listing_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let (svc, _) = curated(dir.path());
    let all = svc.handle("GET", "/api/pairs", b"").json_body();
    assert_eq!(all["total"], 5);
    assert_eq!(all["items"].as_array().unwrap().len(), 5);

    let page = svc
        .handle("GET", "/api/pairs?per_page=2&page=3", b"")
        .json_body();
    assert_eq!(page["items"].as_array().unwrap().len(), 1);
    assert_eq!(page["total"], 5);

    let review = svc
        .handle("GET", "/api/pairs?status=needs_review", b"")
        .json_body();
    assert_eq!(review["total"], 1);
    assert_eq!(review["items"][0]["pair_id"], "s2_pan");

    let stats = svc.handle("GET", "/api/stats", b"").json_body();
    assert_eq!(stats["total"], 5);
    assert_eq!(stats["counts"]["accepted"], 3);
    assert_eq!(stats["counts"]["needs_review"], 1);
    assert_eq!(stats["counts"]["auto_rejected"], 1);
    assert_eq!(stats["counts"]["rejected"], 0);
}

#[test]
fn image_views() {
    let dir = tempfile::tempdir().unwrap();
    let (svc, _) = curated(dir.path());

    let r = svc.handle("GET", "/api/pairs/s1_a/image?view=blend", b"");
    assert_eq!(r.status, 200);
    assert_eq!(r.content_type, "image/png");
    let blend = decode_image(&r.body).unwrap();
    let original = load_image(dir.path().join("rainy/s1_a.png")).unwrap();
    assert!(mean_abs(&blend, &original) < 1.0 / 255.0);

    // diff against the unaligned clean frame versus against the aligned one
    let record = Manifest::load(dir.path().join("out/manifest.jsonl"))
        .unwrap()
        .get("s2_pan")
        .unwrap()
        .clone();
    let root = dir.path().join("out");
    let rainy = decode_image(
        &svc.handle("GET", "/api/pairs/s2_pan/image?view=rainy", b"")
            .body,
    )
    .unwrap();
    let clean = decode_image(
        &svc.handle("GET", "/api/pairs/s2_pan/image?view=clean", b"")
            .body,
    )
    .unwrap();
    let pre = rainy
        .zip_map(&clean, |x, y| ((x - y).abs() * 4.0).min(1.0))
        .unwrap();
    let post = decode_image(
        &svc.handle("GET", "/api/pairs/s2_pan/image?view=diff", b"")
            .body,
    )
    .unwrap();
    let pre_mean = pre.data().iter().sum::<f64>() / pre.data().len() as f64;
    let post_mean = post.data().iter().sum::<f64>() / post.data().len() as f64;
    assert!(post_mean < pre_mean, "{pre_mean} -> {post_mean}");

    let (_, aligned) = curated_pair(&record, &root).unwrap();
    let served = decode_image(
        &svc.handle("GET", "/api/pairs/s2_pan/image?view=aligned", b"")
            .body,
    )
    .unwrap();
    assert!(mean_abs(&served, &aligned) < 1.0 / 255.0);
}

fn http(port: u16, request: &str) -> (u16, String) {
    let mut s = TcpStream::connect(("127.0.0.1", port)).unwrap();
    s.write_all(request.as_bytes()).unwrap();
    let mut text = String::new();
    s.read_to_string(&mut text).unwrap();
    let status = text.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = text
        .split_once("\r\n\r\n")
        .map(|(_, b)| b.to_string())
        .unwrap_or_default();
    (status, body)
}

#[test]
fn over_http() {
    let dir = tempfile::tempdir().unwrap();
    let (svc, _) = curated(dir.path());
    let server = bind("127.0.0.1", 0).unwrap();
    let port = server.server_addr().to_ip().unwrap().port();
    let server = std::sync::Arc::new(server);
    let handle = {
        let server = server.clone();
        std::thread::spawn(move || serve_with(&server, svc))
    };

    let body = r#"{"decision":"accept","note":"ok"}"#;
    let (status, text) = http(
        port,
        &format!(
            "POST /api/pairs/s2_pan/review HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        ),
    );
    assert_eq!(status, 200, "{text}");
    let (status, text) = http(
        port,
        "GET /api/pairs/s2_pan HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n",
    );
    assert_eq!(status, 200);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["status"], "accepted");
    let (status, _) = http(
        port,
        "GET /api/nothing HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n",
    );
    assert_eq!(status, 404);

    server.unblock();
    handle.join().unwrap();
}

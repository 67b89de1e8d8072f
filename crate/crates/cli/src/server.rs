//! Review API over a manifest. [`ReviewService::handle`] is transport-free;
//! [`serve`] binds it to HTTP.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use chrono::Utc;
use rainforge_core::curation::{
    apply_review, render_view, status_counts, Manifest, ReviewError, Status, View,
};
use rainforge_core::imaging::encode_png;
use serde::Deserialize;
use serde_json::json;

const DEFAULT_PER_PAGE: usize = 50;
const MAX_PER_PAGE: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct ApiResponse {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl ApiResponse {
    fn json(status: u16, value: &impl serde::Serialize) -> Self {
        Self {
            status,
            content_type: "application/json",
            body: serde_json::to_vec(value).expect("response values serialize"),
        }
    }

    fn error(status: u16, message: impl std::fmt::Display) -> Self {
        Self::json(status, &json!({ "error": message.to_string() }))
    }

    fn png(body: Vec<u8>) -> Self {
        Self {
            status: 200,
            content_type: "image/png",
            body,
        }
    }

    pub fn json_body(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).expect("json response")
    }
}

#[derive(Debug, Deserialize)]
struct ReviewBody {
    decision: String,
    #[serde(default)]
    note: String,
}

pub struct ReviewService {
    manifest: RwLock<Manifest>,
    root: PathBuf,
}

impl ReviewService {
    pub fn open(manifest: &Path, root: impl Into<PathBuf>) -> rainforge_core::Result<Self> {
        Ok(Self {
            manifest: RwLock::new(Manifest::load(manifest)?),
            root: root.into(),
        })
    }

    /// Routes one request. `target` is the raw request target (path plus
    /// optional query).
    pub fn handle(&self, method: &str, target: &str, body: &[u8]) -> ApiResponse {
        let url = match url::Url::parse("http://localhost").and_then(|base| base.join(target)) {
            Ok(u) => u,
            Err(e) => return ApiResponse::error(400, format!("bad request target: {e}")),
        };
        let query: HashMap<String, String> = url.query_pairs().into_owned().collect();
        let segments: Vec<String> = match url.path_segments() {
            Some(s) => s
                .map(|p| {
                    percent_encoding::percent_decode_str(p)
                        .decode_utf8_lossy()
                        .into_owned()
                })
                .collect(),
            None => Vec::new(),
        };
        let segs: Vec<&str> = segments
            .iter()
            .map(String::as_str)
            .filter(|s| !s.is_empty())
            .collect();
        match (method, segs.as_slice()) {
            ("GET", ["api", "pairs"]) => self.list(&query),
            ("GET", ["api", "pairs", id]) => self.get(id),
            ("GET", ["api", "pairs", id, "image"]) => self.image(id, &query),
            ("POST", ["api", "pairs", id, "review"]) => self.review(id, body),
            ("GET", ["api", "stats"]) => self.stats(),
            (
                _,
                ["api", "pairs"]
                | ["api", "pairs", _]
                | ["api", "pairs", _, "image" | "review"]
                | ["api", "stats"],
            ) => ApiResponse::error(405, format!("{method} not allowed here")),
            _ => ApiResponse::error(404, format!("no route for {}", url.path())),
        }
    }

    fn list(&self, query: &HashMap<String, String>) -> ApiResponse {
        let status = match query.get("status").map(|s| s.parse::<Status>()) {
            None => None,
            Some(Ok(s)) => Some(s),
            Some(Err(e)) => return ApiResponse::error(400, e),
        };
        let number = |key: &str, default: usize| -> Result<usize, ApiResponse> {
            match query.get(key) {
                None => Ok(default),
                Some(v) => v.parse::<usize>().ok().filter(|&n| n >= 1).ok_or_else(|| {
                    ApiResponse::error(400, format!("{key} must be a positive integer"))
                }),
            }
        };
        let (page, per_page) = match (number("page", 1), number("per_page", DEFAULT_PER_PAGE)) {
            (Ok(p), Ok(n)) => (p, n.min(MAX_PER_PAGE)),
            (Err(r), _) | (_, Err(r)) => return r,
        };
        let manifest = self.manifest.read().expect("manifest lock");
        let matching: Vec<_> = manifest
            .records()
            .filter(|r| status.is_none_or(|s| r.status == s))
            .collect();
        let items: Vec<_> = matching
            .iter()
            .skip((page - 1) * per_page)
            .take(per_page)
            .collect();
        ApiResponse::json(
            200,
            &json!({
                "total": matching.len(),
                "page": page,
                "per_page": per_page,
                "items": items,
            }),
        )
    }

    fn get(&self, id: &str) -> ApiResponse {
        match self.manifest.read().expect("manifest lock").get(id) {
            Some(r) => ApiResponse::json(200, r),
            None => ApiResponse::error(404, format!("unknown pair {id}")),
        }
    }

    fn image(&self, id: &str, query: &HashMap<String, String>) -> ApiResponse {
        let view = match query.get("view").map(|v| v.parse::<View>()) {
            Some(Ok(v)) => v,
            Some(Err(e)) => return ApiResponse::error(400, e),
            None => return ApiResponse::error(400, "missing view"),
        };
        let record = match self.manifest.read().expect("manifest lock").get(id) {
            Some(r) => r.clone(),
            None => return ApiResponse::error(404, format!("unknown pair {id}")),
        };
        match render_view(&record, view, &self.root).and_then(|img| encode_png(&img)) {
            Ok(png) => ApiResponse::png(png),
            Err(e) => ApiResponse::error(500, e),
        }
    }

    fn review(&self, id: &str, body: &[u8]) -> ApiResponse {
        let body: ReviewBody = match serde_json::from_slice(body) {
            Ok(b) => b,
            Err(e) => {
                return ApiResponse::error(400, format!("body must be {{decision, note}}: {e}"))
            }
        };
        let mut manifest = self.manifest.write().expect("manifest lock");
        match apply_review(&mut manifest, id, &body.decision, &body.note, Utc::now()) {
            Ok(outcome) => ApiResponse::json(200, outcome.record()),
            Err(ReviewError::NotFound(_)) => ApiResponse::error(404, format!("unknown pair {id}")),
            Err(e @ ReviewError::Invalid(_)) => ApiResponse::error(400, e),
            Err(e @ ReviewError::Conflict(_)) => ApiResponse::error(409, e),
            Err(e @ ReviewError::Storage(_)) => ApiResponse::error(500, e),
        }
    }

    fn stats(&self) -> ApiResponse {
        let manifest = self.manifest.read().expect("manifest lock");
        let counts = status_counts(&manifest);
        ApiResponse::json(200, &json!({ "total": manifest.len(), "counts": counts }))
    }
}

/// Binds the listener; port 0 picks a free port.
pub fn bind(addr: &str, port: u16) -> anyhow::Result<tiny_http::Server> {
    tiny_http::Server::http((addr, port)).map_err(|e| anyhow::anyhow!("binding {addr}:{port}: {e}"))
}

/// Serves until the listener shuts down. Requests run on their own
/// threads; reviews serialize on the manifest's write lock.
pub fn serve_with(server: &tiny_http::Server, service: ReviewService) {
    let service = Arc::new(service);
    for mut request in server.incoming_requests() {
        let service = Arc::clone(&service);
        std::thread::spawn(move || {
            let mut body = Vec::new();
            let response = match request.as_reader().read_to_end(&mut body) {
                Ok(_) => service.handle(request.method().as_str(), request.url(), &body),
                Err(e) => ApiResponse::error(400, e),
            };
            let header = tiny_http::Header::from_bytes("Content-Type", response.content_type)
                .expect("static header");
            let reply = tiny_http::Response::from_data(response.body)
                .with_status_code(response.status)
                .with_header(header);
            if let Err(e) = request.respond(reply) {
                eprintln!("respond: {e}");
            }
        });
    }
}

pub fn serve(service: ReviewService, addr: &str, port: u16) -> anyhow::Result<()> {
    let server = bind(addr, port)?;
    serve_with(&server, service);
    Ok(())
}

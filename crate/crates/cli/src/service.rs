//! HTTP annotation service.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Deserialize;
use seal_core::Annotator;

#[derive(Deserialize)]
struct AnnotateRequest {
    text: String,
}

fn json_error(status: StatusCode, message: impl Into<String>) -> Response {
    let body = serde_json::json!({ "error": message.into() }).to_string();
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn annotate(State(annotator): State<Arc<Annotator>>, body: Bytes) -> Response {
    let request: AnnotateRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return json_error(StatusCode::BAD_REQUEST, format!("invalid request body: {e}")),
    };
    let result = tokio::task::spawn_blocking(move || annotator.annotate(&request.text)).await;
    match result {
        Ok(Ok(r)) => match serde_json::to_vec(&r) {
            Ok(bytes) => (StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
            Err(e) => json_error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        },
        Ok(Err(e)) => json_error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        Err(e) => json_error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn health() -> &'static str {
    "ok"
}

async fn demo() -> Html<&'static str> {
    Html(DEMO_PAGE)
}

async fn not_found() -> Response {
    json_error(StatusCode::NOT_FOUND, "not found")
}

pub fn router(annotator: Arc<Annotator>) -> Router {
    Router::new()
        .route("/annotate", post(annotate))
        .route("/health", get(health))
        .route("/demo", get(demo))
        .fallback(not_found)
        .with_state(annotator)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(annotator: Arc<Annotator>, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind {addr}: {e}"))?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(annotator)).await?;
    Ok(())
}

const DEMO_PAGE: &str = r#"<!doctype html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>Keyphrase annotation</title>
<style>
  body { font-family: sans-serif; max-width: 52rem; margin: 2rem auto; line-height: 1.6; }
  textarea { width: 100%; height: 10rem; font: inherit; }
  #out { white-space: pre-wrap; border: 1px solid #ccc; padding: 1rem; margin-top: 1rem; }
  .Process { background: #9be79b; }
  .Material { background: #ffc27a; }
  .Task { background: #9cc8ff; }
  .legend span { padding: 0 .4rem; margin-right: .5rem; }
</style>
</head>
<body>
<h1>Keyphrase annotation</h1>
<textarea id="text" placeholder="Paste an abstract"></textarea>
<p><button id="go">Annotate</button>
<span class="legend"><span class="Process">Process</span><span class="Material">Material</span><span class="Task">Task</span></span></p>
<div id="out"></div>
<script>
function esc(s) {
  return s.replace(/[&<>"']/g, c => ({"&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;", "'": "&#39;"}[c]));
}
document.getElementById("go").onclick = async () => {
  const out = document.getElementById("out");
  const text = document.getElementById("text").value;
  const res = await fetch("/annotate", {
    method: "POST",
    headers: {"Content-Type": "application/json"},
    body: JSON.stringify({text})
  });
  const body = await res.json();
  if (!res.ok) { out.textContent = body.error; return; }
  const chars = Array.from(body.text);
  let html = "", pos = 0;
  for (const s of body.spans) {
    html += esc(chars.slice(pos, s.start).join(""));
    html += '<mark class="' + s.class + '" title="' + s.class + '">' + esc(chars.slice(s.start, s.end).join("")) + "</mark>";
    pos = s.end;
  }
  out.innerHTML = html + esc(chars.slice(pos).join(""));
};
</script>
</body>
</html>
"#;

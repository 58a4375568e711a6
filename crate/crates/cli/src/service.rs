//! HTTP query service over a loaded index.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use sqnet_core::imageproc::resize::resize;
use sqnet_core::RasterImage;
use sqnet_retrieval::Method;

use crate::pipeline::LoadedIndex;

/// Largest accepted decoded sketch upload.
pub const MAX_UPLOAD_BYTES: usize = 2 * 1024 * 1024;
/// Request body cap; leaves room for base64 expansion of a maximal upload.
pub const MAX_BODY_BYTES: usize = 3 * 1024 * 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct QueryDefaults {
    pub method: String,
    pub gamma: f64,
    pub omega: f64,
    pub top_k: usize,
}

impl Default for QueryDefaults {
    fn default() -> Self {
        Self {
            method: "qnet".into(),
            gamma: 0.5,
            omega: 0.5,
            top_k: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub index_dir: PathBuf,
    /// Where the index's photo paths resolve.
    pub data_root: PathBuf,
    pub defaults: QueryDefaults,
    pub thumbnail_size: u32,
}

pub struct ServiceState {
    pub index: LoadedIndex,
    pub data_root: PathBuf,
    pub defaults: QueryDefaults,
    pub thumbnail_size: u32,
}

impl ServiceState {
    pub fn load(config: &ServiceConfig) -> Result<Self> {
        Ok(Self {
            index: LoadedIndex::load(&config.index_dir)?,
            data_root: config.data_root.clone(),
            defaults: config.defaults.clone(),
            thumbnail_size: config.thumbnail_size,
        })
    }
}

#[derive(Debug, Deserialize)]
pub struct QueryRequest {
    /// Base64 PNG. A `data:` URL prefix is accepted.
    #[serde(alias = "sketch")]
    pub image: String,
    pub method: Option<String>,
    pub topk: Option<usize>,
    pub gamma: Option<f64>,
    pub omega: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    index_size: usize,
    embed_dim: usize,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: msg.into() })).into_response()
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/api/query", post(query))
        .route("/api/items/{id}/thumbnail", get(thumbnail))
        .route("/api/health", get(health))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

async fn health(State(s): State<Arc<ServiceState>>) -> Json<Health> {
    Json(Health {
        status: "ok",
        index_size: s.index.index.len(),
        embed_dim: s.index.index.embed_dim(),
    })
}

/// Decodes the base64 payload, rejecting oversized uploads before decoding
/// the PNG.
pub fn decode_upload(data: &str) -> std::result::Result<RasterImage, (StatusCode, String)> {
    let payload = match data.split_once(";base64,") {
        Some((prefix, rest)) if prefix.starts_with("data:") => rest,
        _ => data,
    };
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(payload.trim())
        .map_err(|e| (StatusCode::BAD_REQUEST, format!("image is not valid base64: {e}")))?;
    if bytes.len() > MAX_UPLOAD_BYTES {
        return Err((
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("upload is {} bytes, limit is {MAX_UPLOAD_BYTES}", bytes.len()),
        ));
    }
    RasterImage::decode_png(&bytes).map_err(|e| (StatusCode::BAD_REQUEST, format!("malformed image: {e}")))
}

async fn query(State(s): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let req: QueryRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid request body: {e}")),
    };
    let image = match decode_upload(&req.image) {
        Ok(img) => img,
        Err((status, msg)) => return error(status, msg),
    };
    let d = &s.defaults;
    let method = match Method::parse(
        req.method.as_deref().unwrap_or(&d.method),
        req.gamma.unwrap_or(d.gamma),
        req.omega.unwrap_or(d.omega),
    ) {
        Ok(m) => m,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let top_k = req.topk.unwrap_or(d.top_k);
    let state = s.clone();
    let joined = tokio::task::spawn_blocking(move || state.index.query(&image, method, top_k)).await;
    match joined {
        Ok(Ok(hits)) => Json(hits).into_response(),
        Ok(Err(e)) => error(StatusCode::BAD_REQUEST, format!("{e:#}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn thumbnail(State(s): State<Arc<ServiceState>>, Path(id): Path<String>) -> Response {
    let Some(item) = id.parse::<u64>().ok().and_then(|id| s.index.index.item(id)) else {
        return error(StatusCode::NOT_FOUND, format!("unknown item {id}"));
    };
    let path = s.data_root.join(&item.image_path);
    let side = s.thumbnail_size;
    let png = tokio::task::spawn_blocking(move || -> Result<Vec<u8>> {
        let img = RasterImage::load(&path)?;
        let scale = f64::from(side) / f64::from(img.width().max(img.height()));
        let w = ((f64::from(img.width()) * scale).round() as u32).max(1);
        let h = ((f64::from(img.height()) * scale).round() as u32).max(1);
        Ok(resize(&img, w, h).encode_png()?)
    })
    .await;
    match png {
        Ok(Ok(bytes)) => ([(header::CONTENT_TYPE, "image/png")], bytes).into_response(),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("{e:#}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

/// Loads the index once and serves until interrupted.
pub fn serve(config: &ServiceConfig) -> Result<()> {
    let state = Arc::new(ServiceState::load(config)?);
    let addr: SocketAddr = format!("{}:{}", config.host, config.port)
        .parse()
        .with_context(|| format!("invalid address {}:{}", config.host, config.port))?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        log::info!("serving {} items on http://{addr}", state.index.index.len());
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

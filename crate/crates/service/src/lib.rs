//! Versioned, read-only JSON API over an immutable [`CitySnapshot`].
//!
//! Every handler reads the shared snapshot; what-if scenarios are computed
//! per request on a blocking worker and never touch shared state.

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bridgerole::pipeline::{bridge_rows, classification_rows, embedding2d_rows, overlay, whatif, CitySnapshot, WhatIfRequest};
use serde_json::json;
use std::net::SocketAddr;
use std::sync::Arc;
use tower_http::cors::CorsLayer;

pub const API_PREFIX: &str = "/api/v1";

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Shared = Arc<CitySnapshot>;

fn error(status: StatusCode, message: impl ToString) -> Response {
    (status, Json(json!({ "error": message.to_string() }))).into_response()
}

async fn bridges(State(s): State<Shared>) -> Response {
    Json(bridge_rows(&s)).into_response()
}

async fn classification(State(s): State<Shared>) -> Response {
    Json(classification_rows(&s)).into_response()
}

async fn embedding2d(State(s): State<Shared>) -> Response {
    Json(embedding2d_rows(&s)).into_response()
}

async fn metrics(State(s): State<Shared>) -> Response {
    Json(s.metrics_document()).into_response()
}

async fn overlay_doc(State(s): State<Shared>) -> Response {
    Json(overlay(&s)).into_response()
}

async fn whatif_handler(State(s): State<Shared>, body: Result<Json<WhatIfRequest>, JsonRejection>) -> Response {
    let request = match body {
        Ok(Json(r)) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    match tokio::task::spawn_blocking(move || whatif(&s, &request)).await {
        Ok(Ok(response)) => Json(response).into_response(),
        Ok(Err(e)) => error(StatusCode::UNPROCESSABLE_ENTITY, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

pub fn router(snapshot: Arc<CitySnapshot>) -> Router {
    let api = Router::new()
        .route("/bridges", get(bridges))
        .route("/classification", get(classification))
        .route("/embedding2d", get(embedding2d))
        .route("/metrics", get(metrics))
        .route("/overlay", get(overlay_doc))
        .route("/whatif", post(whatif_handler));
    Router::new().nest(API_PREFIX, api).layer(CorsLayer::permissive()).with_state(snapshot)
}

/// Binds `addr`, reporting an occupied port as [`ServeError::PortInUse`].
pub async fn bind(addr: SocketAddr) -> Result<tokio::net::TcpListener, ServeError> {
    tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServeError::PortInUse(addr.port()),
        _ => ServeError::Io(e),
    })
}

/// Serves until Ctrl-C.
pub async fn serve(snapshot: Arc<CitySnapshot>, addr: SocketAddr) -> Result<(), ServeError> {
    let listener = bind(addr).await?;
    axum::serve(listener, router(snapshot))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

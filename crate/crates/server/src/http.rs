use std::future::Future;
use std::sync::Arc;

use axum::extract::State;
use axum::http::{header, HeaderName, HeaderValue, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;

use crate::app::{ApiResponse, AppState};

pub const ROUTES: &[&str] = &["/api/search", "/api/export", "/api/autocomplete", "/api/stats", "/api/health"];

impl IntoResponse for ApiResponse {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let mut response = (status, self.body).into_response();
        let headers = response.headers_mut();
        headers.insert(header::CONTENT_TYPE, HeaderValue::from_static(self.content_type));
        for (name, value) in self.headers {
            if let Ok(v) = HeaderValue::from_str(&value) {
                headers.insert(HeaderName::from_static(name), v);
            }
        }
        response
    }
}

async fn dispatch(State(state): State<Arc<AppState>>, uri: Uri) -> Response {
    let path = uri.path().to_string();
    let qs = uri.query().unwrap_or("").to_string();
    // Ranking is CPU-bound; keep it off the async workers.
    match tokio::task::spawn_blocking(move || state.handle(&path, &qs)).await {
        Ok(r) => r.into_response(),
        Err(_) => (StatusCode::INTERNAL_SERVER_ERROR, "handler panicked").into_response(),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let mut app = Router::new();
    for route in ROUTES {
        app = app.route(route, get(dispatch));
    }
    app.fallback(|| async { ApiResponse::not_found() }).with_state(state)
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve_with_shutdown<F>(state: Arc<AppState>, listener: TcpListener, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

/// Serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, listener: TcpListener) -> std::io::Result<()> {
    serve_with_shutdown(state, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}

//! Axum front end for an [`Aggregator`].

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query as UrlQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use crowdpriv_core::protocol::{
    Aggregator, AggregatorApi, ProtocolError, QueryId, Response, SignedQuery,
};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use crate::wire::{status_for, ErrorBody};

pub fn unix_now() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or_default()
}

struct ApiError(ProtocolError);

impl IntoResponse for ApiError {
    fn into_response(self) -> HttpResponse {
        (status_for(&self.0), Json(ErrorBody::from(&self.0))).into_response()
    }
}

impl From<ProtocolError> for ApiError {
    fn from(e: ProtocolError) -> Self {
        ApiError(e)
    }
}

/// Optional virtual clock: `?now=<epoch seconds>`.
#[derive(Debug, Deserialize)]
struct Clock {
    now: Option<i64>,
}

impl Clock {
    fn now(&self) -> i64 {
        self.now.unwrap_or_else(unix_now)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Registered {
    pub query_id: QueryId,
}

type Shared = Arc<Aggregator>;

async fn register_query(
    State(agg): State<Shared>,
    UrlQuery(clock): UrlQuery<Clock>,
    Json(sq): Json<SignedQuery>,
) -> Result<(StatusCode, Json<Registered>), ApiError> {
    let query_id = agg.register_query(&sq, clock.now())?;
    Ok((StatusCode::CREATED, Json(Registered { query_id })))
}

async fn fetch_queries(
    State(agg): State<Shared>,
    UrlQuery(clock): UrlQuery<Clock>,
) -> Result<Json<Vec<SignedQuery>>, ApiError> {
    Ok(Json(agg.fetch_queries(clock.now())?))
}

async fn submit_response(
    State(agg): State<Shared>,
    Json(response): Json<Response>,
) -> Result<StatusCode, ApiError> {
    agg.submit_response(&response)?;
    Ok(StatusCode::ACCEPTED)
}

async fn close_epoch(
    State(agg): State<Shared>,
    Path((query_id, epoch_index)): Path<(String, u64)>,
    UrlQuery(clock): UrlQuery<Clock>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(agg.close_epoch(&QueryId(query_id), epoch_index, clock.now())?))
}

async fn get_aggregate(
    State(agg): State<Shared>,
    Path((query_id, epoch_index)): Path<(String, u64)>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(agg.get_aggregate(&QueryId(query_id), epoch_index)?))
}

pub fn router(aggregator: Arc<Aggregator>) -> Router {
    Router::new()
        .route("/queries", post(register_query).get(fetch_queries))
        .route("/responses", post(submit_response))
        .route("/epochs/{query_id}/{epoch_index}/close", post(close_epoch))
        .route("/aggregates/{query_id}/{epoch_index}", get(get_aggregate))
        .with_state(aggregator)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    aggregator: Arc<Aggregator>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(aggregator))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server running on its own thread and runtime.
pub struct BackgroundServer {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl BackgroundServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(addr: &str, aggregator: Arc<Aggregator>) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()?;
        let listener = runtime.block_on(TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(serve(listener, aggregator, async {
                let _ = stopped.await;
            }))
        });
        Ok(Self {
            addr,
            stop: Some(stop),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

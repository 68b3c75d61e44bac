//! HTTP service over the discovery, editing and comparison core: datasets,
//! background discovery jobs with live event streams, versioned graph
//! editing with saved history, and multi-outcome comparisons.

pub mod api;
pub mod error;
pub mod state;
pub mod store;

use std::sync::Arc;

use tokio::net::TcpListener;

pub use api::router;
pub use error::{ApiError, ErrorBody};
pub use state::{dataset_id, AppState, DatasetInfo, ServiceConfig, DEFAULT_ADDR};
pub use store::{FileStore, HistoryEntry};

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve(listener: TcpListener, state: Arc<AppState>, shutdown: impl std::future::Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

/// Opens the data directory, binds the configured address and serves until
/// interrupted.
pub async fn run(config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::open(config.clone())?;
    let listener = TcpListener::bind(config.addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    serve(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}

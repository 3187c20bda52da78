//! Event ingestion and analysis service.
//!
//! Players POST interaction events; the service keeps them in an append-only
//! per-video log and recomputes series, key frames and thumbnails on every
//! query.

pub mod api;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use tokio::net::TcpListener;
use tower_http::cors::CorsLayer;

pub use api::router;
pub use store::{AppendOutcome, EventStore, Registration, StoreError};

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    pub store_root: PathBuf,
    pub cors: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Opens the store and serves until Ctrl-C. `on_bound` receives the actual
/// listening address (useful with port 0).
pub async fn serve(config: ServeConfig, on_bound: impl FnOnce(SocketAddr)) -> Result<(), ServeError> {
    let store = Arc::new(EventStore::open(&config.store_root)?);
    tracing::info!(
        root = %config.store_root.display(),
        videos = store.video_ids().len(),
        events = store.event_count(),
        "store opened"
    );
    let mut app = router(store);
    if config.cors {
        app = app.layer(CorsLayer::permissive());
    }
    let listener =
        TcpListener::bind(config.addr).await.map_err(|source| ServeError::Bind { addr: config.addr, source })?;
    let bound = listener.local_addr()?;
    tracing::info!(%bound, "listening");
    on_bound(bound);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

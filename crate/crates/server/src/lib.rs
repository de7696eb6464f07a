//! Versioned JSON-over-HTTP facade for a taxonomy workbench store.

mod error;
mod routes;
mod state;

use std::sync::Arc;

pub use error::{ApiError, ErrorBody};
pub use routes::{router, DEFAULT_NEIGHBORS, DEFAULT_PAGE, MAX_PAGE};
pub use state::{AppState, LoadError, TAXONOMY_KEY};

/// Serves until the listener fails or `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

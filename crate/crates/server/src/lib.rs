//! HTTP service around [`relevance_core`] classifiers.
//!
//! Endpoints: `POST /init/`, `POST /getLabels/`, `POST /updateLabels/`,
//! `GET /healthz`, and `POST|GET /stream/` for replayed incoming items.
//! [`replay_stream`] feeds a corpus to a sink at a fixed rate.

mod error;
mod feed;
mod key;
mod queue;
mod registry;
mod replay;
mod routes;
pub mod wire;

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use relevance_core::EmbeddingTable;
use tokio::net::TcpListener;

pub use error::{ApiError, ServerError};
pub use feed::Feed;
pub use key::{decode_component, encode_component, ModelKey};
pub use queue::PendingQueue;
pub use registry::Registry;
pub use replay::{replay_stream, ReplayConfig, ReplayError, ReplayHandle, ReplayStats, Sink};
pub use routes::{router, ApiConfig, AppState};

pub const DEFAULT_FEED_CAPACITY: usize = 10_000;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    pub api: ApiConfig,
    pub feed_capacity: usize,
}

impl ServerConfig {
    pub fn new(listen: SocketAddr, data_dir: impl Into<PathBuf>) -> Self {
        ServerConfig {
            listen,
            data_dir: data_dir.into(),
            api: ApiConfig::default(),
            feed_capacity: DEFAULT_FEED_CAPACITY,
        }
    }
}

impl AppState {
    pub fn new(data_dir: impl Into<PathBuf>, table: Arc<EmbeddingTable>, api: ApiConfig, feed_capacity: usize) -> Self {
        AppState {
            registry: Arc::new(Registry::new(data_dir)),
            table,
            feed: Arc::new(Feed::new(feed_capacity)),
            config: Arc::new(api),
        }
    }
}

/// A bound, not yet running server.
pub struct Server {
    listener: TcpListener,
    state: AppState,
}

impl Server {
    pub async fn bind(config: ServerConfig, table: Arc<EmbeddingTable>) -> Result<Self, ServerError> {
        std::fs::create_dir_all(&config.data_dir)?;
        let listener = TcpListener::bind(config.listen)
            .await
            .map_err(|source| ServerError::Bind {
                addr: config.listen,
                source,
            })?;
        let state = AppState::new(config.data_dir, table, config.api, config.feed_capacity);
        Ok(Server { listener, state })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, ServerError> {
        Ok(self.listener.local_addr()?)
    }

    pub fn state(&self) -> &AppState {
        &self.state
    }

    /// Serves until `shutdown` resolves, then writes every loaded model's
    /// checkpoint.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServerError> {
        let registry = self.state.registry.clone();
        axum::serve(self.listener, router(self.state))
            .with_graceful_shutdown(shutdown)
            .await?;
        let n = registry
            .flush()
            .await
            .map_err(|e| ServerError::Io(std::io::Error::other(e.message)))?;
        log::info!("flushed {n} model checkpoints");
        Ok(())
    }
}

/// Resolves on SIGINT (Ctrl-C) or, on Unix, SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

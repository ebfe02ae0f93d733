//! Review queue, label intake and retraining behind a small HTTP API.
//!
//! State lives in an append-only event log; reopening the log replays it
//! (retraining every model version and checking its hash).

mod error;
mod http;
mod service;
mod source;
mod state;
mod store;

pub use error::ServiceError;
pub use http::{router, TOKEN_HEADER};
pub use service::{
    dossier, Dossier, LabelOutcome, LabelOutcomeKind, LabelRequest, RetrainOutcome, Service,
};
pub use source::{CommunitySource, CorpusSource, EvolutionOptions};
pub use state::{
    Decision, Event, Factor, FalseNegative, Metrics, ModelVersion, ReviewItem, ServiceConfig,
    ServiceState, Status, TruePositive,
};

/// Serve `router` until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, router: axum::Router) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router).await
}

//! Event store, HTTP query service and command-line driver.
//!
//! [`store::EventStore`] keeps georeferenced events in an append-only JSONL
//! log with in-memory indexes and a registry of fitted models.
//! [`api::router`] exposes it over HTTP.

pub mod api;
pub mod config;
pub mod store;

pub use store::{EventFilter, EventStore, FitSpec, JobStatus, ModelKind, StoredModel};

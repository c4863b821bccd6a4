//! HTTP JSON API for the freetext feedback service.
//!
//! Student routes (`GET /questions/{id}`, `POST /questions/{id}/responses`,
//! `GET /assignments/{id}`) are open; everything that reads or writes criteria
//! needs the instructor bearer token.

pub mod config;
pub mod error;
pub mod extract;
pub mod routes;
pub mod state;

pub use config::{Cli, Command, ServiceConfig};
pub use error::ApiError;
pub use routes::router;
pub use state::AppState;

//! HTTP API and command-line front end over a project twin stored on disk.

pub mod api;
pub mod cli;
mod error;

pub use api::{router, AppState};
pub use error::ApiError;

//! Private friend-finder: an 8-bit-per-cell map kept as saved garbled wire
//! values, served over HTTP and WebSocket.

pub mod api;
pub mod engine;

pub use api::{router, AppState, ServiceConfig};

//! Runtime, file formats and command line for interactive scores built on
//! `ntscore-core`.
//!
//! * [`session`]: wall-clock sessions, event ingestion and traces.
//! * [`server`]: the WebSocket control endpoint used by live clients.
//! * [`formats`]: JSON documents, event files and JSON-lines traces.
//! * [`bench`]: the synthetic benchmark.

pub mod bench;
pub mod formats;
pub mod server;
pub mod session;

pub use ntscore_core;

//! Library surface of the command-line interface: configuration parsing,
//! flag-value parsing, and persisted run records. The binary in `main.rs` is
//! a thin dispatcher over these.

pub mod config;
pub mod flags;
pub mod record;

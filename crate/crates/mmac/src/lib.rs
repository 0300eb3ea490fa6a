//! Host side of the mmac engine: a Landlock sandbox for generated code, an
//! OpenAI-compatible client, cassette recording, config and fixture
//! loaders, benchmark harnesses and trace replay.
//!
//! The engine itself lives in `mmac-core`.

pub mod cassette;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod remote;
pub mod replay;
pub mod sandbox;
pub mod store;

pub use error::{Error, Result};

//! Configuration, input handling and block orchestration behind the `link`
//! command.

pub mod app;
pub mod config;
pub mod ingest;
pub mod margins;
pub mod pipeline;
pub mod preprocess;

//! Command-line interface and HTTP service for the bridging dictionary.

pub mod app;
pub mod cli;
pub mod config;
pub mod llm_http;
pub mod server;

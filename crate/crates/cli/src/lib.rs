//! Command implementations and the HTTP service behind the `seal` binary.

pub mod commands;
pub mod config;
pub mod service;

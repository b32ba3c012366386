//! Pipeline CLI and HTTP prediction service.

pub mod api;
pub mod cli;

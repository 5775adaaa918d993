//! Command-line driver and HTTP service.

pub mod cli;
pub mod server;

pub use cli::run;

//! Configuration parsing and artifact emission.

pub mod config;
pub mod output;
pub mod svg;

pub use config::{load_config, ConfigFile, ResolvedConfig};

//! Command-line front end for levlab: TOML run configurations, artifact
//! bundles, campaign ingestion and SVG plots.

pub mod bundle;
pub mod config;
pub mod error;
pub mod ingest;
pub mod plot;
pub mod run;

pub use error::{CliError, Result};

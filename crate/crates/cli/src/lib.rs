//! Command-line front end for `nldisp-core`: scenario configs, run
//! orchestration, CSV/SVG artifacts and the run manifest.

pub mod config;
pub mod manifest;
pub mod output;
pub mod run;
pub mod selfcheck;
pub mod svg;

pub use config::{validate, ScenarioConfig, ValidationErrors};
pub use manifest::{verify_manifest, RunManifest};
pub use run::{run, RunError, RunOptions, Subcommand};

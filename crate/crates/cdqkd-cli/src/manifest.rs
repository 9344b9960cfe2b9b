//! Run manifest: everything needed to reproduce a run byte for byte.
//!
//! The manifest records the tool version, the mode, the master seed and
//! the full effective configuration. Passing a manifest back to
//! `--config` reruns the exact same experiment.

use std::path::Path;

use serde::Serialize;

use crate::config::{ExperimentConfig, Mode};
use crate::CliError;

#[derive(Serialize)]
struct Manifest<'a> {
    run: RunInfo<'a>,
    config: &'a ExperimentConfig,
}

#[derive(Serialize)]
struct RunInfo<'a> {
    tool: &'static str,
    version: &'static str,
    mode: &'a str,
    seed: u64,
    outputs: &'a [String],
}

pub fn write(
    dir: &Path,
    mode: Mode,
    config: &ExperimentConfig,
    outputs: &[String],
) -> Result<(), CliError> {
    let mut effective = config.clone();
    effective.mode = Some(mode);
    let manifest = Manifest {
        run: RunInfo {
            tool: "cdqkd",
            version: env!("CARGO_PKG_VERSION"),
            mode: mode.name(),
            seed: config.monte_carlo.seed,
            outputs,
        },
        config: &effective,
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| CliError::Runtime(format!("manifest serialization: {e}")))?;
    std::fs::write(dir.join("manifest.toml"), text)
        .map_err(|e| CliError::Runtime(format!("writing manifest: {e}")))?;
    Ok(())
}

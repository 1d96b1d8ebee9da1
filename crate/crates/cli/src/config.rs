//! JSON run configs and their merge with command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, Command, FromArgMatches};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::report::{sha256_hex, CliError};

pub const CONFIG_VERSION: u32 = 1;

/// On-disk config. `params` uses the same names as the subcommand flags,
/// with dashes replaced by underscores.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub version: u32,
    #[serde(default)]
    pub experiment: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub params: Map<String, Value>,
}

#[derive(Debug)]
pub struct LoadedConfig {
    pub file: ConfigFile,
    pub sha256: String,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let file: ConfigFile = serde_json::from_slice(&bytes).map_err(|e| CliError::new("config", e.to_string()))?;
    if file.version != CONFIG_VERSION {
        return Err(CliError::new(
            "config",
            format!("unsupported config version {} (expected {CONFIG_VERSION})", file.version),
        ));
    }
    Ok(LoadedConfig {
        file,
        sha256: sha256_hex(&bytes),
    })
}

/// Flag defaults of an argument group, as if no flags were given.
pub fn defaults<P: Args + FromArgMatches>() -> Result<P, CliError> {
    let cmd = P::augment_args(Command::new("cc-lab").no_binary_name(true));
    let m = cmd
        .try_get_matches_from(Vec::<String>::new())
        .map_err(|e| CliError::new("usage", e.to_string()))?;
    P::from_arg_matches(&m).map_err(|e| CliError::new("usage", e.to_string()))
}

/// Overlays config `params` on the flag values; unknown keys are errors.
pub fn merge<P: Serialize + DeserializeOwned>(flags: &P, params: &Map<String, Value>) -> Result<P, CliError> {
    let mut base = serde_json::to_value(flags).map_err(|e| CliError::new("internal", e.to_string()))?;
    let obj = base.as_object_mut().expect("parameter groups serialize to objects");
    for (k, v) in params {
        obj.insert(k.clone(), v.clone());
    }
    serde_json::from_value(base).map_err(|e| CliError::new("config", format!("params: {e}")))
}

//! Run configuration records and output helpers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Fully resolved configuration of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub toolkit_version: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub parameters: BTreeMap<String, Value>,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        RunConfig {
            command: command.to_string(),
            toolkit_version: pqscreen::VERSION.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            scheme: None,
            selector: None,
            model: None,
            k: None,
            repetitions: None,
            seed: None,
            tune_budget: None,
            threshold: None,
            parameters: BTreeMap::new(),
        }
    }

    pub fn param(mut self, name: &str, value: impl Serialize) -> Self {
        self.parameters
            .insert(name.to_string(), serde_json::to_value(value).expect("serializable parameter"));
        self
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("serializable run config")
    }
}

pub fn path_string(p: &Path) -> String {
    p.display().to_string()
}

/// `<path>.run.json`, the run configuration written next to a CSV output.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

pub fn write_sidecar(csv_path: &Path, config: &RunConfig) -> Result<(), CliError> {
    write_json(&sidecar_path(csv_path), config)
}

/// Writes a CSV produced by `fill` and its run-configuration sidecar.
pub fn write_csv(
    path: &Path,
    config: &RunConfig,
    fill: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    fill(&mut buf)?;
    write_text(path, std::str::from_utf8(&buf).expect("utf-8 csv"))?;
    write_sidecar(path, config)
}

pub fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(pqscreen::Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_cohort(path: &Path) -> Result<pqscreen::cohort::Cohort, CliError> {
    Ok(pqscreen::cohort::load_cohort(path, &pqscreen::cohort::ColumnMapping::canonical())?)
}

/// `println!` that treats a closed stdout (e.g. piped into `head`) as success.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}
pub(crate) use say;

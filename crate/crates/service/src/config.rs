use std::path::{Path, PathBuf};

use crate::ServiceError;

/// How a second turn on a busy session is handled.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BusyPolicy {
    /// Wait for the running turn to finish.
    Serialize,
    /// Answer 409 immediately.
    Reject,
}

/// Where dialog turns get their dialog act and slots from.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DialogNlu {
    /// Keyword rules from the data directory.
    Rules,
    /// The loaded tagger, its intents mapped through `intent_map.txt`; rules if no model.
    Model,
}

/// Service settings. File keys: `model`, `host`, `port`, `data_dir`, `seed`, `transcript`,
/// `busy`, `dialog_nlu`. Environment overrides: `SLU_MODEL`, `SLU_PORT`, `SLU_DATA_DIR`,
/// `SLU_SEED`.
#[derive(Clone, Debug, PartialEq)]
pub struct ServiceConfig {
    pub model: Option<PathBuf>,
    pub host: String,
    pub port: u16,
    pub data_dir: PathBuf,
    /// Seed for sessions created without one.
    pub seed: u64,
    /// Append one JSON line per turn to this file.
    pub transcript: Option<PathBuf>,
    pub busy: BusyPolicy,
    pub dialog_nlu: DialogNlu,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            model: None,
            host: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("data"),
            seed: 0,
            transcript: None,
            busy: BusyPolicy::Serialize,
            dialog_nlu: DialogNlu::Rules,
        }
    }
}

fn bad(key: &str, value: &str) -> ServiceError {
    ServiceError::Config(format!("{key}: invalid value {value:?}"))
}

impl ServiceConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ServiceError> {
        let value = value.trim();
        match key {
            "model" => self.model = (!value.is_empty()).then(|| PathBuf::from(value)),
            "host" => self.host = value.to_string(),
            "port" => self.port = value.parse().map_err(|_| bad(key, value))?,
            "data_dir" => self.data_dir = PathBuf::from(value),
            "seed" => self.seed = value.parse().map_err(|_| bad(key, value))?,
            "transcript" => self.transcript = (!value.is_empty()).then(|| PathBuf::from(value)),
            "busy" => {
                self.busy = match value {
                    "serialize" => BusyPolicy::Serialize,
                    "reject" => BusyPolicy::Reject,
                    _ => return Err(bad(key, value)),
                }
            }
            "dialog_nlu" => {
                self.dialog_nlu = match value {
                    "rules" => DialogNlu::Rules,
                    "model" => DialogNlu::Model,
                    _ => return Err(bad(key, value)),
                }
            }
            _ => return Err(ServiceError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ServiceError> {
        let mut cfg = ServiceConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ServiceError::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies `SLU_*` overrides from `vars` (normally `std::env::vars()`).
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ServiceError> {
        for (k, v) in vars {
            let key = match k.as_str() {
                "SLU_MODEL" => "model",
                "SLU_PORT" => "port",
                "SLU_DATA_DIR" => "data_dir",
                "SLU_SEED" => "seed",
                _ => continue,
            };
            self.set(key, &v)?;
        }
        Ok(())
    }
}

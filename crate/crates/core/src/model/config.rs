use std::fmt::Display;
use std::str::FromStr;

use super::ModelError;

/// Architecture hyperparameters; stored in checkpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub char_dim: usize,
    /// Hidden size per direction of the character LSTM.
    pub char_hidden: usize,
    pub attention_dim: usize,
    /// Total window size (odd); the half-width is `(window - 1) / 2`.
    pub attention_window: usize,
    pub heads: usize,
    /// Hidden size per direction of the encoder LSTM.
    pub hidden_dim: usize,
    pub intent_hidden: Vec<usize>,
    pub smoothing_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            word_dim: 64,
            char_dim: 16,
            char_hidden: 16,
            attention_dim: 64,
            attention_window: 5,
            heads: 2,
            hidden_dim: 64,
            intent_hidden: vec![64],
            smoothing_eps: 1e-3,
        }
    }
}

/// Optimisation settings plus the architecture they train.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Epochs without dev improvement before stopping; 0 disables early stopping.
    pub patience: usize,
    pub clip_norm: f64,
    pub min_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 30,
            batch_size: 1,
            seed: 0,
            patience: 0,
            clip_norm: 5.0,
            min_count: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ModelError>
where
    T::Err: Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| ModelError::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn positive(key: &str, value: &str) -> Result<usize, ModelError> {
    let v: usize = parse(key, value)?;
    if v == 0 {
        return Err(ModelError::Config(format!("{key} must be positive")));
    }
    Ok(v)
}

fn list(key: &str, value: &str) -> Result<Vec<usize>, ModelError> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| positive(key, v)).collect()
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>, ModelError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ModelError::Config(format!("line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl ModelConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ModelError> {
        match key {
            "word_dim" => self.word_dim = positive(key, value)?,
            "char_dim" => self.char_dim = positive(key, value)?,
            "char_hidden" => self.char_hidden = positive(key, value)?,
            "attention_dim" => self.attention_dim = positive(key, value)?,
            "attention_window" => {
                let w = positive(key, value)?;
                if w % 2 == 0 {
                    return Err(ModelError::Config(format!("attention_window must be odd, got {w}")));
                }
                self.attention_window = w;
            }
            "heads" => self.heads = positive(key, value)?,
            "hidden_dim" => self.hidden_dim = positive(key, value)?,
            "intent_hidden" => self.intent_hidden = list(key, value)?,
            "smoothing_eps" => {
                let e: f64 = parse(key, value)?;
                if !(e >= 0.0 && e.is_finite()) {
                    return Err(ModelError::Config(format!("smoothing_eps must be >= 0, got {e}")));
                }
                self.smoothing_eps = e;
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn half_width(&self) -> usize {
        (self.attention_window - 1) / 2
    }

    /// Every key with its current value, in a stable order.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let hidden: Vec<String> = self.intent_hidden.iter().map(|h| h.to_string()).collect();
        vec![
            ("word_dim".into(), self.word_dim.to_string()),
            ("char_dim".into(), self.char_dim.to_string()),
            ("char_hidden".into(), self.char_hidden.to_string()),
            ("attention_dim".into(), self.attention_dim.to_string()),
            ("attention_window".into(), self.attention_window.to_string()),
            ("heads".into(), self.heads.to_string()),
            ("hidden_dim".into(), self.hidden_dim.to_string()),
            ("intent_hidden".into(), hidden.join(",")),
            // `{:?}` on f64 prints the shortest string that parses back exactly
            ("smoothing_eps".into(), format!("{:?}", self.smoothing_eps)),
        ]
    }

    pub fn from_key_values(kv: &[(String, String)]) -> Result<Self, ModelError> {
        let mut cfg = ModelConfig::default();
        for (k, v) in kv {
            if !cfg.set(k, v)? {
                return Err(ModelError::Config(format!("unknown model key {k:?}")));
            }
        }
        Ok(cfg)
    }
}

impl TrainConfig {
    /// Applies one setting; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ModelError> {
        if self.model.set(key, value)? {
            return Ok(());
        }
        match key {
            "learning_rate" => {
                let lr: f64 = parse(key, value)?;
                if !(lr >= 0.0 && lr.is_finite()) {
                    return Err(ModelError::Config(format!("learning_rate must be >= 0, got {lr}")));
                }
                self.learning_rate = lr;
            }
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "adam_eps" => self.adam_eps = parse(key, value)?,
            "epochs" => self.epochs = positive(key, value)?,
            "batch_size" => self.batch_size = positive(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "clip_norm" => self.clip_norm = parse(key, value)?,
            "min_count" => self.min_count = positive(key, value)?,
            _ => return Err(ModelError::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn from_key_values(text: &str) -> Result<Self, ModelError> {
        let mut cfg = TrainConfig::default();
        for (k, v) in parse_key_values(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }
}

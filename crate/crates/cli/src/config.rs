//! Declarative experiment configuration (TOML).
//!
//! Relative paths resolve against the directory holding the config file.
//! The master seed is mandatory: it comes from the file or from `--seed`,
//! never from the clock.

use std::path::{Path, PathBuf};
use std::time::Duration;

use claimaug::augment::{AugmentConfig, AugmentMethod, HttpLlmClient, LlmClient, MockLlmClient, DEFAULT_TOKEN_ENV};
use claimaug::crf::TrainConfig;
use claimaug::experiment::ModelKind;
use claimaug::textclf::{AdvConfig, ClfTrainConfig};
use claimaug::LabelSchema;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    /// Extra training sentences, e.g. the output of `augment`.
    pub augmented: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSection {
    pub method: String,
    pub n_samples: usize,
    #[serde(default = "one")]
    pub per_sentence: usize,
    /// Defaults to the category with the fewest training tokens.
    pub target_class: Option<String>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrfSection {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub decay: Option<f64>,
    pub l2: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClfSection {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub l2: Option<f64>,
    pub dim: Option<usize>,
    pub train_embeddings: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvSection {
    pub epsilon: Option<f64>,
    pub adv_weight: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    pub endpoint: String,
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_attempts")]
    pub attempts: usize,
}

fn default_timeout() -> u64 {
    30
}

fn default_attempts() -> usize {
    3
}

/// One row of a comparison: a name and an optional augmentation.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub name: String,
    pub method: Option<String>,
    pub n_samples: Option<usize>,
    #[serde(default = "one")]
    pub per_sentence: usize,
    pub target_class: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub model: Option<ModelKind>,
    #[serde(default)]
    pub data: DataPaths,
    pub augment: Option<AugmentSection>,
    #[serde(default)]
    pub crf: CrfSection,
    #[serde(default)]
    pub textclf: ClfSection,
    #[serde(default)]
    pub adversarial: AdvSection,
    pub llm: Option<LlmSection>,
    #[serde(default)]
    pub runs: Vec<RunSection>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: Config = toml::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {}", path.display(), e.message())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// A referenced input file, checked to exist.
    pub fn input(&self, p: &Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
        let p = p
            .as_ref()
            .ok_or_else(|| CliError::config(format!("config is missing `{key}`")))?;
        let full = self.resolve(p);
        if !full.is_file() {
            return Err(CliError::missing(&full));
        }
        Ok(full)
    }

    pub fn schema_path(&self) -> Result<Option<PathBuf>, CliError> {
        match &self.data.schema {
            Some(_) => self.input(&self.data.schema, "data.schema").map(Some),
            None => Ok(None),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(self.output_dir.as_deref().unwrap_or(Path::new("out")))
    }

    pub fn seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        flag.or(self.seed)
            .ok_or_else(|| CliError::config("a master seed is required (config `seed` or --seed)"))
    }

    pub fn crf_config(&self, seed: u64) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            epochs: self.crf.epochs.unwrap_or(d.epochs),
            learning_rate: self.crf.learning_rate.unwrap_or(d.learning_rate),
            decay: self.crf.decay.unwrap_or(d.decay),
            l2: self.crf.l2.unwrap_or(d.l2),
            seed,
        }
    }

    pub fn clf_config(&self, seed: u64) -> ClfTrainConfig {
        let d = ClfTrainConfig::default();
        ClfTrainConfig {
            epochs: self.textclf.epochs.unwrap_or(d.epochs),
            learning_rate: self.textclf.learning_rate.unwrap_or(d.learning_rate),
            l2: self.textclf.l2.unwrap_or(d.l2),
            dim: self.textclf.dim.unwrap_or(d.dim),
            train_embeddings: self.textclf.train_embeddings.unwrap_or(d.train_embeddings),
            seed,
        }
    }

    pub fn adv_config(&self) -> AdvConfig {
        AdvConfig {
            epsilon: self.adversarial.epsilon.unwrap_or(0.0),
            adv_weight: self.adversarial.adv_weight.unwrap_or(0.0),
        }
    }

    /// The LLM client: the mock when offline, otherwise the configured
    /// endpoint. `None` when neither is available.
    pub fn llm_client(&self, offline: bool) -> Option<(Box<dyn LlmClient>, usize)> {
        if offline {
            let attempts = self.llm.as_ref().map_or(3, |l| l.attempts);
            return Some((Box::new(MockLlmClient::new()), attempts));
        }
        self.llm.as_ref().map(|l| {
            let client = HttpLlmClient::new(
                l.endpoint.clone(),
                l.token_env.as_deref().unwrap_or(DEFAULT_TOKEN_ENV),
                Duration::from_secs(l.timeout_secs),
            );
            (Box::new(client) as Box<dyn LlmClient>, l.attempts)
        })
    }
}

pub fn parse_method(s: &str) -> Result<AugmentMethod, CliError> {
    s.parse().map_err(|_| {
        CliError::config(format!(
            "unknown augmentation method `{s}` (expected aeda, vr-random, vr-antonym, er, llm or bat)"
        ))
    })
}

/// The category with the fewest (but some) training tokens; ties go to
/// schema order.
pub fn minority_class(schema: &LabelSchema) -> String {
    let cats = schema.categories();
    cats.iter()
        .filter(|c| schema.train_freq(c) > 0)
        .min_by_key(|c| schema.train_freq(c))
        .unwrap_or(&cats[0])
        .clone()
}

pub fn augment_config(
    method: &str,
    n_samples: usize,
    per_sentence: usize,
    target: Option<&str>,
    schema: &LabelSchema,
    seed: u64,
) -> Result<AugmentConfig, CliError> {
    let target_class = target.map_or_else(|| minority_class(schema), String::from);
    if !schema.is_category(&target_class) {
        return Err(CliError::config(format!("target class `{target_class}` is not a schema category")));
    }
    Ok(AugmentConfig {
        target_class,
        n_samples,
        per_sentence,
        method: parse_method(method)?,
        master_seed: seed,
    })
}

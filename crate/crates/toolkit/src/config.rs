//! Experiment configuration files.
//!
//! Configs are TOML: `key = value` lines grouped under `[section]` headers.
//! Unknown keys are rejected. After parsing, every scenario-dependent default
//! is filled in, so the echo written into reports states every value used and
//! parses back to the same config.
//!
//! ```toml
//! method = "duck"            # duck | retrain | finetune | neg_grad | rand_label
//! seeds = [42]               # default: [42] for [cr], the ten protocol seeds for [hr]
//! format = "json"            # json | csv
//! output = "report.json"     # optional; stdout when absent
//! parallel = false
//!
//! [dataset]
//! kind = "blobs"             # blobs | idx | cifar
//! classes = 10
//!
//! [model]
//! hidden = [64, 32]
//! embedding_dim = 16
//!
//! [cr]                       # or [hr] with `fraction = 0.1`, never both
//! forget_sets = [[0], [1]]   # default: one class per run, protocol stride
//!
//! [duck]
//! learning_rate = 1e-3
//! disable_forget_loss = false
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use duck_core::baselines::BaselineMethod;
use duck_core::data::{seed_protocol, ForgetSpec, Scenario, HR_FRACTION, HR_SEEDS, PROTOCOL_SEED};
use duck_core::duck::UnlearnConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Duck,
    Retrain,
    Finetune,
    NegGrad,
    RandLabel,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Duck,
        Method::Retrain,
        Method::Finetune,
        Method::NegGrad,
        Method::RandLabel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Duck => "duck",
            Method::Retrain => "retrain",
            Method::Finetune => "finetune",
            Method::NegGrad => "neg_grad",
            Method::RandLabel => "rand_label",
        }
    }

    pub fn baseline(self) -> Option<BaselineMethod> {
        match self {
            Method::Duck => None,
            Method::Retrain => Some(BaselineMethod::Retrain),
            Method::Finetune => Some(BaselineMethod::Finetune),
            Method::NegGrad => Some(BaselineMethod::NegGrad),
            Method::RandLabel => Some(BaselineMethod::RandLabel),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected duck, retrain, finetune, neg_grad or rand_label)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(format!("unknown format `{s}` (expected json or csv)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Blobs {
        #[serde(default = "d_classes")]
        classes: usize,
        #[serde(default = "d_dim")]
        dim: usize,
        #[serde(default = "d_train_per_class")]
        train_per_class: usize,
        #[serde(default = "d_test_per_class")]
        test_per_class: usize,
        #[serde(default = "d_spread")]
        spread: f64,
        #[serde(default = "d_seed")]
        seed: u64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    Cifar {
        train_files: Vec<PathBuf>,
        test_files: Vec<PathBuf>,
    },
}

fn d_classes() -> usize {
    10
}
fn d_dim() -> usize {
    32
}
fn d_train_per_class() -> usize {
    200
}
fn d_test_per_class() -> usize {
    100
}
fn d_spread() -> f64 {
    0.2
}
fn d_seed() -> u64 {
    PROTOCOL_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "d_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "d_embedding")]
    pub embedding_dim: usize,
    /// Training epochs of the original model.
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_wd")]
    pub weight_decay: f64,
    #[serde(default = "d_seed")]
    pub seed: u64,
    /// Directory of cached original models; no caching when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

fn d_hidden() -> Vec<usize> {
    vec![64, 32]
}
fn d_embedding() -> usize {
    16
}
fn d_epochs() -> usize {
    100
}
fn d_batch() -> usize {
    64
}
fn d_lr() -> f64 {
    1e-3
}
fn d_wd() -> f64 {
    5e-4
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: d_hidden(),
            embedding_dim: d_embedding(),
            epochs: d_epochs(),
            batch_size: d_batch(),
            learning_rate: d_lr(),
            weight_decay: d_wd(),
            seed: d_seed(),
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrConfig {
    /// One run per set and seed. Defaults to the single-class protocol.
    #[serde(default)]
    pub forget_sets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HrConfig {
    #[serde(default = "d_fraction")]
    pub fraction: f64,
}

fn d_fraction() -> f64 {
    HR_FRACTION
}

/// Unlearning hyperparameters; absent values take the scenario defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DuckConfig {
    pub lambda_forget: Option<f64>,
    pub lambda_retain: Option<f64>,
    pub batch_ratio: Option<usize>,
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub batch_size: Option<usize>,
    pub temperature: Option<f64>,
    pub max_epochs: Option<usize>,
    /// Stopping target; the original test accuracy in HR when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_forget_accuracy: Option<f64>,
    #[serde(default)]
    pub disable_forget_loss: bool,
    #[serde(default)]
    pub disable_retain_loss: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    /// Budget of retraining and fine-tuning.
    #[serde(default = "d_baseline_epochs")]
    pub epochs: usize,
    /// Cap of the accuracy-stopped methods.
    #[serde(default = "d_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_wd")]
    pub weight_decay: f64,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
}

fn d_baseline_epochs() -> usize {
    30
}
fn d_max_epochs() -> usize {
    100
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            epochs: d_baseline_epochs(),
            max_epochs: d_max_epochs(),
            learning_rate: d_lr(),
            weight_decay: d_wd(),
            batch_size: d_batch(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiaConfig {
    /// Defaults to on for [hr], off for [cr].
    pub enabled: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "d_method")]
    pub method: Method,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub format: ReportFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Run the seeds concurrently; the report order is unchanged.
    #[serde(default)]
    pub parallel: bool,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cr: Option<CrConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hr: Option<HrConfig>,
    #[serde(default)]
    pub duck: DuckConfig,
    #[serde(default)]
    pub baseline: BaselineSection,
    #[serde(default)]
    pub mia: MiaConfig,
}

fn d_method() -> Method {
    Method::Duck
}

/// One unlearning run of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub seed: u64,
    pub forget: ForgetSpec,
}

impl ExperimentConfig {
    pub fn scenario(&self) -> Scenario {
        if self.hr.is_some() {
            Scenario::HomogeneousRemoval
        } else {
            Scenario::ClassRemoval
        }
    }

    /// Class count when it is known without reading files.
    pub fn known_classes(&self) -> Option<usize> {
        match &self.dataset {
            DatasetConfig::Blobs { classes, .. } => Some(*classes),
            DatasetConfig::Cifar { .. } => Some(10),
            DatasetConfig::Idx { .. } => None,
        }
    }

    /// Fills scenario-dependent defaults and checks consistency.
    pub fn finalize(mut self) -> Result<Self, ConfigError> {
        let scenario = match (&self.cr, &self.hr) {
            (Some(_), Some(_)) => return Err(invalid("[cr] and [hr] are mutually exclusive")),
            (None, None) => return Err(invalid("missing scenario section: add [cr] or [hr]")),
            (Some(_), None) => Scenario::ClassRemoval,
            (None, Some(_)) => Scenario::HomogeneousRemoval,
        };
        if self.seeds.is_empty() {
            self.seeds = match scenario {
                Scenario::ClassRemoval => vec![PROTOCOL_SEED],
                Scenario::HomogeneousRemoval => HR_SEEDS.to_vec(),
            };
        }
        let known = self.known_classes();
        if let Some(cr) = &mut self.cr {
            if cr.forget_sets.is_empty() {
                let Some(k) = known else {
                    return Err(invalid("[cr] forget_sets is required for IDX datasets"));
                };
                cr.forget_sets = seed_protocol(Scenario::ClassRemoval, k)
                    .into_iter()
                    .filter_map(|(_, spec)| match spec {
                        ForgetSpec::Classes(c) => Some(c),
                        ForgetSpec::Fraction(_) => None,
                    })
                    .collect();
            }
            if cr.forget_sets.iter().any(|s| s.is_empty()) {
                return Err(invalid("[cr] forget_sets entries must be non-empty"));
            }
            if let Some(k) = known {
                if let Some(c) = cr.forget_sets.iter().flatten().find(|&&c| c >= k) {
                    return Err(invalid(format!("forget class {c} outside [0, {k})")));
                }
            }
        }
        if let Some(hr) = &self.hr {
            if !(hr.fraction > 0.0 && hr.fraction < 1.0) {
                return Err(invalid(format!("[hr] fraction must lie in (0, 1), got {}", hr.fraction)));
            }
        }

        let defaults = match scenario {
            Scenario::ClassRemoval => UnlearnConfig::class_removal(),
            Scenario::HomogeneousRemoval => UnlearnConfig::homogeneous_removal(1.0),
        };
        let d = &mut self.duck;
        d.lambda_forget.get_or_insert(defaults.lambda_forget);
        d.lambda_retain.get_or_insert(defaults.lambda_retain);
        d.batch_ratio.get_or_insert(defaults.batch_ratio);
        d.learning_rate.get_or_insert(defaults.learning_rate);
        d.weight_decay.get_or_insert(defaults.weight_decay);
        d.batch_size.get_or_insert(defaults.batch_size);
        d.temperature.get_or_insert(defaults.temperature);
        d.max_epochs.get_or_insert(defaults.max_epochs);
        if scenario == Scenario::ClassRemoval {
            d.target_forget_accuracy.get_or_insert(defaults.target_forget_accuracy);
        }
        if d.disable_forget_loss && d.disable_retain_loss {
            return Err(invalid("disabling both loss terms leaves nothing to optimise"));
        }
        if (d.disable_forget_loss || d.disable_retain_loss) && self.method != Method::Duck {
            return Err(invalid("ablation flags apply only to method = \"duck\""));
        }
        self.mia.enabled.get_or_insert(scenario == Scenario::HomogeneousRemoval);

        if self.model.batch_size == 0 || self.baseline.batch_size == 0 {
            return Err(invalid("batch sizes must be positive"));
        }
        if let DatasetConfig::Cifar { train_files, test_files } = &self.dataset {
            if train_files.is_empty() || test_files.is_empty() {
                return Err(invalid("[dataset] CIFAR needs train_files and test_files"));
            }
        }
        // The unlearning settings are checked once here rather than per run.
        self.unlearn_config(0.5).validate().map_err(|e| invalid(e.to_string()))?;
        Ok(self)
    }

    /// The run list: every forget set under every seed for class removal,
    /// one run per seed for homogeneous removal.
    pub fn runs(&self) -> Vec<RunSpec> {
        match (&self.cr, &self.hr) {
            (Some(cr), _) => cr
                .forget_sets
                .iter()
                .flat_map(|set| {
                    self.seeds.iter().map(move |&seed| RunSpec {
                        seed,
                        forget: ForgetSpec::Classes(set.clone()),
                    })
                })
                .collect(),
            (None, Some(hr)) => self
                .seeds
                .iter()
                .map(|&seed| RunSpec {
                    seed,
                    forget: ForgetSpec::Fraction(hr.fraction),
                })
                .collect(),
            (None, None) => Vec::new(),
        }
    }

    /// The unlearning settings, with `original_test_accuracy` as the HR
    /// stopping target unless the config sets one.
    pub fn unlearn_config(&self, original_test_accuracy: f64) -> UnlearnConfig {
        let mut c = match self.scenario() {
            Scenario::ClassRemoval => UnlearnConfig::class_removal(),
            Scenario::HomogeneousRemoval => UnlearnConfig::homogeneous_removal(original_test_accuracy),
        };
        let d = &self.duck;
        c.lambda_forget = d.lambda_forget.unwrap_or(c.lambda_forget);
        c.lambda_retain = d.lambda_retain.unwrap_or(c.lambda_retain);
        c.batch_ratio = d.batch_ratio.unwrap_or(c.batch_ratio);
        c.learning_rate = d.learning_rate.unwrap_or(c.learning_rate);
        c.weight_decay = d.weight_decay.unwrap_or(c.weight_decay);
        c.batch_size = d.batch_size.unwrap_or(c.batch_size);
        c.temperature = d.temperature.unwrap_or(c.temperature);
        c.max_epochs = d.max_epochs.unwrap_or(c.max_epochs);
        c.target_forget_accuracy = d.target_forget_accuracy.unwrap_or(c.target_forget_accuracy);
        if d.disable_forget_loss {
            c.lambda_forget = 0.0;
        }
        if d.disable_retain_loss {
            c.lambda_retain = 0.0;
        }
        c
    }

    pub fn mia_enabled(&self) -> bool {
        self.mia.enabled.unwrap_or(self.scenario() == Scenario::HomogeneousRemoval)
    }

    /// The config as TOML, every default written out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// Resolves relative dataset and cache paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset {
            DatasetConfig::Blobs { .. } => {}
            DatasetConfig::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => {
                for p in [train_images, train_labels, test_images, test_labels] {
                    fix(p);
                }
            }
            DatasetConfig::Cifar { train_files, test_files } => {
                train_files.iter_mut().chain(test_files.iter_mut()).for_each(fix);
            }
        }
        if let Some(dir) = &mut self.model.cache_dir {
            fix(dir);
        }
    }
}

/// Parses and finalizes a config from TOML text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    raw.finalize()
}

/// Reads `path`; relative paths inside are taken from the file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg = parse_config(&text).map_err(|e| match e {
        ConfigError::Syntax(m) => ConfigError::Syntax(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if let Some(dir) = path.parent() {
        cfg.resolve_paths(dir);
    }
    Ok(cfg)
}

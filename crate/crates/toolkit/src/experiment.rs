//! End-to-end runs: load data, obtain the original model, apply the chosen
//! method to every (seed, forget set) pair, then evaluate and attack.

use std::time::Instant;

use duck_core::baselines::{
    finetune, negative_gradient, random_label, retrain_oracle, BaselineConfig, BaselineMethod,
};
use duck_core::data::{gen_blobs_split, split_cr, split_hr, BlobSpec, Dataset, ForgetSpec, Scenario, SplitBundle};
use duck_core::duck::unlearn_duck;
use duck_core::metrics::{
    accuracy, aggregate_runs, aus, evaluate_split, reference_accuracy, summarize, AccuracyVector,
    AusScore, RunAggregate, Summary,
};
use duck_core::mia::{run_mia, MiaResult};
use duck_core::nn::{AdamConfig, Architecture, Model, TrainConfig};
use rayon::prelude::*;

use crate::cache::{cache_original_model, CacheOutcome};
use crate::config::{DatasetConfig, ExperimentConfig, Method, RunSpec};
use crate::formats::{load_cifar_binary, load_idx};
use crate::Result;

/// How much of the pipeline a command runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Unlearn and evaluate, no attack.
    Unlearn,
    /// Evaluate the original model on every split.
    Evaluate,
    /// Attack the original model on every split.
    Mia,
    /// Unlearn, evaluate, and attack when the config enables it.
    Experiment,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Unlearn => "unlearn",
            Stage::Evaluate => "evaluate",
            Stage::Mia => "mia",
            Stage::Experiment => "experiment",
        }
    }

    fn unlearns(self) -> bool {
        matches!(self, Stage::Unlearn | Stage::Experiment)
    }
}

/// Train and test sets named by the config.
pub fn load_datasets(cfg: &DatasetConfig) -> Result<(Dataset, Dataset)> {
    match cfg {
        DatasetConfig::Blobs {
            classes,
            dim,
            train_per_class,
            test_per_class,
            spread,
            seed,
        } => {
            let spec = BlobSpec {
                classes: *classes,
                dim: *dim,
                spread: *spread,
                seed: *seed,
            };
            Ok(gen_blobs_split(&spec, *train_per_class, *test_per_class)?)
        }
        DatasetConfig::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => {
            let train = load_idx(train_images, train_labels)?;
            let test = load_idx(test_images, test_labels)?;
            // Either file may lack the highest classes; agree on one count.
            let k = train.num_classes().max(test.num_classes());
            Ok((with_classes(&train, k)?, with_classes(&test, k)?))
        }
        DatasetConfig::Cifar { train_files, test_files } => {
            Ok((load_cifar_binary(train_files)?, load_cifar_binary(test_files)?))
        }
    }
}

fn with_classes(d: &Dataset, k: usize) -> Result<Dataset> {
    if d.num_classes() == k {
        return Ok(d.clone());
    }
    Ok(Dataset::new(d.features().clone(), d.labels().to_vec(), k, d.name())?)
}

/// Data and original model shared by every run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub architecture: Architecture,
    pub original: Model,
    pub original_train_accuracy: f64,
    pub original_test_accuracy: f64,
    pub cache: CacheOutcome,
}

pub fn architecture(cfg: &ExperimentConfig, train: &Dataset) -> Architecture {
    Architecture {
        input_dim: train.dim(),
        hidden: cfg.model.hidden.clone(),
        embedding_dim: cfg.model.embedding_dim,
        num_classes: train.num_classes(),
    }
}

pub fn original_train_config(cfg: &ExperimentConfig) -> TrainConfig {
    TrainConfig {
        epochs: cfg.model.epochs,
        batch_size: cfg.model.batch_size,
        optimizer: AdamConfig {
            learning_rate: cfg.model.learning_rate,
            weight_decay: cfg.model.weight_decay,
            ..AdamConfig::default()
        },
        temperature: 1.0,
    }
}

/// Loads the data and trains (or loads) the original model. `original`
/// replaces the trained model when given.
pub fn prepare(cfg: &ExperimentConfig, original: Option<Model>) -> Result<Prepared> {
    let (train, test) = load_datasets(&cfg.dataset)?;
    let arch = architecture(cfg, &train);
    arch.validate()?;
    let (model, cache) = match original {
        Some(m) => {
            if m.input_dim() != arch.input_dim || m.num_classes() != arch.num_classes {
                return Err(duck_core::Error::Shape(format!(
                    "supplied model maps {} inputs to {} classes; the data has {} and {}",
                    m.input_dim(),
                    m.num_classes(),
                    arch.input_dim,
                    arch.num_classes
                ))
                .into());
            }
            (m, CacheOutcome::Uncached)
        }
        None => cache_original_model(
            cfg.model.cache_dir.as_deref(),
            &arch,
            &train,
            &original_train_config(cfg),
            cfg.model.seed,
        )?,
    };
    if let CacheOutcome::Replaced(reason) = &cache {
        log::warn!("original model cache was unusable ({reason}); retrained");
    }
    Ok(Prepared {
        original_train_accuracy: accuracy(&model, &train)?,
        original_test_accuracy: accuracy(&model, &test)?,
        train,
        test,
        architecture: arch,
        original: model,
        cache,
    })
}

/// Everything measured in one successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub accuracies: AccuracyVector,
    pub aus: AusScore,
    pub mia: Option<MiaResult>,
    /// Epochs the method ran; `None` when nothing was unlearned.
    pub epochs_run: Option<usize>,
    /// Whether an accuracy-stopped method reached its target.
    pub converged: Option<bool>,
    /// Set for a fixed-budget method given zero epochs.
    pub degenerate: bool,
    /// Time spent in the unlearning method.
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub index: usize,
    pub seed: u64,
    pub forget: ForgetSpec,
    /// The error message of a failed run.
    pub result: std::result::Result<RunMetrics, String>,
}

/// Summaries over the successful runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub runs_ok: usize,
    pub runs_failed: usize,
    pub accuracies: RunAggregate,
    pub mia_f1: Option<Summary>,
    pub wall_time_seconds: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub toolkit_version: String,
    pub stage: Stage,
    pub method: Option<Method>,
    pub scenario: Scenario,
    pub config: ExperimentConfig,
    pub original_train_accuracy: f64,
    pub original_test_accuracy: f64,
    pub runs: Vec<RunRecord>,
    /// `None` when every run failed.
    pub aggregate: Option<Aggregate>,
}

impl ExperimentReport {
    pub fn successful(&self) -> impl Iterator<Item = &RunMetrics> {
        self.runs.iter().filter_map(|r| r.result.as_ref().ok())
    }

    pub fn runs_ok(&self) -> usize {
        self.successful().count()
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_stage(cfg, Stage::Experiment, None)
}

/// Runs `stage` over every run of `cfg`. Failed runs are recorded with their
/// error and left out of the aggregate.
pub fn run_stage(cfg: &ExperimentConfig, stage: Stage, original: Option<Model>) -> Result<ExperimentReport> {
    let prepared = prepare(cfg, original)?;
    let specs = cfg.runs();
    let run = |(index, spec): (usize, &RunSpec)| {
        let result = run_one(&prepared, cfg, stage, spec).map_err(|e| e.to_string());
        if let Err(e) = &result {
            log::error!("run {index} (seed {}, {}) failed: {e}", spec.seed, spec.forget.describe());
        }
        RunRecord {
            index,
            seed: spec.seed,
            forget: spec.forget.clone(),
            result,
        }
    };
    // Each run seeds its own generators, so the order of execution does not
    // affect any result; collect keeps seed order.
    let runs: Vec<RunRecord> = if cfg.parallel {
        specs.par_iter().enumerate().map(run).collect()
    } else {
        specs.iter().enumerate().map(run).collect()
    };
    let aggregate = aggregate(&runs)?;
    Ok(ExperimentReport {
        toolkit_version: crate::VERSION.to_string(),
        stage,
        method: stage.unlearns().then_some(cfg.method),
        scenario: cfg.scenario(),
        config: cfg.clone(),
        original_train_accuracy: prepared.original_train_accuracy,
        original_test_accuracy: prepared.original_test_accuracy,
        runs,
        aggregate,
    })
}

pub fn build_split(prepared: &Prepared, spec: &RunSpec) -> Result<SplitBundle> {
    Ok(match &spec.forget {
        ForgetSpec::Classes(c) => split_cr(&prepared.train, &prepared.test, c)?,
        ForgetSpec::Fraction(f) => split_hr(&prepared.train, &prepared.test, *f, spec.seed)?,
    })
}

struct MethodOutput {
    model: Model,
    epochs_run: Option<usize>,
    converged: Option<bool>,
    degenerate: bool,
}

fn run_one(p: &Prepared, cfg: &ExperimentConfig, stage: Stage, spec: &RunSpec) -> Result<RunMetrics> {
    let split = build_split(p, spec)?;
    let a_or = reference_accuracy(&p.original, &split)?;
    let start = Instant::now();
    let out = if stage.unlearns() {
        apply_method(p, cfg, &split, a_or, spec.seed)?
    } else {
        MethodOutput {
            model: p.original.clone(),
            epochs_run: None,
            converged: None,
            degenerate: false,
        }
    };
    let wall_time_seconds = start.elapsed().as_secs_f64();
    let accuracies = evaluate_split(&out.model, &split, a_or)?;
    let score = aus(&accuracies, split.scenario)?;
    let attack = match stage {
        Stage::Mia => true,
        Stage::Experiment => cfg.mia_enabled(),
        Stage::Unlearn | Stage::Evaluate => false,
    };
    let mia = if attack {
        Some(run_mia(&out.model, &split.forget_train, &split.test)?)
    } else {
        None
    };
    Ok(RunMetrics {
        accuracies,
        aus: score,
        mia,
        epochs_run: out.epochs_run,
        converged: out.converged,
        degenerate: out.degenerate,
        wall_time_seconds,
    })
}

fn apply_method(
    p: &Prepared,
    cfg: &ExperimentConfig,
    split: &SplitBundle,
    a_or: f64,
    seed: u64,
) -> Result<MethodOutput> {
    let Some(base) = cfg.method.baseline() else {
        let r = unlearn_duck(p.original.clone(), split, &cfg.unlearn_config(a_or), seed)?;
        return Ok(MethodOutput {
            model: r.model,
            epochs_run: Some(r.epochs_run),
            converged: Some(r.converged),
            degenerate: false,
        });
    };
    let b = &cfg.baseline;
    let bc = BaselineConfig {
        epochs: b.epochs,
        max_epochs: b.max_epochs,
        learning_rate: b.learning_rate,
        weight_decay: b.weight_decay,
        batch_size: b.batch_size,
        seed,
        ..BaselineConfig::new(base)
    }
    .with_target(split.scenario, a_or);
    Ok(match base {
        BaselineMethod::Retrain | BaselineMethod::Finetune => {
            let model = if base == BaselineMethod::Retrain {
                retrain_oracle(&p.architecture, split, &bc)?
            } else {
                finetune(p.original.clone(), split, &bc)?
            };
            if bc.epochs == 0 {
                log::warn!("{} with zero epochs: results are degenerate", base.as_str());
            }
            MethodOutput {
                model,
                epochs_run: Some(bc.epochs),
                converged: None,
                degenerate: bc.epochs == 0,
            }
        }
        BaselineMethod::NegGrad | BaselineMethod::RandLabel => {
            let r = if base == BaselineMethod::NegGrad {
                negative_gradient(p.original.clone(), split, &bc)?
            } else {
                random_label(p.original.clone(), split, &bc)?
            };
            MethodOutput {
                model: r.model,
                epochs_run: Some(r.epochs_run),
                converged: Some(r.converged),
                degenerate: false,
            }
        }
    })
}

fn aggregate(runs: &[RunRecord]) -> Result<Option<Aggregate>> {
    let ok: Vec<&RunMetrics> = runs.iter().filter_map(|r| r.result.as_ref().ok()).collect();
    if ok.is_empty() {
        return Ok(None);
    }
    let pairs: Vec<(AccuracyVector, AusScore)> = ok.iter().map(|m| (m.accuracies, m.aus)).collect();
    let f1: Option<Vec<f64>> = ok.iter().map(|m| m.mia.as_ref().map(|r| r.mean_f1)).collect();
    let times: Vec<f64> = ok.iter().map(|m| m.wall_time_seconds).collect();
    Ok(Some(Aggregate {
        runs_ok: ok.len(),
        runs_failed: runs.len() - ok.len(),
        accuracies: aggregate_runs(&pairs)?,
        mia_f1: f1.map(|v| summarize(&v)).transpose()?,
        wall_time_seconds: summarize(&times)?,
    }))
}

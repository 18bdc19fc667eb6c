//! Experiment configuration: a flat TOML key-value file, overridable by
//! command-line flags.
//!
//! Recognised keys:
//!
//! | key             | meaning                                            |
//! |-----------------|----------------------------------------------------|
//! | `train`, `test` | EMBD1 dataset paths                                |
//! | `mode`          | `class_incremental` (default) or `domain_incremental` |
//! | `num_tasks`     | class-incremental task count                       |
//! | `split_seed`    | shuffle labels before partitioning                 |
//! | `train_domains` | ordered list of training task ids (domain mode)    |
//! | `test_domains`  | list of held-out task ids (domain mode)            |
//! | `joint`         | collapse all tasks into one                        |
//! | `learner`       | `nmc` (default) or `linear_probe`                  |
//! | `metric`        | `squared_euclidean` (default), `euclidean`, `cosine_distance` |
//! | `learning_rate`, `epochs`, `batch_size`, `weight_decay`, `probe_seed` | linear probe |
//! | `shuffle_seed`  | shuffle records within each task                   |
//! | `report`, `csv` | output paths                                       |
//! | `threads`       | evaluation worker threads                          |

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{DistanceMetric, ProbeConfig};
use crate::embedding::{validate_dataset, Dataset};
use crate::error::{Error, Result};
use crate::protocol::{
    make_class_incremental_split, make_domain_incremental_split, run_scenario, LearnerContext, LearnerRegistry,
    RunOptions, RunReport, ScenarioMode, SplitSpec,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub mode: Option<ScenarioMode>,
    pub num_tasks: Option<u32>,
    pub split_seed: Option<u64>,
    pub train_domains: Option<Vec<u32>>,
    pub test_domains: Option<Vec<u32>>,
    pub joint: Option<bool>,
    pub learner: Option<String>,
    pub metric: Option<DistanceMetric>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<u32>,
    pub batch_size: Option<usize>,
    pub weight_decay: Option<f64>,
    pub probe_seed: Option<u64>,
    pub shuffle_seed: Option<u64>,
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub threads: Option<usize>,
}

macro_rules! overlay_fields {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &ExperimentConfig) {
        overlay_fields!(self, other; train, test, mode, num_tasks, split_seed, train_domains, test_domains,
            joint, learner, metric, learning_rate, epochs, batch_size, weight_decay, probe_seed, shuffle_seed,
            report, csv, threads);
    }

    pub fn probe_config(&self) -> ProbeConfig {
        let d = ProbeConfig::default();
        ProbeConfig {
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            weight_decay: self.weight_decay.unwrap_or(d.weight_decay),
            seed: self.probe_seed.unwrap_or(d.seed),
        }
    }

    pub fn learner_name(&self) -> &str {
        self.learner.as_deref().unwrap_or("nmc")
    }

    /// Builds the split for a training set with `num_classes` classes.
    pub fn split(&self, num_classes: u32) -> Result<SplitSpec> {
        let spec = match self.mode.unwrap_or(ScenarioMode::ClassIncremental) {
            ScenarioMode::ClassIncremental => {
                let tasks = self
                    .num_tasks
                    .ok_or_else(|| Error::Config("class-incremental runs need `num_tasks`".into()))?;
                make_class_incremental_split(num_classes, tasks, self.split_seed)?
            }
            ScenarioMode::DomainIncremental => {
                let (Some(train), Some(test)) = (&self.train_domains, &self.test_domains) else {
                    return Err(Error::Config(
                        "domain-incremental runs need `train_domains` and `test_domains`".into(),
                    ));
                };
                make_domain_incremental_split(train, test)?
            }
        };
        Ok(if self.joint.unwrap_or(false) { spec.joint() } else { spec })
    }
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| Error::Config(format!("missing `{key}` dataset path")))
}

fn load_validated(path: &Path) -> Result<Dataset> {
    let report = validate_dataset(path)?;
    if !report.is_valid() {
        return Err(Error::InvalidDataset {
            path: path.display().to_string(),
            violations: report.violations.iter().map(ToString::to_string).collect(),
        });
    }
    Dataset::load(path)
}

/// Validates and loads both datasets, runs the configured scenario and
/// returns its report. Nothing is written to disk.
pub fn run_experiment(config: &ExperimentConfig, registry: &LearnerRegistry) -> Result<RunReport> {
    let train_path = required(&config.train, "train")?;
    let test_path = required(&config.test, "test")?;
    config.probe_config().check()?;
    let train = load_validated(train_path)?;
    let test = load_validated(test_path)?;

    let split = config.split(train.header.num_classes)?;
    let ctx = LearnerContext::new(train.dim(), train.header.num_classes as usize)
        .with_metric(config.metric.unwrap_or_default());
    let ctx = LearnerContext {
        probe: config.probe_config(),
        ..ctx
    };
    let mut learner = registry.create(config.learner_name(), &ctx)?;
    let options = RunOptions {
        shuffle_seed: config.shuffle_seed,
    };
    let mut report = run_scenario(&train, &test, &split, learner.as_mut(), &options)?;
    report.config = Some(config.to_toml()?);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_overlay() {
        let mut base = ExperimentConfig::from_toml(
            r#"
            train = "a.embd"
            test = "b.embd"
            num_tasks = 10
            metric = "cosine_distance"
            train_domains = [0, 1, 3]
            "#,
        )
        .unwrap();
        assert_eq!(base.metric, Some(DistanceMetric::CosineDistance));
        assert_eq!(base.train_domains, Some(vec![0, 1, 3]));
        let flags = ExperimentConfig {
            num_tasks: Some(5),
            learner: Some("linear_probe".into()),
            ..Default::default()
        };
        base.overlay(&flags);
        assert_eq!(base.num_tasks, Some(5));
        assert_eq!(base.learner_name(), "linear_probe");
        assert_eq!(base.train, Some(PathBuf::from("a.embd")));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ExperimentConfig::from_toml("bogus = 1"), Err(Error::Config(_))));
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = ExperimentConfig {
            train: Some("t.embd".into()),
            mode: Some(ScenarioMode::DomainIncremental),
            train_domains: Some(vec![0, 1]),
            test_domains: Some(vec![2]),
            learning_rate: Some(0.05),
            ..Default::default()
        };
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn split_construction() {
        let cfg = ExperimentConfig {
            num_tasks: Some(2),
            ..Default::default()
        };
        assert_eq!(cfg.split(4).unwrap().num_tasks(), 2);
        let joint = ExperimentConfig {
            joint: Some(true),
            ..cfg.clone()
        };
        assert_eq!(joint.split(4).unwrap().num_tasks(), 1);
        assert!(matches!(ExperimentConfig::default().split(4), Err(Error::Config(_))));
        let di = ExperimentConfig {
            mode: Some(ScenarioMode::DomainIncremental),
            ..Default::default()
        };
        assert!(matches!(di.split(4), Err(Error::Config(_))));
    }

    #[test]
    fn probe_defaults() {
        assert_eq!(ExperimentConfig::default().probe_config(), ProbeConfig::default());
    }
}

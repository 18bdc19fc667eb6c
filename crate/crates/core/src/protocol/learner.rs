//! Continual learners behind one interface, created by name.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;

use crate::classifier::{Distance, DistanceMetric, LinearProbe, PackedPrototypes, ProbeConfig};
use crate::embedding::EmbeddingRecord;
use crate::error::{Error, Result};
use crate::prototype::PrototypeTable;
use crate::rng::Xoshiro256StarStar;

/// Something that learns from a stream of tasks and answers single-head
/// queries over a candidate label set.
pub trait Learner: Send + Sync {
    /// Registry name.
    fn name(&self) -> &str;

    /// Human-facing label used in comparison tables.
    fn describe(&self) -> String {
        self.name().to_string()
    }

    /// Consumes one task's records in the given order.
    fn train_task(&mut self, records: &[&EmbeddingRecord]) -> Result<()>;

    /// Predicts one label per query, choosing only among `candidates`.
    fn predict_batch(&self, queries: &[&[f32]], candidates: &BTreeSet<u32>) -> Result<Vec<u32>>;

    /// Bytes of retained state, for the exemplar-free audit.
    fn state_bytes(&self) -> usize;

    fn prototypes(&self) -> Option<&PrototypeTable> {
        None
    }

    fn linear_probe(&self) -> Option<&LinearProbe> {
        None
    }
}

/// Nearest class mean over streaming prototypes.
pub struct NmcLearner {
    table: PrototypeTable,
    metric: Arc<dyn Distance>,
}

impl NmcLearner {
    pub fn new(dim: usize, metric: Arc<dyn Distance>) -> Result<Self> {
        Ok(Self {
            table: PrototypeTable::new(dim)?,
            metric,
        })
    }

    /// Task-free entry point: one sample, no boundary needed.
    pub fn observe(&mut self, record: &EmbeddingRecord) -> Result<()> {
        self.table.observe(record)
    }

    pub fn table(&self) -> &PrototypeTable {
        &self.table
    }
}

impl Learner for NmcLearner {
    fn name(&self) -> &str {
        "nmc"
    }

    fn describe(&self) -> String {
        format!("NMC ({})", self.metric.name())
    }

    fn train_task(&mut self, records: &[&EmbeddingRecord]) -> Result<()> {
        records.iter().try_for_each(|r| self.table.observe(r))
    }

    fn predict_batch(&self, queries: &[&[f32]], candidates: &BTreeSet<u32>) -> Result<Vec<u32>> {
        let packed = if self.table.labels().all(|l| candidates.contains(&l)) {
            PackedPrototypes::new(&self.table)
        } else {
            let mut restricted = PrototypeTable::new(self.table.dim())?;
            for p in self.table.iter().filter(|p| candidates.contains(&p.class_label)) {
                restricted.insert(p.clone())?;
            }
            PackedPrototypes::new(&restricted)
        };
        Ok(packed
            .predict_batch(queries, self.metric.as_ref())?
            .into_iter()
            .map(|p| p.class_label)
            .collect())
    }

    fn state_bytes(&self) -> usize {
        self.table.state_bytes()
    }

    fn prototypes(&self) -> Option<&PrototypeTable> {
        Some(&self.table)
    }
}

/// Softmax head over the full label space, trained task by task with no
/// forgetting mitigation.
pub struct LinearProbeLearner {
    probe: LinearProbe,
    rng: Xoshiro256StarStar,
}

impl LinearProbeLearner {
    pub fn new(dim: usize, num_classes: usize, config: ProbeConfig) -> Result<Self> {
        Ok(Self {
            probe: LinearProbe::new(dim, num_classes, config)?,
            rng: Xoshiro256StarStar::seed_from_u64(config.seed),
        })
    }
}

impl Learner for LinearProbeLearner {
    fn name(&self) -> &str {
        "linear_probe"
    }

    fn describe(&self) -> String {
        "FT-frozen (linear probe)".into()
    }

    fn train_task(&mut self, records: &[&EmbeddingRecord]) -> Result<()> {
        let epochs = self.probe.config().epochs;
        self.probe.fit_epochs(records, epochs, &mut self.rng)
    }

    fn predict_batch(&self, queries: &[&[f32]], candidates: &BTreeSet<u32>) -> Result<Vec<u32>> {
        queries
            .par_iter()
            .map(|q| {
                self.probe
                    .predict_among(q, |c| candidates.contains(&c))?
                    .ok_or_else(|| Error::InvalidParameter("no candidate classes".into()))
            })
            .collect()
    }

    fn state_bytes(&self) -> usize {
        self.probe.state_bytes()
    }

    fn linear_probe(&self) -> Option<&LinearProbe> {
        Some(&self.probe)
    }
}

/// Everything a factory may need to build a learner.
#[derive(Clone)]
pub struct LearnerContext {
    pub dim: usize,
    pub num_classes: usize,
    pub metric: Arc<dyn Distance>,
    pub probe: ProbeConfig,
}

impl LearnerContext {
    pub fn new(dim: usize, num_classes: usize) -> Self {
        Self {
            dim,
            num_classes,
            metric: Arc::new(crate::classifier::SquaredEuclidean),
            probe: ProbeConfig::default(),
        }
    }

    pub fn with_metric(mut self, metric: DistanceMetric) -> Self {
        self.metric = match metric {
            DistanceMetric::SquaredEuclidean => Arc::new(crate::classifier::SquaredEuclidean),
            DistanceMetric::Euclidean => Arc::new(crate::classifier::Euclidean),
            DistanceMetric::CosineDistance => Arc::new(crate::classifier::CosineDistance),
        };
        self
    }
}

pub type LearnerFactory = Box<dyn Fn(&LearnerContext) -> Result<Box<dyn Learner>> + Send + Sync>;

/// Name → learner factory.
pub struct LearnerRegistry {
    factories: BTreeMap<String, LearnerFactory>,
}

impl Default for LearnerRegistry {
    fn default() -> Self {
        let mut reg = Self {
            factories: BTreeMap::new(),
        };
        reg.register("nmc", |ctx| Ok(Box::new(NmcLearner::new(ctx.dim, ctx.metric.clone())?)));
        reg.register("linear_probe", |ctx| {
            Ok(Box::new(LinearProbeLearner::new(ctx.dim, ctx.num_classes, ctx.probe)?))
        });
        reg
    }
}

impl LearnerRegistry {
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&LearnerContext) -> Result<Box<dyn Learner>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn create(&self, name: &str, ctx: &LearnerContext) -> Result<Box<dyn Learner>> {
        let factory = self.factories.get(name).ok_or_else(|| Error::Unknown {
            kind: "learner",
            name: name.to_string(),
        })?;
        factory(ctx)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}

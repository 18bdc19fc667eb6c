//! Drives a learner through a scenario and fills the accuracy matrix.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::learner::Learner;
use super::matrix::{average_accuracy, forgetting, sample_weighted_accuracy, AccuracyMatrix};
use super::report::RunReport;
use super::split::{ScenarioMode, SplitSpec};
use crate::embedding::{Dataset, EmbeddingRecord};
use crate::error::{Error, Result};
use crate::rng::Xoshiro256StarStar;

/// Per-class slack allowed on top of `classes × dim × 8` bytes of state.
pub const STATE_SLACK_PER_CLASS: usize = 128;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Shuffle each task's records with this seed; storage order otherwise.
    pub shuffle_seed: Option<u64>,
}

/// Hex SHA-256 over the split and both dataset headers.
pub fn scenario_fingerprint(spec: &SplitSpec, train: &Dataset, test: &Dataset) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(spec).expect("split serialises"));
    hasher.update(train.header.encode());
    hasher.update(test.header.encode());
    format!("{:x}", hasher.finalize())
}

fn check_consistency(train: &Dataset, test: &Dataset, spec: &SplitSpec) -> Result<()> {
    spec.check()?;
    let mismatch = |m: String| Err(Error::ScenarioMismatch(m));
    if train.dim() != test.dim() {
        return mismatch(format!("train dim {} != test dim {}", train.dim(), test.dim()));
    }
    if let Some(max) = spec.max_class() {
        if max >= train.header.num_classes {
            return mismatch(format!(
                "split names class {max} but the training set has {} classes",
                train.header.num_classes
            ));
        }
    }
    Ok(())
}

fn audit(learner: &dyn Learner, num_classes: usize, dim: usize) -> Result<()> {
    let bound = num_classes * dim * 8 + STATE_SLACK_PER_CLASS * num_classes;
    let actual = learner.state_bytes();
    if actual > bound {
        return Err(Error::StateBoundExceeded { actual, bound });
    }
    Ok(())
}

/// Runs `learner` through every task of `spec`.
///
/// After task `t` each eval set whose classes have all been introduced is
/// scored single-head: candidates are every class introduced so far
/// (class-incremental) or every class observed in training so far
/// (domain-incremental).
pub fn run_scenario(
    train: &Dataset,
    test: &Dataset,
    spec: &SplitSpec,
    learner: &mut dyn Learner,
    options: &RunOptions,
) -> Result<RunReport> {
    check_consistency(train, test, spec)?;
    let dim = train.dim();
    let num_classes = train.header.num_classes as usize;

    let eval_members: Vec<Vec<&EmbeddingRecord>> = spec
        .eval_sets
        .iter()
        .map(|e| test.records.iter().filter(|r| e.selection.matches(r)).collect())
        .collect();
    if let Some(i) = eval_members.iter().position(Vec::is_empty) {
        return Err(Error::ScenarioMismatch(format!(
            "eval set `{}` selects no test records",
            spec.eval_sets[i].name
        )));
    }

    let mut matrix = AccuracyMatrix::new(spec.mode, spec.num_tasks(), spec.eval_sets.len());
    let mut observed: BTreeSet<u32> = BTreeSet::new();
    let mut shuffler = options.shuffle_seed.map(Xoshiro256StarStar::seed_from_u64);

    for (t, task) in spec.tasks.iter().enumerate() {
        let mut records: Vec<&EmbeddingRecord> = train.records.iter().filter(|r| task.matches(r)).collect();
        if records.is_empty() {
            return Err(Error::ScenarioMismatch(format!("task {t} selects no training records")));
        }
        if let Some(rng) = shuffler.as_mut() {
            rng.shuffle(&mut records);
        }
        observed.extend(records.iter().map(|r| r.class_label));
        learner.train_task(&records)?;
        audit(learner, num_classes, dim)?;

        let candidates = match spec.mode {
            ScenarioMode::ClassIncremental => spec.classes_through(t),
            ScenarioMode::DomainIncremental => observed.clone(),
        };
        for (i, (eval, members)) in spec.eval_sets.iter().zip(&eval_members).enumerate() {
            let ready = match (&spec.mode, &eval.selection) {
                (ScenarioMode::ClassIncremental, super::split::Selection::Classes(c)) => c.is_subset(&candidates),
                _ => true,
            };
            if !ready {
                continue;
            }
            let queries: Vec<&[f32]> = members.iter().map(|r| r.vector.as_slice()).collect();
            let predicted = learner.predict_batch(&queries, &candidates)?;
            let correct = predicted.iter().zip(members).filter(|(p, r)| **p == r.class_label).count();
            matrix.record(t, i, correct as u64, members.len() as u64);
        }
    }

    let average = average_accuracy(&matrix)?;
    let weighted = sample_weighted_accuracy(&matrix)?;
    let forgetting = if spec.mode == ScenarioMode::ClassIncremental && spec.num_tasks() >= 2 {
        forgetting(&matrix).ok()
    } else {
        None
    };
    Ok(RunReport::new(
        learner.describe(),
        learner.name().to_string(),
        spec.clone(),
        matrix,
        average,
        weighted,
        forgetting,
        scenario_fingerprint(spec, train, test),
    ))
}

//! After-task × eval-set accuracies and the metrics derived from them.

use serde::{Deserialize, Serialize};

use super::split::ScenarioMode;
use crate::error::{Error, Result};

/// `values[t][i]` is the accuracy on eval set `i` after training task `t`;
/// `None` marks a cell that was not evaluated (classes not yet seen).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    pub mode: ScenarioMode,
    pub values: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<Option<u64>>>,
}

impl AccuracyMatrix {
    pub fn new(mode: ScenarioMode, tasks: usize, eval_sets: usize) -> Self {
        Self {
            mode,
            values: vec![vec![None; eval_sets]; tasks],
            counts: vec![vec![None; eval_sets]; tasks],
        }
    }

    /// Matrix from explicit values, without sample counts.
    pub fn from_values(mode: ScenarioMode, values: Vec<Vec<Option<f64>>>) -> Self {
        let counts = values.iter().map(|row| vec![None; row.len()]).collect();
        Self { mode, values, counts }
    }

    pub fn num_tasks(&self) -> usize {
        self.values.len()
    }

    pub fn num_eval_sets(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Records `correct` of `count`; the ratio is formed once here.
    pub fn record(&mut self, task: usize, eval_set: usize, correct: u64, count: u64) {
        debug_assert!(correct <= count && count > 0);
        self.values[task][eval_set] = Some(correct as f64 / count as f64);
        self.counts[task][eval_set] = Some(count);
    }

    pub fn get(&self, task: usize, eval_set: usize) -> Option<f64> {
        self.values.get(task)?.get(eval_set).copied().flatten()
    }

    fn final_row(&self) -> Result<Vec<f64>> {
        let row = self
            .values
            .last()
            .ok_or_else(|| Error::MetricUndefined("matrix has no rows".into()))?;
        if row.is_empty() {
            return Err(Error::MetricUndefined("matrix has no eval sets".into()));
        }
        row.iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::MetricUndefined(format!("final row is missing eval set {i}"))))
            .collect()
    }
}

/// Plain mean of the final row over eval sets.
pub fn average_accuracy(matrix: &AccuracyMatrix) -> Result<f64> {
    let row = matrix.final_row()?;
    Ok(row.iter().sum::<f64>() / row.len() as f64)
}

/// Final-row accuracy with every evaluated sample weighted equally.
pub fn sample_weighted_accuracy(matrix: &AccuracyMatrix) -> Result<f64> {
    let row = matrix.final_row()?;
    let counts = matrix.counts.last().expect("final_row checked rows");
    let mut correct = 0.0;
    let mut total = 0u64;
    for (v, c) in row.iter().zip(counts) {
        let c = c.ok_or_else(|| Error::MetricUndefined("final row has no sample counts".into()))?;
        correct += (v * c as f64).round();
        total += c;
    }
    Ok(correct / total as f64)
}

/// Mean over earlier tasks of (best accuracy before the last task) minus
/// (accuracy after the last task). Differences are not clamped.
pub fn forgetting(matrix: &AccuracyMatrix) -> Result<f64> {
    if matrix.mode != ScenarioMode::ClassIncremental {
        return Err(Error::MetricUndefined("forgetting needs a class-incremental run".into()));
    }
    let t = matrix.num_tasks();
    if t < 2 {
        return Err(Error::MetricUndefined("forgetting needs at least two tasks".into()));
    }
    let last = matrix.final_row()?;
    if last.len() < t - 1 {
        return Err(Error::MetricUndefined("fewer eval sets than earlier tasks".into()));
    }
    let mut total = 0.0;
    for (i, &final_acc) in last.iter().enumerate().take(t - 1) {
        let best = (i..t - 1)
            .filter_map(|row| matrix.get(row, i))
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            .ok_or_else(|| Error::MetricUndefined(format!("eval set {i} never evaluated before the last task")))?;
        total += best - final_acc;
    }
    Ok(total / (t - 1) as f64)
}

//! Scenario descriptions: which records form each task and each eval set.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingRecord;
use crate::error::{Error, Result};
use crate::rng::Xoshiro256StarStar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    ClassIncremental,
    DomainIncremental,
}

impl std::str::FromStr for ScenarioMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "class_incremental" | "class" | "ci" => Ok(ScenarioMode::ClassIncremental),
            "domain_incremental" | "domain" | "di" => Ok(ScenarioMode::DomainIncremental),
            other => Err(Error::Unknown {
                kind: "scenario mode",
                name: other.to_string(),
            }),
        }
    }
}

/// A subset of a dataset, chosen by class label or by task/domain id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Classes(BTreeSet<u32>),
    Domains(BTreeSet<u32>),
}

impl Selection {
    pub fn matches(&self, record: &EmbeddingRecord) -> bool {
        match self {
            Selection::Classes(c) => c.contains(&record.class_label),
            Selection::Domains(d) => d.contains(&record.task_id),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Selection::Classes(s) | Selection::Domains(s) => s.is_empty(),
        }
    }

    fn ids(&self) -> &BTreeSet<u32> {
        match self {
            Selection::Classes(s) | Selection::Domains(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvalSet {
    pub name: String,
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: ScenarioMode,
    /// Training tasks in stream order.
    pub tasks: Vec<Selection>,
    pub eval_sets: Vec<EvalSet>,
    pub seed: Option<u64>,
}

/// Group of item `position` when `n` items are cut into `groups` blocks of
/// `n / groups`, the last block absorbing the remainder.
pub fn label_order_group(position: usize, n: usize, groups: usize) -> usize {
    debug_assert!(groups > 0 && groups <= n);
    let size = n / groups;
    (position / size).min(groups - 1)
}

/// Partitions labels `0..num_classes` into `num_tasks` disjoint groups.
///
/// Without a seed the partition follows label order; with one, labels are
/// shuffled first. When `num_tasks` does not divide `num_classes` the last
/// task takes the remainder.
pub fn make_class_incremental_split(num_classes: u32, num_tasks: u32, seed: Option<u64>) -> Result<SplitSpec> {
    if num_tasks == 0 {
        return Err(Error::InvalidSplit("num_tasks must be positive".into()));
    }
    if num_tasks > num_classes {
        return Err(Error::InvalidSplit(format!(
            "num_tasks {num_tasks} exceeds num_classes {num_classes}"
        )));
    }
    let mut labels: Vec<u32> = (0..num_classes).collect();
    if let Some(s) = seed {
        Xoshiro256StarStar::seed_from_u64(s).shuffle(&mut labels);
    }
    let mut groups = vec![BTreeSet::new(); num_tasks as usize];
    for (pos, &label) in labels.iter().enumerate() {
        groups[label_order_group(pos, num_classes as usize, num_tasks as usize)].insert(label);
    }
    let eval_sets = groups
        .iter()
        .enumerate()
        .map(|(i, g)| EvalSet {
            name: format!("task_{i}"),
            selection: Selection::Classes(g.clone()),
        })
        .collect();
    Ok(SplitSpec {
        mode: ScenarioMode::ClassIncremental,
        tasks: groups.into_iter().map(Selection::Classes).collect(),
        eval_sets,
        seed,
    })
}

/// One task per training domain, in the given order, and a single eval set
/// covering all test domains.
pub fn make_domain_incremental_split(train_task_ids: &[u32], test_task_ids: &[u32]) -> Result<SplitSpec> {
    let spec = SplitSpec {
        mode: ScenarioMode::DomainIncremental,
        tasks: train_task_ids
            .iter()
            .map(|&id| Selection::Domains(BTreeSet::from([id])))
            .collect(),
        eval_sets: vec![EvalSet {
            name: "test".into(),
            selection: Selection::Domains(test_task_ids.iter().copied().collect()),
        }],
        seed: None,
    };
    spec.check()?;
    Ok(spec)
}

impl SplitSpec {
    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    /// Checks structural invariants independent of any dataset.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSplit(m));
        if self.tasks.is_empty() {
            return bad("no training tasks".into());
        }
        if self.eval_sets.is_empty() {
            return bad("no evaluation sets".into());
        }
        if let Some(i) = self.tasks.iter().position(Selection::is_empty) {
            return bad(format!("task {i} selects nothing"));
        }
        if let Some(i) = self.eval_sets.iter().position(|e| e.selection.is_empty()) {
            return bad(format!("eval set {i} selects nothing"));
        }
        let expected = |s: &Selection| match self.mode {
            ScenarioMode::ClassIncremental => matches!(s, Selection::Classes(_)),
            ScenarioMode::DomainIncremental => matches!(s, Selection::Domains(_)),
        };
        if !self.tasks.iter().all(expected) || !self.eval_sets.iter().all(|e| expected(&e.selection)) {
            return bad(format!("selections do not match {:?} mode", self.mode));
        }
        let mut seen = BTreeSet::new();
        for (i, task) in self.tasks.iter().enumerate() {
            for id in task.ids() {
                if !seen.insert(*id) {
                    return bad(match self.mode {
                        ScenarioMode::ClassIncremental => format!("class {id} appears in more than one task (task {i})"),
                        ScenarioMode::DomainIncremental => format!("domain {id} is trained more than once (task {i})"),
                    });
                }
            }
        }
        if self.mode == ScenarioMode::DomainIncremental {
            for e in &self.eval_sets {
                if let Some(id) = e.selection.ids().intersection(&seen).next() {
                    return bad(format!("domain {id} is used for both training and testing"));
                }
            }
        }
        Ok(())
    }

    /// Every training selection collapsed into one task; eval sets kept.
    pub fn joint(&self) -> SplitSpec {
        let all: BTreeSet<u32> = self.tasks.iter().flat_map(|t| t.ids().iter().copied()).collect();
        let task = match self.mode {
            ScenarioMode::ClassIncremental => Selection::Classes(all),
            ScenarioMode::DomainIncremental => Selection::Domains(all),
        };
        SplitSpec {
            tasks: vec![task],
            ..self.clone()
        }
    }

    /// Reorders tasks; in class-incremental mode eval sets follow their task.
    pub fn with_task_order(&self, order: &[usize]) -> Result<SplitSpec> {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..self.tasks.len()).collect::<Vec<_>>() {
            return Err(Error::InvalidSplit("task order is not a permutation".into()));
        }
        let mut out = self.clone();
        out.tasks = order.iter().map(|&i| self.tasks[i].clone()).collect();
        if self.mode == ScenarioMode::ClassIncremental && self.eval_sets.len() == self.tasks.len() {
            out.eval_sets = order.iter().map(|&i| self.eval_sets[i].clone()).collect();
        }
        Ok(out)
    }

    /// Classes named by the first `through + 1` class-incremental tasks.
    pub fn classes_through(&self, through: usize) -> BTreeSet<u32> {
        self.tasks
            .iter()
            .take(through + 1)
            .filter_map(|t| match t {
                Selection::Classes(c) => Some(c.iter().copied()),
                Selection::Domains(_) => None,
            })
            .flatten()
            .collect()
    }

    /// Largest class label any task or eval set refers to.
    pub fn max_class(&self) -> Option<u32> {
        self.tasks
            .iter()
            .chain(self.eval_sets.iter().map(|e| &e.selection))
            .filter_map(|s| match s {
                Selection::Classes(c) => c.iter().next_back().copied(),
                Selection::Domains(_) => None,
            })
            .max()
    }
}

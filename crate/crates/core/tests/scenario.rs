mod common;

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use common::oracle_forgetting;
use proto_cl::classifier::{ProbeConfig, SquaredEuclidean};
use proto_cl::config::{run_experiment, ExperimentConfig};
use proto_cl::embedding::{generate_synthetic, write_dataset, Dataset, EmbeddingRecord, SyntheticSpec};
use proto_cl::protocol::{
    make_class_incremental_split, make_domain_incremental_split, run_scenario, Learner, LearnerContext,
    LearnerRegistry, LinearProbeLearner, NmcLearner, RunOptions, ScenarioMode, MATRIX_CSV_HEADER,
};
use proto_cl::{Error, Result};

fn synthetic(classes: u32, dim: usize, per_class: usize, sep: f64, seed: u64, tasks: u32) -> Dataset {
    let mut spec = SyntheticSpec::new(classes, dim, per_class);
    spec.class_separation = sep;
    spec.seed = seed;
    spec.num_tasks = tasks;
    Dataset::from_records(generate_synthetic(&spec).unwrap()).unwrap()
}

fn nmc(dim: usize) -> NmcLearner {
    NmcLearner::new(dim, Arc::new(SquaredEuclidean)).unwrap()
}

#[test]
fn two_task_separable_run_is_perfect() {
    let train = synthetic(4, 16, 50, 10.0, 1, 2);
    let test = synthetic(4, 16, 20, 10.0, 2, 2);
    let spec = make_class_incremental_split(4, 2, None).unwrap();
    let report = run_scenario(&train, &test, &spec, &mut nmc(16), &RunOptions::default()).unwrap();
    assert_eq!(report.matrix.values, vec![vec![Some(1.0), None], vec![Some(1.0), Some(1.0)]]);
    assert_eq!(report.average_accuracy, 1.0);
    assert_eq!(report.forgetting, Some(0.0));
    assert_eq!(report.summary(), "Average Acc: 100.00\nForgetting: 0.00\n");

    let mut csv = Vec::new();
    report.write_matrix_csv(&mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], MATRIX_CSV_HEADER.join(","));
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.ends_with(",1,40") || l.ends_with(",1.0,40")), "{csv}");
}

#[test]
fn single_task_has_no_forgetting() {
    let train = synthetic(5, 8, 40, 3.0, 1, 1);
    let test = synthetic(5, 8, 40, 3.0, 2, 1);
    let spec = make_class_incremental_split(5, 1, None).unwrap();
    let report = run_scenario(&train, &test, &spec, &mut nmc(8), &RunOptions::default()).unwrap();
    assert_eq!(report.matrix.num_tasks(), 1);
    assert_eq!(report.average_accuracy, report.matrix.get(0, 0).unwrap());
    assert_eq!(report.forgetting, None);
    assert!(!report.summary().contains("Forgetting"));
}

#[test]
fn domain_incremental_single_cell() {
    let mut train = synthetic(3, 8, 30, 6.0, 1, 1);
    let mut test = synthetic(3, 8, 30, 6.0, 2, 1);
    for r in train.records.iter_mut() {
        r.task_id = r.class_label % 2;
    }
    for r in test.records.iter_mut() {
        r.task_id = 2;
    }
    let train = Dataset::from_records(train.records).unwrap();
    let test = Dataset::from_records(test.records).unwrap();
    let spec = make_domain_incremental_split(&[0, 1], &[2]).unwrap();
    assert_eq!(spec.mode, ScenarioMode::DomainIncremental);
    let report = run_scenario(&train, &test, &spec, &mut nmc(8), &RunOptions::default()).unwrap();
    assert_eq!(report.matrix.num_tasks(), 2);
    assert_eq!(report.matrix.num_eval_sets(), 1);
    // Every row is scored in the domain setting.
    assert!(report.matrix.get(0, 0).is_some());
    assert_eq!(report.average_accuracy, report.matrix.get(1, 0).unwrap());
    assert_eq!(report.forgetting, None);
}

#[test]
fn final_row_is_independent_of_task_order() {
    let train = synthetic(6, 12, 60, 1.0, 1, 1);
    let test = synthetic(6, 12, 30, 1.0, 2, 1);
    let spec = make_class_incremental_split(6, 3, Some(9)).unwrap();
    let base = run_scenario(&train, &test, &spec, &mut nmc(12), &RunOptions::default()).unwrap();
    for order in [[2, 0, 1], [1, 2, 0], [2, 1, 0]] {
        let reordered = spec.with_task_order(&order).unwrap();
        let report = run_scenario(&train, &test, &reordered, &mut nmc(12), &RunOptions::default()).unwrap();
        let last = report.matrix.values.last().unwrap();
        let base_last = base.matrix.values.last().unwrap();
        for (new_pos, &old) in order.iter().enumerate() {
            assert_eq!(last[new_pos], base_last[old], "order {order:?}");
        }
    }
}

#[test]
fn shuffling_within_tasks_keeps_the_final_row() {
    let train = synthetic(6, 12, 60, 1.0, 1, 1);
    let test = synthetic(6, 12, 30, 1.0, 2, 1);
    let spec = make_class_incremental_split(6, 3, None).unwrap();
    let plain = run_scenario(&train, &test, &spec, &mut nmc(12), &RunOptions::default()).unwrap();
    let shuffled = run_scenario(&train, &test, &spec, &mut nmc(12), &RunOptions { shuffle_seed: Some(4) }).unwrap();
    assert_eq!(plain.matrix.values, shuffled.matrix.values);
}

/// Records the candidate sets it is queried with.
struct Recorder {
    inner: NmcLearner,
    seen: Arc<Mutex<Vec<BTreeSet<u32>>>>,
}

impl Learner for Recorder {
    fn name(&self) -> &str {
        "recorder"
    }
    fn train_task(&mut self, records: &[&EmbeddingRecord]) -> Result<()> {
        self.inner.train_task(records)
    }
    fn predict_batch(&self, queries: &[&[f32]], candidates: &BTreeSet<u32>) -> Result<Vec<u32>> {
        self.seen.lock().unwrap().push(candidates.clone());
        self.inner.predict_batch(queries, candidates)
    }
    fn state_bytes(&self) -> usize {
        self.inner.state_bytes()
    }
}

#[test]
fn label_space_grows_monotonically() {
    let train = synthetic(6, 4, 10, 5.0, 1, 1);
    let test = synthetic(6, 4, 10, 5.0, 2, 1);
    let spec = make_class_incremental_split(6, 3, Some(2)).unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let mut learner = Recorder {
        inner: nmc(4),
        seen: seen.clone(),
    };
    let report = run_scenario(&train, &test, &spec, &mut learner, &RunOptions::default()).unwrap();
    let seen = seen.lock().unwrap();
    // Scored cells: 1 + 2 + 3.
    assert_eq!(seen.len(), 6);
    let mut prev = BTreeSet::new();
    let mut cell = 0;
    for t in 0..3 {
        let expected = spec.classes_through(t);
        assert!(prev.is_subset(&expected));
        for _ in 0..=t {
            assert_eq!(seen[cell], expected);
            cell += 1;
        }
        prev = expected;
    }
    assert_eq!(report.learner, "recorder");
}

#[test]
fn counts_account_for_every_test_record() {
    let train = synthetic(5, 4, 10, 5.0, 1, 1);
    let mut test = synthetic(5, 4, 10, 5.0, 2, 1);
    // Unequal eval-set sizes.
    test.records.retain(|r| r.class_label != 4 || r.vector[0] > 0.0);
    let test = Dataset::from_records(test.records).unwrap();
    let spec = make_class_incremental_split(5, 2, None).unwrap();
    let report = run_scenario(&train, &test, &spec, &mut nmc(4), &RunOptions::default()).unwrap();
    let last: u64 = report.matrix.counts.last().unwrap().iter().map(|c| c.unwrap()).sum();
    assert_eq!(last, test.records.len() as u64);
    assert!(report.notes.iter().any(|n| n.contains("weight")), "{:?}", report.notes);
}

struct Hoarder(Vec<EmbeddingRecord>);

impl Learner for Hoarder {
    fn name(&self) -> &str {
        "hoarder"
    }
    fn train_task(&mut self, records: &[&EmbeddingRecord]) -> Result<()> {
        self.0.extend(records.iter().map(|r| (*r).clone()));
        Ok(())
    }
    fn predict_batch(&self, queries: &[&[f32]], candidates: &BTreeSet<u32>) -> Result<Vec<u32>> {
        Ok(vec![*candidates.iter().next().unwrap(); queries.len()])
    }
    fn state_bytes(&self) -> usize {
        self.0.iter().map(|r| r.vector.len() * 4 + 8).sum()
    }
}

#[test]
fn retaining_raw_samples_fails_the_audit() {
    let train = synthetic(2, 8, 200, 5.0, 1, 1);
    let test = synthetic(2, 8, 10, 5.0, 2, 1);
    let spec = make_class_incremental_split(2, 1, None).unwrap();
    let err = run_scenario(&train, &test, &spec, &mut Hoarder(Vec::new()), &RunOptions::default()).unwrap_err();
    assert!(matches!(err, Error::StateBoundExceeded { .. }), "{err}");
}

#[test]
fn continual_and_joint_agree() {
    let train = synthetic(8, 10, 50, 1.0, 1, 1);
    let test = synthetic(8, 10, 25, 1.0, 2, 1);
    let spec = make_class_incremental_split(8, 4, Some(1)).unwrap();
    let mut cont = nmc(10);
    let mut joint = nmc(10);
    let a = run_scenario(&train, &test, &spec, &mut cont, &RunOptions::default()).unwrap();
    let b = run_scenario(&train, &test, &spec.joint(), &mut joint, &RunOptions::default()).unwrap();
    assert_eq!(a.matrix.values.last(), b.matrix.values.last());
    assert!(common::table_vs_table(cont.table(), joint.table()).unwrap() <= 1e-9);
    assert_eq!(a.forgetting, Some(oracle_forgetting(&a.matrix.values)));
    assert_eq!(b.forgetting, None);
}

#[test]
fn probe_runs_are_reproducible() {
    let train = synthetic(4, 6, 40, 4.0, 1, 1);
    let test = synthetic(4, 6, 20, 4.0, 2, 1);
    let spec = make_class_incremental_split(4, 2, None).unwrap();
    let config = ProbeConfig {
        epochs: 5,
        batch_size: 16,
        learning_rate: 0.05,
        seed: 11,
        ..Default::default()
    };
    let run = || {
        let mut l = LinearProbeLearner::new(6, 4, config).unwrap();
        run_scenario(&train, &test, &spec, &mut l, &RunOptions::default()).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.learner, "linear_probe");
}

#[test]
fn registry_accepts_custom_learners() {
    let mut reg = LearnerRegistry::default();
    reg.register("hoarder", |_ctx: &LearnerContext| Ok(Box::new(Hoarder(Vec::new())) as Box<dyn Learner>));
    let ctx = LearnerContext::new(4, 2);
    assert_eq!(reg.create("hoarder", &ctx).unwrap().name(), "hoarder");
    assert!(matches!(reg.create("missing", &ctx), Err(Error::Unknown { .. })));
}

#[test]
fn experiment_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let train_path = dir.path().join("train.embd");
    let test_path = dir.path().join("test.embd");
    write_dataset(&synthetic(4, 8, 30, 10.0, 1, 2).records, 8, &train_path).unwrap();
    write_dataset(&synthetic(4, 8, 10, 10.0, 2, 2).records, 8, &test_path).unwrap();
    let config = ExperimentConfig {
        train: Some(train_path.clone()),
        test: Some(test_path.clone()),
        num_tasks: Some(2),
        ..Default::default()
    };
    let report = run_experiment(&config, &LearnerRegistry::default()).unwrap();
    assert_eq!(report.average_accuracy, 1.0);
    assert!(report.config.as_deref().unwrap().contains("num_tasks = 2"));
    assert_eq!(report.fingerprint.len(), 64);

    // Flip one coordinate to NaN.
    let mut bytes = std::fs::read(&test_path).unwrap();
    bytes[28 + 8..28 + 12].copy_from_slice(&f32::NAN.to_le_bytes());
    std::fs::write(&test_path, bytes).unwrap();
    match run_experiment(&config, &LearnerRegistry::default()) {
        Err(Error::InvalidDataset { violations, .. }) => assert_eq!(violations.len(), 1),
        other => panic!("expected invalid dataset, got {other:?}"),
    }

    let missing = ExperimentConfig {
        test: Some(dir.path().join("nope.embd")),
        ..config
    };
    assert!(run_experiment(&missing, &LearnerRegistry::default()).unwrap_err().is_io());
}

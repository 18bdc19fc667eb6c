//! Class- and domain-incremental scenarios over embedding datasets.

mod learner;
mod matrix;
mod report;
mod run;
pub mod split;

pub use learner::{Learner, LearnerContext, LearnerFactory, LearnerRegistry, LinearProbeLearner, NmcLearner};
pub use matrix::{average_accuracy, forgetting, sample_weighted_accuracy, AccuracyMatrix};
pub use report::{
    comparison_rows, percent, render_comparison_table, write_comparison_csv, write_matrix_csv, ComparisonRow,
    RunReport, MATRIX_CSV_HEADER,
};
pub use run::{run_scenario, scenario_fingerprint, RunOptions, STATE_SLACK_PER_CLASS};
pub use split::{
    make_class_incremental_split, make_domain_incremental_split, EvalSet, ScenarioMode, Selection, SplitSpec,
};

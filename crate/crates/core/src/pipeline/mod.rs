//! End-to-end orchestration: episodes, suites, and the dataset, training and
//! evaluation jobs behind the command-line verbs.

mod config;
mod episode;
mod learning;
mod suite;

pub use config::{
    ActionBackendKind, Backends, Perception, PlannerBackend, PlannerSettings, RunConfig, SubgoalBackendKind, Workspace,
};
pub use episode::{
    plan_only, run_episode, run_episode_with, ActionBackend, ActionContext, Artifacts, EpisodeFailure, EpisodeReport,
    ModelActions, RandomActions, RoundRecord, SearchActions, FAILURE_FILE, REPORT_FILE,
};
pub use learning::{
    build_datasets, evaluate, load_datasets, make_dataset, normalized_mse, run_pretrain, DatasetJob, Datasets, EvalJob,
    EvalRow, EvalTable, PretrainJob, EVAL_METHODS, PAIRS_DIR, TEST_DIR, TRAIN_DIR,
};
pub use suite::{run_suite, EpisodeEntry, SuiteOptions, SuiteRow, SuiteSummary};

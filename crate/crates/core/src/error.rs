use std::path::PathBuf;

use crate::sim::TaskKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("step called on a terminated episode")]
    TerminalState,

    #[error("action {action} is not valid for {task:?}")]
    InvalidAction { action: String, task: TaskKind },

    #[error("option index {index} is outside the plan of length {plan_len}")]
    InvalidOption { index: usize, plan_len: usize },

    #[error("failure dataset is empty; run failure discovery first")]
    EmptyDataset,

    #[error("failure dataset {path} not found; create it with `rechain discover --task <task> --out {path}`")]
    MissingDataset { path: PathBuf },

    #[error(
        "failure record was produced with config hash {found}, current config hashes to {expected}"
    )]
    ConfigMismatch { expected: String, found: String },

    #[error("replayed observation differs from the stored observation for seed {seed}")]
    ReplayMismatch { seed: u64 },

    #[error("malformed dataset at line {line}: {reason}")]
    Dataset { line: usize, reason: String },

    #[error("observation has dimension {got}, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite PPO loss at update {update}: policy {policy_loss}, value {value_loss}")]
    NonFiniteLoss {
        update: usize,
        policy_loss: f64,
        value_loss: f64,
    },

    #[error("outcomes assigned by the lazy gate must not be used as classifier training data")]
    LazyOutcomeRecorded,

    #[error("precondition model has not been fitted")]
    Unfitted,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

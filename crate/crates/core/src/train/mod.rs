//! Architecture search, cascade training and baseline trainers.

pub mod baseline;
pub mod cascade;
pub mod hyper;
pub mod search;

pub use baseline::{train_baseline, train_softmax, AugConfig, Baseline, BaselineKind, ENSEMBLE_SIZE};
pub use cascade::{
    accumulate_sample, cascade_train, reset_heads_to_prior, sample_loss, train_deep_exit, CascadeReport, EpochStats,
    LossExits, PhaseReport, HEAD_PRIOR_MARGIN,
};
pub use hyper::{split_validation, Hyper};
pub use search::{
    argmax_score, read_table, search, search_with, train_candidate, CandidateRow, CandidateStatus, ScoreDenominator,
    SearchResult, SearchSpace,
};

//! Single-head attention around the rotary maps, plus deterministic
//! long-range probes.

mod bucket;
mod layer;
mod probe;

pub use bucket::{bucket_positional_loss, BucketedLoss, DEFAULT_BUCKET_WIDTH};
pub use layer::{
    attention_backward, attention_forward, gradient_check, random_inputs, relative_error,
    AttentionConfig, AttentionGrads, AttentionOutput, GRADCHECK_STEP, MAX_GRADCHECK_PARAMS,
};
pub use probe::{
    allones_attention_distribution, allones_attention_mass, make_first_sentence_task,
    probe_mass_csv, score_first_sentence, FirstSentenceScore, ProbeTask,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttentionError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{name} has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        name: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("{0} contains NaN")]
    NanInput(&'static str),
    #[error("finite differences limited to {max} entries per tensor, got {params}")]
    TooLarge { params: usize, max: usize },
    #[error("target {target} out of range for seq_len {seq_len}")]
    TargetOutOfRange { target: usize, seq_len: usize },
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("empty loss sequence")]
    EmptyInput,
}

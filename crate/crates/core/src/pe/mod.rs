//! RoPE-family embedding maps and the geometry of their images.
//!
//! A real vector `x` of even length `d` is read as `d/2` complex pairs
//! `x_{2j} + i x_{2j+1}`. Pair `j` is rotated by `theta_j * t` at position `t`,
//! where `theta_j` depends on the [`PeKind`]:
//!
//! | kind       | `theta_j`                 |
//! |------------|---------------------------|
//! | RoPE       | `b^(-2j/d)`               |
//! | RoPE-PI    | `alpha * b^(-2j/d)`       |
//! | RoPE-ABF   | `(beta * b)^(-2j/d)`      |
//! | xPos-ABF   | `(beta * b)^(-2j/d)`, plus a per-pair scale `zeta_j^(+-t/s)` |

mod decay;
mod embed;
mod geometry;
mod helix;
mod variant;

pub use decay::{decay_curve, decay_curve_with, decay_score, DecayCurve};
pub use embed::{gaussian_vectors, inner_product, sine_similarity, EmbeddingImage};
pub use geometry::{
    embedding_drift, embedding_drift_with, min_pairwise_distance, min_pairwise_distance_with,
    ClosestPair,
};
pub use helix::{helix_trace, HelixSample, HelixTrace};
pub use variant::{
    PeKind, PeVariant, Role, DEFAULT_BASE, DEFAULT_XPOS_SCALE_BASE, DEFAULT_XPOS_SMOOTHING,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("index {index} out of range for {len} pairs")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero-norm input")]
    ZeroNorm,
    #[error("negative distance {0}")]
    NegativeDistance(i64),
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("empty input set")]
    EmptySet,
}

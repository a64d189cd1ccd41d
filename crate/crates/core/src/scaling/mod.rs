//! Context-length scaling fits and training-curriculum cost accounting.

mod curriculum;
mod fit;

pub use curriculum::{
    calibrate_cost_ratio, curriculum_flops, AffineTokenCost, CurriculumSchedule, FlopsEstimate,
};
pub use fit::{
    doubling_loss_factor, fit_power_law, fit_power_law_with, predict_loss, prediction_csv,
    DoublingFactor, LossPoint, PowerLawFit, BETA_GRID_KNOTS, BETA_GRID_MAX, BETA_GRID_MIN,
    MAX_ITERATIONS, STEP_TOLERANCE,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalingError {
    #[error("too few points: need at least 3 distinct context lengths, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("context length must be positive")]
    NonPositiveContext,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("missing baseline row (switch fraction 0)")]
    MissingBaseline,
}

//! Consecutive-image sine similarity and its bounds.
//!
//! For a norm-preserving rotary map the sine similarity between the images of
//! `x` at positions `n+1` and `n` is
//!
//! ```text
//! |x|^2 sin(f(x,n+1), f(x,n)) = sum_j s_j sin(theta_j),   s_j = x_{2j}^2 + x_{2j+1}^2
//! ```
//!
//! so it is sandwiched between `(min_j s_j / |x|^2) C_d` and
//! `(max_j s_j / |x|^2) C_d` with `C_d = sum_j sin(theta_j)`. As `d` grows,
//! the per-pair mean `(2/d) C_d` converges to a value bracketed by
//! [`limit_bounds`], roughly `alpha / ln b` for position interpolation and
//! `1 / ln(beta b)` for an adjusted base.

use serde::Serialize;
use thiserror::Error;

use crate::exec::Exec;
use crate::pe::{sine_similarity, PeError, PeKind, PeVariant};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("unsupported kind {0}: the bound covers RoPE, RoPE-PI and RoPE-ABF only")]
    UnsupportedKind(&'static str),
    #[error("expected kind {expected}, got {got}")]
    WrongKind {
        expected: &'static str,
        got: &'static str,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("zero vector")]
    ZeroVector,
    #[error(transparent)]
    Pe(#[from] PeError),
}

fn check_theorem_kind(variant: &PeVariant) -> Result<(), TheoryError> {
    match variant.kind() {
        PeKind::XposAbf => Err(TheoryError::UnsupportedKind(variant.kind().name())),
        _ => {
            // sine arguments must lie in (0, 1]; theta_0 is the largest
            let top = variant.angle(0);
            if top > 1.0 || top <= 0.0 {
                return Err(TheoryError::InvalidParameter(format!(
                    "largest rotation angle {top} outside (0, 1]"
                )));
            }
            Ok(())
        }
    }
}

/// `C_d = sum_j sin(theta_j)` over the `d/2` pairs.
pub fn c_d(variant: &PeVariant) -> Result<f64, TheoryError> {
    check_theorem_kind(variant)?;
    Ok(variant.angles().iter().map(|t| t.sin()).sum())
}

/// Per-pair mean `(2/d) C_d`; this is the quantity with a finite
/// large-dimension limit, and equals the consecutive sine similarity of an
/// all-ones vector.
pub fn c_d_mean(variant: &PeVariant) -> Result<f64, TheoryError> {
    Ok(c_d(variant)? / variant.pairs() as f64)
}

/// Analytic bounds on the large-dimension limit of the per-pair mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitBounds {
    pub lower: f64,
    pub upper: f64,
    pub approximation: f64,
    pub variant: PeVariant,
}

pub fn limit_bounds(variant: &PeVariant) -> Result<LimitBounds, TheoryError> {
    check_theorem_kind(variant)?;
    let pi = std::f64::consts::PI;
    let (lower, upper, approximation) = match variant.pi_alpha() {
        Some(alpha) => {
            let b = variant.base_frequency();
            let inv_log = b.ln().recip();
            let head = (b - 1.0) / b;
            let tail = (alpha / pi) * (b * b - 1.0) / (b * b);
            (
                alpha * inv_log * (head - tail),
                alpha * inv_log * head,
                alpha * inv_log,
            )
        }
        None => {
            // plain RoPE is the adjusted-base case with beta = 1
            let bb = variant.effective_base();
            let inv_log = bb.ln().recip();
            let head = (bb - 1.0) / bb;
            let tail = (bb * bb - 1.0) / (pi * bb * bb);
            (inv_log * (head - tail), inv_log * head, inv_log)
        }
    };
    Ok(LimitBounds {
        lower,
        upper,
        approximation,
        variant: *variant,
    })
}

/// Observed consecutive-image sine similarity with its sandwich bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub variant: PeVariant,
    pub position: u64,
    pub observed_similarity: f64,
    /// `(min_j s_j / |x|^2) C_d`
    pub lower_bound: f64,
    /// `(max_j s_j / |x|^2) C_d`
    pub upper_bound: f64,
    pub c_d: f64,
    pub pair_min: f64,
    pub pair_max: f64,
    pub x_norm_sq: f64,
    /// Looser corollary `(2 min_k x_k^2 / |x|^2) C_d`.
    pub component_lower_bound: f64,
    /// Looser corollary `(2 max_k x_k^2 / |x|^2) C_d`.
    pub component_upper_bound: f64,
}

impl TheoremCheck {
    /// Largest violation of the pair-level sandwich, relative to the
    /// magnitude of the bounds. Zero when the sandwich holds.
    pub fn relative_violation(&self) -> f64 {
        let scale = self.upper_bound.abs().max(f64::MIN_POSITIVE);
        let below = (self.lower_bound - self.observed_similarity).max(0.0);
        let above = (self.observed_similarity - self.upper_bound).max(0.0);
        below.max(above) / scale
    }

    pub fn holds(&self, rel_slack: f64) -> bool {
        self.relative_violation() <= rel_slack
    }
}

pub fn verify_consecutive_similarity(
    variant: &PeVariant,
    x: &[f64],
    n: u64,
) -> Result<TheoremCheck, TheoryError> {
    let c = c_d(variant)?;
    if x.len() != variant.head_dim() {
        return Err(PeError::DimensionMismatch {
            expected: variant.head_dim(),
            got: x.len(),
        }
        .into());
    }
    let x_norm_sq: f64 = x.iter().map(|v| v * v).sum();
    if x_norm_sq == 0.0 {
        return Err(TheoryError::ZeroVector);
    }
    let block_sums = x.chunks_exact(2).map(|p| p[0] * p[0] + p[1] * p[1]);
    let (pair_min, pair_max) = block_sums.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        (lo.min(s), hi.max(s))
    });
    let (comp_min, comp_max) = x
        .iter()
        .map(|v| v * v)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s), hi.max(s))
        });
    let a = variant.embed(x, (n + 1) as f64)?;
    let b = variant.embed(x, n as f64)?;
    let observed = sine_similarity(&a, &b)?;
    Ok(TheoremCheck {
        variant: *variant,
        position: n,
        observed_similarity: observed,
        lower_bound: pair_min / x_norm_sq * c,
        upper_bound: pair_max / x_norm_sq * c,
        c_d: c,
        pair_min,
        pair_max,
        x_norm_sq,
        component_lower_bound: 2.0 * comp_min / x_norm_sq * c,
        component_upper_bound: 2.0 * comp_max / x_norm_sq * c,
    })
}

/// Aggregate of a sandwich sweep over many vectors and positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSummary {
    pub checks: usize,
    pub max_relative_violation: f64,
    /// Largest spread of the observed similarity across positions for one `x`.
    pub max_position_spread: f64,
}

/// Runs [`verify_consecutive_similarity`] for every `x` and position,
/// one task per vector.
pub fn sandwich_sweep(
    exec: Exec,
    variant: &PeVariant,
    xs: &[Vec<f64>],
    positions: &[u64],
) -> Result<SweepSummary, TheoryError> {
    let per_x = exec.map_slice(xs, |x| -> Result<(f64, f64), TheoryError> {
        let mut worst = 0.0f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &n in positions {
            let check = verify_consecutive_similarity(variant, x, n)?;
            worst = worst.max(check.relative_violation());
            lo = lo.min(check.observed_similarity);
            hi = hi.max(check.observed_similarity);
        }
        Ok((worst, if positions.is_empty() { 0.0 } else { hi - lo }))
    });
    let mut summary = SweepSummary {
        checks: xs.len() * positions.len(),
        max_relative_violation: 0.0,
        max_position_spread: 0.0,
    };
    for r in per_x {
        let (v, s) = r?;
        summary.max_relative_violation = summary.max_relative_violation.max(v);
        summary.max_position_spread = summary.max_position_spread.max(s);
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GranularityComparison {
    pub pi_granularity: f64,
    pub abf_granularity: f64,
    /// `abf_granularity / pi_granularity`
    pub ratio: f64,
}

/// Compares the limiting consecutive-image similarity of an interpolated and
/// an adjusted-base encoding.
pub fn granularity_compare(
    pi: &PeVariant,
    abf: &PeVariant,
) -> Result<GranularityComparison, TheoryError> {
    if pi.kind() != PeKind::RopePi {
        return Err(TheoryError::WrongKind {
            expected: PeKind::RopePi.name(),
            got: pi.kind().name(),
        });
    }
    if abf.kind() != PeKind::RopeAbf {
        return Err(TheoryError::WrongKind {
            expected: PeKind::RopeAbf.name(),
            got: abf.kind().name(),
        });
    }
    let p = limit_bounds(pi)?.approximation;
    let a = limit_bounds(abf)?.approximation;
    Ok(GranularityComparison {
        pi_granularity: p,
        abf_granularity: a,
        ratio: a / p,
    })
}

/// Relative drop of the second rotation angle when the base moves from
/// `b_old` to `b_new`: `1 - b_new^(-2/d) / b_old^(-2/d)`.
///
/// The subscript is read as pair index `j = 1`, the fastest pair that the
/// base actually affects.
pub fn theta1_relative_difference(d: usize, b_old: f64, b_new: f64) -> Result<f64, TheoryError> {
    if d < 4 || !d.is_multiple_of(2) {
        return Err(TheoryError::InvalidParameter(format!(
            "d must be even and >= 4, got {d}"
        )));
    }
    if !(b_old > 1.0 && b_new >= b_old && b_new.is_finite()) {
        return Err(TheoryError::InvalidParameter(format!(
            "need b_new >= b_old > 1, got b_old={b_old}, b_new={b_new}"
        )));
    }
    let exponent = -2.0 / d as f64;
    Ok(1.0 - b_new.powf(exponent) / b_old.powf(exponent))
}

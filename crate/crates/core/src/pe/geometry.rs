//! Brute-force distances between embedding images over a range of integer
//! positions: the closest pair (granularity) and the max-min distance between
//! two encodings (drift).

use serde::Serialize;

use super::{EmbeddingImage, PeError, PeVariant};
use crate::exec::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosestPair {
    pub distance: f64,
    pub k: usize,
    pub j: usize,
}

fn images(variant: &PeVariant, x: &[f64], n: usize) -> Result<Vec<EmbeddingImage>, PeError> {
    (0..n).map(|t| variant.embed(x, t as f64)).collect()
}

pub fn min_pairwise_distance(
    variant: &PeVariant,
    x: &[f64],
    n_positions: usize,
) -> Result<ClosestPair, PeError> {
    min_pairwise_distance_with(Exec::default(), variant, x, n_positions)
}

/// Smallest `|f(x,k) - f(x,j)|` over `0 <= k < j < n_positions`. Ties go to
/// the lexicographically smallest `(k, j)`.
pub fn min_pairwise_distance_with(
    exec: Exec,
    variant: &PeVariant,
    x: &[f64],
    n_positions: usize,
) -> Result<ClosestPair, PeError> {
    if n_positions < 2 {
        return Err(PeError::InvalidRange(format!(
            "need at least 2 positions, got {n_positions}"
        )));
    }
    let imgs = images(variant, x, n_positions)?;
    let per_row = exec.map(n_positions - 1, |k| {
        let mut best = ClosestPair {
            distance: f64::INFINITY,
            k,
            j: k + 1,
        };
        for j in k + 1..n_positions {
            let d = imgs[k].distance(&imgs[j]);
            if d < best.distance {
                best = ClosestPair { distance: d, k, j };
            }
        }
        best
    });
    Ok(per_row
        .into_iter()
        .reduce(|a, b| if b.distance < a.distance { b } else { a })
        .expect("at least one row"))
}

pub fn embedding_drift(
    old: &PeVariant,
    new: &PeVariant,
    x_set: &[Vec<f64>],
    n_old: usize,
    n_new: usize,
) -> Result<f64, PeError> {
    embedding_drift_with(Exec::default(), old, new, x_set, n_old, n_new)
}

/// `max_x min_{k<n_old, j<n_new} |f_old(x,k) - f_new(x,j)|`.
pub fn embedding_drift_with(
    exec: Exec,
    old: &PeVariant,
    new: &PeVariant,
    x_set: &[Vec<f64>],
    n_old: usize,
    n_new: usize,
) -> Result<f64, PeError> {
    if x_set.is_empty() {
        return Err(PeError::EmptySet);
    }
    if n_old == 0 || n_new == 0 {
        return Err(PeError::InvalidRange(
            "position counts must be at least 1".into(),
        ));
    }
    if old.head_dim() != new.head_dim() {
        return Err(PeError::DimensionMismatch {
            expected: old.head_dim(),
            got: new.head_dim(),
        });
    }
    let per_x = exec.map_slice(x_set, |x| -> Result<f64, PeError> {
        let a = images(old, x, n_old)?;
        let b = images(new, x, n_new)?;
        Ok(a.iter()
            .flat_map(|p| b.iter().map(move |q| p.distance(q)))
            .fold(f64::INFINITY, f64::min))
    });
    per_x
        .into_iter()
        .try_fold(f64::NEG_INFINITY, |acc, d| Ok(acc.max(d?)))
}

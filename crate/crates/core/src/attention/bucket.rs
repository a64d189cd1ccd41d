use serde::Serialize;

use super::AttentionError;
use crate::export::{csv_table, fmt_f64};

pub const DEFAULT_BUCKET_WIDTH: usize = 500;

/// Per-position losses averaged over fixed-width position buckets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketedLoss {
    pub bucket_width: usize,
    pub bucket_means: Vec<f64>,
    pub n_positions: usize,
}

impl BucketedLoss {
    /// `bucket_index,mean_loss` CSV.
    pub fn to_csv(&self) -> String {
        csv_table(
            &["bucket_index", "mean_loss"],
            self.bucket_means
                .iter()
                .enumerate()
                .map(|(i, m)| vec![i.to_string(), fmt_f64(*m)]),
        )
    }
}

/// Mean loss over positions `[i*w, min((i+1)*w, n))`; the last bucket may be
/// partial.
pub fn bucket_positional_loss(
    losses: &[f64],
    bucket_width: usize,
) -> Result<BucketedLoss, AttentionError> {
    if losses.is_empty() {
        return Err(AttentionError::EmptyInput);
    }
    if bucket_width == 0 {
        return Err(AttentionError::InvalidSize(
            "bucket width must be positive".into(),
        ));
    }
    let bucket_means = losses
        .chunks(bucket_width)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    Ok(BucketedLoss {
        bucket_width,
        bucket_means,
        n_positions: losses.len(),
    })
}

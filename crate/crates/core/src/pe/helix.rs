use serde::Serialize;

use super::PeError;
use crate::export::{csv_table, fmt_f64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HelixSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Samples of the curve `(cos t, sin t, sin(a t))`, the 3-D projection of a
/// RoPE image onto the real and imaginary parts of pair 0 and the real part
/// of a slower pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HelixTrace {
    pub frequency_coefficient: f64,
    pub samples: Vec<HelixSample>,
}

impl HelixTrace {
    /// `t,x,y,z` CSV with 17 significant digits.
    pub fn to_csv(&self) -> String {
        csv_table(
            &["t", "x", "y", "z"],
            self.samples
                .iter()
                .map(|s| vec![fmt_f64(s.t), fmt_f64(s.x), fmt_f64(s.y), fmt_f64(s.z)]),
        )
    }
}

pub fn helix_point(a: f64, t: f64) -> HelixSample {
    let (y, x) = t.sin_cos();
    HelixSample {
        t,
        x,
        y,
        z: (a * t).sin(),
    }
}

/// Evenly spaced samples over `[t_start, t_end]`, both ends included.
pub fn helix_trace(
    a: f64,
    t_start: f64,
    t_end: f64,
    n_samples: usize,
) -> Result<HelixTrace, PeError> {
    if n_samples < 2 {
        return Err(PeError::InvalidRange(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() || !a.is_finite() {
        return Err(PeError::InvalidRange(format!(
            "need finite t_end > t_start, got [{t_start}, {t_end}]"
        )));
    }
    let step = (t_end - t_start) / (n_samples - 1) as f64;
    let samples = (0..n_samples)
        .map(|i| {
            let t = if i == n_samples - 1 {
                t_end
            } else {
                t_start + step * i as f64
            };
            helix_point(a, t)
        })
        .collect();
    Ok(HelixTrace {
        frequency_coefficient: a,
        samples,
    })
}

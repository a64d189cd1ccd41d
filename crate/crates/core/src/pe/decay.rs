use serde::Serialize;

use super::{PeError, PeVariant, Role};
use crate::exec::Exec;
use crate::export::{csv_table, fmt_f64};

/// Raw attention score between all-ones query and key as a function of
/// their distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCurve {
    pub distances: Vec<u64>,
    pub scores: Vec<f64>,
    pub normalized: bool,
    pub variant: PeVariant,
}

impl DecayCurve {
    /// `delta,score` CSV with 17 significant digits.
    pub fn to_csv(&self) -> String {
        csv_table(
            &["delta", "score"],
            self.distances
                .iter()
                .zip(&self.scores)
                .map(|(d, s)| vec![d.to_string(), fmt_f64(*s)]),
        )
    }
}

/// Closed-form all-ones score `sum_j 2 cos(theta_j * delta)`, times the xPos
/// decay `zeta_j^(delta/s)` for xPos variants.
pub fn decay_score(variant: &PeVariant, delta: f64) -> f64 {
    (0..variant.pairs())
        .map(|j| 2.0 * (variant.angle(j) * delta).cos() * variant.xpos_factor(j, delta, Role::Query))
        .sum()
}

pub fn decay_curve(
    variant: &PeVariant,
    distances: &[i64],
    normalized: bool,
) -> Result<DecayCurve, PeError> {
    decay_curve_with(Exec::default(), variant, distances, normalized)
}

pub fn decay_curve_with(
    exec: Exec,
    variant: &PeVariant,
    distances: &[i64],
    normalized: bool,
) -> Result<DecayCurve, PeError> {
    if let Some(&neg) = distances.iter().find(|&&d| d < 0) {
        return Err(PeError::NegativeDistance(neg));
    }
    if distances.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PeError::InvalidRange(
            "distances must be strictly increasing".into(),
        ));
    }
    let norm = if normalized {
        variant.head_dim() as f64
    } else {
        1.0
    };
    let scores = exec.map_slice(distances, |&d| decay_score(variant, d as f64) / norm);
    Ok(DecayCurve {
        distances: distances.iter().map(|&d| d as u64).collect(),
        scores,
        normalized,
        variant: *variant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ones_dot(v: &PeVariant, delta: f64) -> f64 {
        let ones = vec![1.0; v.head_dim()];
        let q = v.rotate_real(&ones, delta, Role::Query).unwrap();
        let k = v.rotate_real(&ones, 0.0, Role::Key).unwrap();
        q.iter().zip(&k).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn normalized_starts_at_one() {
        for v in [
            PeVariant::rope(1e4, 128).unwrap(),
            PeVariant::pi(1e4, 64, 0.125).unwrap(),
            PeVariant::xpos_abf(1e4, 32, 50.0).unwrap(),
        ] {
            let c = decay_curve(&v, &[0, 1, 10], true).unwrap();
            assert_eq!(c.scores[0], 1.0);
        }
    }

    #[test]
    fn distance_one_rope_128() {
        let v = PeVariant::rope(1e4, 128).unwrap();
        let c = decay_curve(&v, &[1], true).unwrap();
        let oracle: f64 = (0..64)
            .map(|j| (10_000f64.powf(-(2.0 * j as f64) / 128.0)).cos())
            .sum::<f64>()
            * 2.0
            / 128.0;
        assert_abs_diff_eq!(c.scores[0], oracle, epsilon = 1e-14);
        assert_abs_diff_eq!(c.scores[0], ones_dot(&v, 1.0) / 128.0, epsilon = 1e-9);
    }

    #[test]
    fn matches_kernel_for_xpos() {
        let v = PeVariant::xpos_abf(1e4, 16, 50.0).unwrap();
        for d in [0.0, 3.0, 700.0, 4096.0] {
            assert_abs_diff_eq!(decay_score(&v, d), ones_dot(&v, d), epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_negative_and_unsorted() {
        let v = PeVariant::rope(1e4, 8).unwrap();
        assert_eq!(
            decay_curve(&v, &[0, -3], true),
            Err(PeError::NegativeDistance(-3))
        );
        assert!(decay_curve(&v, &[3, 3], true).is_err());
    }

    #[test]
    fn csv_format() {
        let v = PeVariant::rope(1e4, 2).unwrap();
        let c = decay_curve(&v, &[0, 1], false).unwrap();
        let csv = c.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("delta,score"));
        assert_eq!(lines.next(), Some("0,2.0000000000000000e0"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[1].parse::<f64>().unwrap(), 2.0 * 1f64.cos());
    }

    #[test]
    fn serial_equals_parallel() {
        let v = PeVariant::abf(1e4, 128, 50.0).unwrap();
        let ds: Vec<i64> = (0..2000).map(|i| i * 7).collect();
        let a = decay_curve_with(Exec::Serial, &v, &ds, false).unwrap();
        let b = decay_curve_with(Exec::Parallel, &v, &ds, false).unwrap();
        assert_eq!(a, b);
    }
}

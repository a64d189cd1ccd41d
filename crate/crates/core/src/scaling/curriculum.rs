use serde::Serialize;

use super::ScalingError;

/// Per-token training cost affine in sequence length, `f(L) = fixed + per_len * L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineTokenCost {
    pub fixed: f64,
    pub per_len: f64,
}

impl AffineTokenCost {
    pub fn per_token(&self, seq_len: u64) -> f64 {
        self.fixed + self.per_len * seq_len as f64
    }
}

/// Train at `short_len` for the first `switch_fraction` of `total_tokens`,
/// then at `long_len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurriculumSchedule {
    pub short_len: u64,
    pub long_len: u64,
    pub switch_fraction: f64,
    pub total_tokens: f64,
    /// Per-token cost at `short_len` divided by the cost at `long_len`.
    pub cost_ratio: f64,
}

impl CurriculumSchedule {
    /// 4096 -> 32768 schedule with an explicit cost ratio.
    pub fn new(switch_fraction: f64, cost_ratio: f64, total_tokens: f64) -> Result<Self, ScalingError> {
        Self {
            short_len: 4096,
            long_len: 32768,
            switch_fraction,
            total_tokens,
            cost_ratio,
        }
        .validate()
    }

    /// Derives the cost ratio from a per-token cost model.
    pub fn from_cost_model(
        short_len: u64,
        long_len: u64,
        switch_fraction: f64,
        total_tokens: f64,
        cost: &AffineTokenCost,
    ) -> Result<Self, ScalingError> {
        let long = cost.per_token(long_len);
        if !(long > 0.0) {
            return Err(ScalingError::InvalidParameter(
                "per-token cost at long_len must be positive".into(),
            ));
        }
        Self {
            short_len,
            long_len,
            switch_fraction,
            total_tokens,
            cost_ratio: cost.per_token(short_len) / long,
        }
        .validate()
    }

    pub fn validate(self) -> Result<Self, ScalingError> {
        if self.short_len == 0 || self.short_len >= self.long_len {
            return Err(ScalingError::InvalidParameter(format!(
                "need 0 < short_len < long_len, got {} and {}",
                self.short_len, self.long_len
            )));
        }
        if !(0.0..=1.0).contains(&self.switch_fraction) {
            return Err(ScalingError::InvalidParameter(format!(
                "switch fraction must lie in [0, 1], got {}",
                self.switch_fraction
            )));
        }
        if !(self.cost_ratio > 0.0 && self.cost_ratio <= 1.0) {
            return Err(ScalingError::InvalidParameter(format!(
                "cost ratio must lie in (0, 1], got {}",
                self.cost_ratio
            )));
        }
        if !(self.total_tokens >= 0.0 && self.total_tokens.is_finite()) {
            return Err(ScalingError::InvalidParameter(
                "total tokens must be finite and non-negative".into(),
            ));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlopsEstimate {
    /// Cost relative to training every token at `long_len`.
    pub total_flops_relative: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub absolute_flops: Option<f64>,
}

/// Relative cost `p r + (1 - p)`. With the per-token cost at `long_len`
/// supplied, also returns `relative * total_tokens * long_cost`.
pub fn curriculum_flops(
    schedule: &CurriculumSchedule,
    long_token_cost: Option<f64>,
) -> Result<FlopsEstimate, ScalingError> {
    let s = schedule.validate()?;
    let rel = s.switch_fraction * s.cost_ratio + (1.0 - s.switch_fraction);
    Ok(FlopsEstimate {
        total_flops_relative: rel,
        absolute_flops: long_token_cost.map(|f| rel * s.total_tokens * f),
    })
}

/// Least-squares cost ratio `r` such that `flops(p) / flops(0) = 1 - p (1 - r)`.
///
/// `table` holds `(switch_fraction, total_flops)` rows and must contain a
/// `p = 0` baseline plus at least one row with `p > 0`.
pub fn calibrate_cost_ratio(table: &[(f64, f64)]) -> Result<f64, ScalingError> {
    let baseline = table
        .iter()
        .find(|(p, _)| *p == 0.0)
        .map(|&(_, f)| f)
        .ok_or(ScalingError::MissingBaseline)?;
    if !(baseline > 0.0) {
        return Err(ScalingError::InvalidParameter(
            "baseline FLOPs must be positive".into(),
        ));
    }
    let rows: Vec<(f64, f64)> = table
        .iter()
        .filter(|(p, _)| *p != 0.0)
        .map(|&(p, f)| (p, f / baseline))
        .collect();
    if rows.is_empty() {
        return Err(ScalingError::InvalidParameter(
            "need at least one curriculum row with p > 0".into(),
        ));
    }
    if let Some((p, _)) = rows.iter().find(|(p, _)| !(0.0..=1.0).contains(p)) {
        return Err(ScalingError::InvalidParameter(format!(
            "switch fraction {p} outside [0, 1]"
        )));
    }
    // 1 - ratio = p k with k = 1 - r; least squares through the origin
    let num: f64 = rows.iter().map(|(p, ratio)| p * (1.0 - ratio)).sum();
    let den: f64 = rows.iter().map(|(p, _)| p * p).sum();
    Ok(1.0 - num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn table_ratios() {
        for (p, expected) in [(0.2, 0.9), (0.4, 0.8), (0.8, 0.6)] {
            let s = CurriculumSchedule::new(p, 0.5, 1.0).unwrap();
            let est = curriculum_flops(&s, None).unwrap();
            assert_abs_diff_eq!(est.total_flops_relative, expected, epsilon = 1e-15);
            assert_eq!(est.absolute_flops, None);
        }
        let s = CurriculumSchedule::new(0.0, 0.5, 1.0).unwrap();
        assert_eq!(curriculum_flops(&s, None).unwrap().total_flops_relative, 1.0);
    }

    #[test]
    fn absolute_flops() {
        let s = CurriculumSchedule::new(0.5, 0.5, 1e9).unwrap();
        let est = curriculum_flops(&s, Some(2.0)).unwrap();
        assert_abs_diff_eq!(est.absolute_flops.unwrap(), 0.75 * 1e9 * 2.0, epsilon = 1e-3);
    }

    #[test]
    fn cost_model_ratio() {
        // purely length-proportional cost: 4096 / 32768
        let cost = AffineTokenCost {
            fixed: 0.0,
            per_len: 3.0,
        };
        let s = CurriculumSchedule::from_cost_model(4096, 32768, 0.2, 1.0, &cost).unwrap();
        assert_abs_diff_eq!(s.cost_ratio, 0.125, epsilon = 1e-15);
        // fixed part chosen so the short/long ratio is one half
        let cost = AffineTokenCost {
            fixed: 24576.0,
            per_len: 1.0,
        };
        let s = CurriculumSchedule::from_cost_model(4096, 32768, 0.2, 1.0, &cost).unwrap();
        assert_abs_diff_eq!(s.cost_ratio, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn invalid_schedules() {
        assert!(CurriculumSchedule::new(-0.1, 0.5, 1.0).is_err());
        assert!(CurriculumSchedule::new(1.1, 0.5, 1.0).is_err());
        assert!(CurriculumSchedule::new(0.5, 0.0, 1.0).is_err());
        assert!(CurriculumSchedule::new(0.5, 1.5, 1.0).is_err());
    }

    #[test]
    fn calibration() {
        assert_abs_diff_eq!(
            calibrate_cost_ratio(&[(0.0, 1.0), (0.5, 0.75)]).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_eq!(
            calibrate_cost_ratio(&[(0.0, 2.0), (0.3, 2.0), (0.9, 2.0)]).unwrap(),
            1.0
        );
        assert_eq!(
            calibrate_cost_ratio(&[(0.2, 0.9)]),
            Err(ScalingError::MissingBaseline)
        );
        assert!(calibrate_cost_ratio(&[(0.0, 1.0)]).is_err());
    }
}

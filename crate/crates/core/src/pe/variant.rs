use serde::Serialize;

use super::PeError;

/// Default RoPE base frequency.
pub const DEFAULT_BASE: f64 = 10_000.0;
/// Default xPos smoothing offset added to the per-pair scale.
pub const DEFAULT_XPOS_SMOOTHING: f64 = 0.4;
/// Default xPos scale base (positions are divided by this before exponentiation).
pub const DEFAULT_XPOS_SCALE_BASE: f64 = 512.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PeKind {
    #[serde(rename = "RoPE")]
    Rope,
    #[serde(rename = "RoPE-PI")]
    RopePi,
    #[serde(rename = "RoPE-ABF")]
    RopeAbf,
    #[serde(rename = "xPos-ABF")]
    XposAbf,
}

impl PeKind {
    pub fn name(self) -> &'static str {
        match self {
            PeKind::Rope => "RoPE",
            PeKind::RopePi => "RoPE-PI",
            PeKind::RopeAbf => "RoPE-ABF",
            PeKind::XposAbf => "xPos-ABF",
        }
    }
}

/// Which side of the attention dot product a vector sits on.
///
/// Only xPos distinguishes the two: queries are scaled by `zeta^(t/s)` and keys
/// by `zeta^(-t/s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Query,
    Key,
}

/// A positional-encoding configuration.
///
/// Parameters that do not belong to the kind are `None`; the constructors and
/// [`PeVariant::validate`] enforce this.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeVariant {
    kind: PeKind,
    base_frequency: f64,
    head_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pi_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    abf_beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xpos_smoothing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xpos_scale_base: Option<f64>,
}

impl PeVariant {
    pub fn rope(base_frequency: f64, head_dim: usize) -> Result<Self, PeError> {
        Self {
            kind: PeKind::Rope,
            base_frequency,
            head_dim,
            pi_alpha: None,
            abf_beta: None,
            xpos_smoothing: None,
            xpos_scale_base: None,
        }
        .validate()
    }

    /// Position interpolation: angles are multiplied by `alpha`.
    pub fn pi(base_frequency: f64, head_dim: usize, alpha: f64) -> Result<Self, PeError> {
        Self {
            kind: PeKind::RopePi,
            pi_alpha: Some(alpha),
            ..Self::bare(base_frequency, head_dim)
        }
        .validate()
    }

    /// Adjusted base frequency: the base becomes `beta * base_frequency`.
    pub fn abf(base_frequency: f64, head_dim: usize, beta: f64) -> Result<Self, PeError> {
        Self {
            kind: PeKind::RopeAbf,
            abf_beta: Some(beta),
            ..Self::bare(base_frequency, head_dim)
        }
        .validate()
    }

    /// xPos on top of an adjusted base, with the default smoothing and scale base.
    pub fn xpos_abf(base_frequency: f64, head_dim: usize, beta: f64) -> Result<Self, PeError> {
        Self::xpos_abf_with(
            base_frequency,
            head_dim,
            beta,
            DEFAULT_XPOS_SMOOTHING,
            DEFAULT_XPOS_SCALE_BASE,
        )
    }

    pub fn xpos_abf_with(
        base_frequency: f64,
        head_dim: usize,
        beta: f64,
        smoothing: f64,
        scale_base: f64,
    ) -> Result<Self, PeError> {
        Self {
            kind: PeKind::XposAbf,
            abf_beta: Some(beta),
            xpos_smoothing: Some(smoothing),
            xpos_scale_base: Some(scale_base),
            ..Self::bare(base_frequency, head_dim)
        }
        .validate()
    }

    fn bare(base_frequency: f64, head_dim: usize) -> Self {
        Self {
            kind: PeKind::Rope,
            base_frequency,
            head_dim,
            pi_alpha: None,
            abf_beta: None,
            xpos_smoothing: None,
            xpos_scale_base: None,
        }
    }

    /// Checks every invariant of the configuration and returns it unchanged.
    pub fn validate(self) -> Result<Self, PeError> {
        if self.head_dim < 2 || !self.head_dim.is_multiple_of(2) {
            return Err(PeError::InvalidParameter(format!(
                "head_dim must be even and >= 2, got {}",
                self.head_dim
            )));
        }
        if !(self.base_frequency.is_finite() && self.base_frequency > 1.0) {
            return Err(PeError::InvalidParameter(format!(
                "base_frequency must be > 1, got {}",
                self.base_frequency
            )));
        }
        let wants = |present: bool, name: &str, value: Option<f64>| -> Result<(), PeError> {
            match (present, value) {
                (true, None) => Err(PeError::InvalidParameter(format!(
                    "{} requires {name}",
                    self.kind.name()
                ))),
                (false, Some(_)) => Err(PeError::InvalidParameter(format!(
                    "{name} is not a parameter of {}",
                    self.kind.name()
                ))),
                _ => Ok(()),
            }
        };
        let is_pi = self.kind == PeKind::RopePi;
        let is_abf = matches!(self.kind, PeKind::RopeAbf | PeKind::XposAbf);
        let is_xpos = self.kind == PeKind::XposAbf;
        wants(is_pi, "pi_alpha", self.pi_alpha)?;
        wants(is_abf, "abf_beta", self.abf_beta)?;
        wants(is_xpos, "xpos_smoothing", self.xpos_smoothing)?;
        wants(is_xpos, "xpos_scale_base", self.xpos_scale_base)?;
        if let Some(alpha) = self.pi_alpha {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(PeError::InvalidParameter(format!(
                    "pi_alpha must lie in (0, 1], got {alpha}"
                )));
            }
        }
        if let Some(beta) = self.abf_beta {
            if !(beta.is_finite() && beta >= 1.0) {
                return Err(PeError::InvalidParameter(format!(
                    "abf_beta must be >= 1, got {beta}"
                )));
            }
        }
        if let Some(g) = self.xpos_smoothing {
            if !(g.is_finite() && g > 0.0) {
                return Err(PeError::InvalidParameter(format!(
                    "xpos_smoothing must be > 0, got {g}"
                )));
            }
        }
        if let Some(s) = self.xpos_scale_base {
            if !(s.is_finite() && s > 0.0) {
                return Err(PeError::InvalidParameter(format!(
                    "xpos_scale_base must be > 0, got {s}"
                )));
            }
        }
        Ok(self)
    }

    pub fn kind(&self) -> PeKind {
        self.kind
    }
    pub fn base_frequency(&self) -> f64 {
        self.base_frequency
    }
    pub fn head_dim(&self) -> usize {
        self.head_dim
    }
    pub fn pi_alpha(&self) -> Option<f64> {
        self.pi_alpha
    }
    pub fn abf_beta(&self) -> Option<f64> {
        self.abf_beta
    }
    pub fn xpos_smoothing(&self) -> Option<f64> {
        self.xpos_smoothing
    }
    pub fn xpos_scale_base(&self) -> Option<f64> {
        self.xpos_scale_base
    }

    /// Number of complex pairs, `d / 2`.
    pub fn pairs(&self) -> usize {
        self.head_dim / 2
    }

    /// The base whose powers give the rotation angles: `b` or `beta * b`.
    pub fn effective_base(&self) -> f64 {
        match self.abf_beta {
            Some(beta) => beta * self.base_frequency,
            None => self.base_frequency,
        }
    }

    /// Rotation angle `theta_j` of pair `j`.
    pub fn rotation_angle(&self, j: usize) -> Result<f64, PeError> {
        if j >= self.pairs() {
            return Err(PeError::IndexOutOfRange {
                index: j,
                len: self.pairs(),
            });
        }
        Ok(self.angle(j))
    }

    pub(crate) fn angle(&self, j: usize) -> f64 {
        let exponent = -(2.0 * j as f64) / self.head_dim as f64;
        let theta = self.effective_base().powf(exponent);
        match self.pi_alpha {
            Some(alpha) => alpha * theta,
            None => theta,
        }
    }

    /// All rotation angles, `theta_0 .. theta_{d/2-1}`.
    pub fn angles(&self) -> Vec<f64> {
        (0..self.pairs()).map(|j| self.angle(j)).collect()
    }

    /// xPos per-pair scale `zeta_j = (2j/d + smoothing) / (1 + smoothing)`; 1 for other kinds.
    pub fn xpos_zeta(&self, j: usize) -> f64 {
        match self.xpos_smoothing {
            Some(g) => ((2.0 * j as f64) / self.head_dim as f64 + g) / (1.0 + g),
            None => 1.0,
        }
    }

    /// Multiplier applied to pair `j` at position `t` for the given role.
    pub fn xpos_factor(&self, j: usize, t: f64, role: Role) -> f64 {
        match (self.kind, self.xpos_scale_base) {
            (PeKind::XposAbf, Some(s)) => {
                let power = match role {
                    Role::Query => t / s,
                    Role::Key => -t / s,
                };
                self.xpos_zeta(j).powf(power)
            }
            _ => 1.0,
        }
    }

    /// True for the norm-preserving kinds (everything except xPos).
    pub fn is_norm_preserving(&self) -> bool {
        self.kind != PeKind::XposAbf
    }

    /// Short label safe for CSV cells, e.g. `RoPE-ABF;b=10000;d=128;beta=50`.
    pub fn label(&self) -> String {
        let mut s = format!(
            "{};b={};d={}",
            self.kind.name(),
            self.base_frequency,
            self.head_dim
        );
        if let Some(a) = self.pi_alpha {
            s.push_str(&format!(";alpha={a}"));
        }
        if let Some(b) = self.abf_beta {
            s.push_str(&format!(";beta={b}"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn angle_at_zero_is_alpha_or_one() {
        assert_eq!(PeVariant::rope(1e4, 128).unwrap().rotation_angle(0).unwrap(), 1.0);
        assert_eq!(PeVariant::pi(1e4, 128, 0.25).unwrap().rotation_angle(0).unwrap(), 0.25);
        assert_eq!(PeVariant::abf(1e4, 128, 50.0).unwrap().rotation_angle(0).unwrap(), 1.0);
        assert_eq!(PeVariant::xpos_abf(1e4, 128, 50.0).unwrap().rotation_angle(0).unwrap(), 1.0);
    }

    #[test]
    fn rope_second_angle() {
        let v = PeVariant::rope(1e4, 128).unwrap();
        let expected = (-(2.0 / 128.0) * 10_000f64.ln()).exp();
        assert_relative_eq!(v.rotation_angle(1).unwrap(), expected, max_relative = 1e-14);
        assert!((v.rotation_angle(1).unwrap() - 0.865964).abs() < 5e-7);
    }

    #[test]
    fn abf_uses_scaled_base() {
        let v = PeVariant::abf(1e4, 128, 50.0).unwrap();
        let expected = (5e5f64).powf(-2.0 / 128.0);
        assert_relative_eq!(v.rotation_angle(1).unwrap(), expected, max_relative = 1e-15);
    }

    #[test]
    fn out_of_range_index() {
        let v = PeVariant::rope(1e4, 8).unwrap();
        assert_eq!(
            v.rotation_angle(4),
            Err(PeError::IndexOutOfRange { index: 4, len: 4 })
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PeVariant::rope(1e4, 3).is_err());
        assert!(PeVariant::rope(1e4, 0).is_err());
        assert!(PeVariant::rope(1.0, 8).is_err());
        assert!(PeVariant::pi(1e4, 8, 0.0).is_err());
        assert!(PeVariant::pi(1e4, 8, 1.5).is_err());
        assert!(PeVariant::abf(1e4, 8, 0.5).is_err());
        assert!(PeVariant::xpos_abf_with(1e4, 8, 2.0, 0.0, 512.0).is_err());
        assert!(PeVariant::xpos_abf_with(1e4, 8, 2.0, 0.4, -1.0).is_err());
        let mut bad = PeVariant::rope(1e4, 8).unwrap();
        bad.pi_alpha = Some(0.5);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn xpos_zeta_range() {
        let v = PeVariant::xpos_abf(1e4, 8, 1.0).unwrap();
        assert_relative_eq!(v.xpos_zeta(0), 0.4 / 1.4);
        for j in 1..4 {
            assert!(v.xpos_zeta(j) > v.xpos_zeta(j - 1));
            assert!(v.xpos_zeta(j) < 1.0);
        }
        let q = v.xpos_factor(1, 100.0, Role::Query);
        let k = v.xpos_factor(1, 100.0, Role::Key);
        assert_relative_eq!(q * k, 1.0, max_relative = 1e-15);
        let rope = PeVariant::rope(1e4, 8).unwrap();
        assert_eq!(rope.xpos_factor(1, 100.0, Role::Query), 1.0);
    }

    #[test]
    fn json_omits_absent_parameters() {
        let v = PeVariant::abf(1e4, 128, 50.0).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"RoPE-ABF","base_frequency":10000.0,"head_dim":128,"abf_beta":50.0}"#
        );
    }
}

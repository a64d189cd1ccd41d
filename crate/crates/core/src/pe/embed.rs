use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{PeError, PeVariant, Role};

/// The image `f(x, t)` of a real vector: `d/2` complex pairs stored
/// interleaved as `(re_0, im_0, re_1, im_1, ...)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingImage {
    values: Vec<f64>,
    source_norm: f64,
}

impl EmbeddingImage {
    /// Number of complex pairs.
    pub fn len(&self) -> usize {
        self.values.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pair `j` as `(re, im)`.
    pub fn pair(&self, j: usize) -> (f64, f64) {
        (self.values[2 * j], self.values[2 * j + 1])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.chunks_exact(2).map(|c| (c[0], c[1]))
    }

    /// Interleaved real view, index-compatible with the source vector.
    pub fn as_interleaved(&self) -> &[f64] {
        &self.values
    }

    /// Euclidean norm of the source vector `x`.
    pub fn source_norm(&self) -> f64 {
        self.source_norm
    }

    /// Euclidean norm of the image.
    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    /// Euclidean distance between two images of equal length.
    pub fn distance(&self, other: &EmbeddingImage) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl PeVariant {
    fn check_dim(&self, x: &[f64]) -> Result<(), PeError> {
        if x.len() != self.head_dim() {
            return Err(PeError::DimensionMismatch {
                expected: self.head_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Complex image of `x` at position `t` (query role for xPos).
    pub fn embed(&self, x: &[f64], t: f64) -> Result<EmbeddingImage, PeError> {
        self.embed_as(x, t, Role::Query)
    }

    /// Complex image of `x` at position `t` with an explicit role.
    ///
    /// The role only matters for xPos, where it selects the sign of the
    /// scale exponent.
    pub fn embed_as(&self, x: &[f64], t: f64, role: Role) -> Result<EmbeddingImage, PeError> {
        Ok(EmbeddingImage {
            values: self.rotate_real(x, t, role)?,
            source_norm: norm(x),
        })
    }

    /// Rotates each 2-block of `x` by `theta_j * t`, scaling by the xPos
    /// factor for xPos variants. This is the real form that enters attention.
    pub fn rotate_real(&self, x: &[f64], t: f64, role: Role) -> Result<Vec<f64>, PeError> {
        self.check_dim(x)?;
        let mut out = vec![0.0; x.len()];
        self.rotate_into(x, t, role, false, &mut out);
        Ok(out)
    }

    /// Applies the transpose of the `rotate_real` linear map. Used to pull
    /// gradients back through the rotation.
    pub(crate) fn rotate_real_transpose(&self, x: &[f64], t: f64, role: Role, out: &mut [f64]) {
        self.rotate_into(x, t, role, true, out);
    }

    pub(crate) fn rotate_into(
        &self,
        x: &[f64],
        t: f64,
        role: Role,
        transpose: bool,
        out: &mut [f64],
    ) {
        for j in 0..self.pairs() {
            let (sin, cos) = (self.angle(j) * t).sin_cos();
            let sin = if transpose { -sin } else { sin };
            let scale = self.xpos_factor(j, t, role);
            let (a, b) = (x[2 * j], x[2 * j + 1]);
            out[2 * j] = scale * (a * cos - b * sin);
            out[2 * j + 1] = scale * (a * sin + b * cos);
        }
    }
}

/// Hermitian inner product `sum_j a_j * conj(b_j)`.
pub fn inner_product(a: &EmbeddingImage, b: &EmbeddingImage) -> Result<Complex64, PeError> {
    if a.len() != b.len() {
        return Err(PeError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a
        .pairs()
        .zip(b.pairs())
        .map(|((ar, ai), (br, bi))| Complex64::new(ar, ai) * Complex64::new(br, -bi))
        .sum())
}

/// `Im<a, b> / (|a| |b|)`.
pub fn sine_similarity(a: &EmbeddingImage, b: &EmbeddingImage) -> Result<f64, PeError> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(PeError::ZeroNorm);
    }
    Ok(inner_product(a, b)?.im / (na * nb))
}

/// `count` seeded standard-normal vectors of length `dim`.
pub fn gaussian_vectors(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rope2() -> PeVariant {
        PeVariant::rope(10_000.0, 2).unwrap()
    }

    #[test]
    fn position_zero_is_identity() {
        let x = [0.3, -1.2, 2.5, 0.7];
        for v in [
            PeVariant::rope(1e4, 4).unwrap(),
            PeVariant::pi(1e4, 4, 0.25).unwrap(),
            PeVariant::abf(1e4, 4, 50.0).unwrap(),
            PeVariant::xpos_abf(1e4, 4, 50.0).unwrap(),
        ] {
            let img = v.embed(&x, 0.0).unwrap();
            assert_eq!(img.as_interleaved(), &x);
            assert_eq!(v.rotate_real(&x, 0.0, Role::Key).unwrap(), x.to_vec());
        }
    }

    #[test]
    fn unit_vector_at_one_radian() {
        let img = rope2().embed(&[1.0, 0.0], 1.0).unwrap();
        assert_abs_diff_eq!(img.pair(0).0, 1f64.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(img.pair(0).1, 1f64.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(img.pair(0).0, 0.540302, epsilon = 5e-7);
        assert_abs_diff_eq!(img.pair(0).1, 0.841471, epsilon = 5e-7);
        let r = rope2().rotate_real(&[1.0, 0.0], 1.0, Role::Query).unwrap();
        assert_eq!(r, img.as_interleaved());
    }

    #[test]
    fn dimension_mismatch() {
        assert_eq!(
            rope2().embed(&[1.0, 2.0, 3.0], 1.0),
            Err(PeError::DimensionMismatch {
                expected: 2,
                got: 3
            })
        );
    }

    #[test]
    fn self_inner_product_is_squared_norm() {
        let v = PeVariant::abf(1e4, 6, 50.0).unwrap();
        let x = [1.0, 2.0, -3.0, 0.5, 0.25, -1.0];
        let img = v.embed(&x, 17.0).unwrap();
        let ip = inner_product(&img, &img).unwrap();
        assert_abs_diff_eq!(ip.re, x.iter().map(|a| a * a).sum::<f64>(), epsilon = 1e-12);
        assert_eq!(ip.im, 0.0);
        assert_eq!(sine_similarity(&img, &img).unwrap(), 0.0);
    }

    #[test]
    fn single_pair_closed_form() {
        let v = rope2();
        let a = v.embed(&[1.0, 0.0], 1.0).unwrap();
        let b = v.embed(&[1.0, 0.0], 0.0).unwrap();
        let ip = inner_product(&a, &b).unwrap();
        assert_abs_diff_eq!(ip.re, 1f64.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(ip.im, 1f64.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(sine_similarity(&a, &b).unwrap(), 0.841471, epsilon = 5e-7);
        assert_abs_diff_eq!(
            sine_similarity(&b, &a).unwrap(),
            -sine_similarity(&a, &b).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn inner_product_matches_pair_sum_formula() {
        let v = PeVariant::pi(1e4, 8, 0.25).unwrap();
        let x = [0.5, -1.0, 2.0, 0.1, -0.3, 0.9, 1.5, -2.0];
        let (m, n) = (37.0, 5.0);
        let ip = inner_product(&v.embed(&x, m).unwrap(), &v.embed(&x, n).unwrap()).unwrap();
        let expected: Complex64 = (0..4)
            .map(|j| {
                let s = x[2 * j] * x[2 * j] + x[2 * j + 1] * x[2 * j + 1];
                Complex64::from_polar(s, v.angle(j) * (m - n))
            })
            .sum();
        assert_abs_diff_eq!(ip.re, expected.re, epsilon = 1e-12);
        assert_abs_diff_eq!(ip.im, expected.im, epsilon = 1e-12);
    }

    #[test]
    fn zero_norm_rejected() {
        let v = rope2();
        let z = v.embed(&[0.0, 0.0], 3.0).unwrap();
        let a = v.embed(&[1.0, 0.0], 3.0).unwrap();
        assert_eq!(sine_similarity(&z, &a), Err(PeError::ZeroNorm));
    }

    #[test]
    fn length_mismatch_rejected() {
        let a = rope2().embed(&[1.0, 0.0], 0.0).unwrap();
        let b = PeVariant::rope(1e4, 4).unwrap().embed(&[1.0; 4], 0.0).unwrap();
        assert!(inner_product(&a, &b).is_err());
    }

    #[test]
    fn transpose_inverts_pure_rotation() {
        let v = PeVariant::abf(1e4, 6, 50.0).unwrap();
        let x = [1.0, 2.0, -3.0, 0.5, 0.25, -1.0];
        let y = v.rotate_real(&x, 123.0, Role::Query).unwrap();
        let mut back = vec![0.0; 6];
        v.rotate_real_transpose(&y, 123.0, Role::Query, &mut back);
        for (a, b) in back.iter().zip(&x) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn gaussian_vectors_are_seeded() {
        let a = gaussian_vectors(3, 4, 9);
        assert_eq!(a, gaussian_vectors(3, 4, 9));
        assert_ne!(a, gaussian_vectors(3, 4, 10));
        assert!(a.iter().all(|v| v.len() == 4));
    }
}

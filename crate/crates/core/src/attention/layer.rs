use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::AttentionError;
use crate::pe::{PeVariant, Role};

/// Shape and encoding of a single attention head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionConfig {
    pub seq_len: usize,
    pub variant: PeVariant,
    pub causal: bool,
    pub score_scale: f64,
}

impl AttentionConfig {
    /// Config with the default `1/sqrt(d)` score scale.
    pub fn new(variant: PeVariant, seq_len: usize, causal: bool) -> Result<Self, AttentionError> {
        let scale = (variant.head_dim() as f64).sqrt().recip();
        Self::with_scale(variant, seq_len, causal, scale)
    }

    pub fn with_scale(
        variant: PeVariant,
        seq_len: usize,
        causal: bool,
        score_scale: f64,
    ) -> Result<Self, AttentionError> {
        if seq_len == 0 {
            return Err(AttentionError::InvalidConfig("seq_len must be >= 1".into()));
        }
        if !score_scale.is_finite() {
            return Err(AttentionError::InvalidConfig(
                "score_scale must be finite".into(),
            ));
        }
        Ok(Self {
            seq_len,
            variant,
            causal,
            score_scale,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.variant.head_dim()
    }

    fn check(&self, name: &'static str, m: &ArrayView2<f64>) -> Result<(), AttentionError> {
        let expected = (self.seq_len, self.head_dim());
        if m.dim() != expected {
            return Err(AttentionError::ShapeMismatch {
                name,
                expected,
                got: m.dim(),
            });
        }
        if m.iter().any(|v| v.is_nan()) {
            return Err(AttentionError::NanInput(name));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub output: Array2<f64>,
    pub weights: Array2<f64>,
}

/// Gradients of `sum(output^2)` with respect to the three inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGrads {
    pub loss: f64,
    pub d_query: Array2<f64>,
    pub d_key: Array2<f64>,
    pub d_value: Array2<f64>,
}

fn rotate_rows(variant: &PeVariant, m: &ArrayView2<f64>, role: Role) -> Array2<f64> {
    let mut out = Array2::zeros(m.dim());
    for (t, (src, mut dst)) in m.outer_iter().zip(out.outer_iter_mut()).enumerate() {
        let src = src.to_vec();
        let dst = dst.as_slice_mut().expect("row-major output");
        variant.rotate_into(&src, t as f64, role, false, dst);
    }
    out
}

fn unrotate_rows(variant: &PeVariant, m: &Array2<f64>, role: Role) -> Array2<f64> {
    let mut out = Array2::zeros(m.dim());
    for (t, (src, mut dst)) in m.outer_iter().zip(out.outer_iter_mut()).enumerate() {
        let src = src.to_vec();
        let dst = dst.as_slice_mut().expect("row-major output");
        variant.rotate_real_transpose(&src, t as f64, role, dst);
    }
    out
}

/// Row-wise softmax with max subtraction; `-inf` logits become exact zeros.
pub(crate) fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.outer_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|s| {
            if s == f64::NEG_INFINITY {
                0.0
            } else {
                (s - max).exp()
            }
        });
        let total: f64 = row.sum();
        row.mapv_inplace(|w| w / total);
    }
}

struct Forward {
    q_rot: Array2<f64>,
    k_rot: Array2<f64>,
    weights: Array2<f64>,
    output: Array2<f64>,
}

fn forward_inner(
    config: &AttentionConfig,
    q: ArrayView2<f64>,
    k: ArrayView2<f64>,
    v: ArrayView2<f64>,
) -> Result<Forward, AttentionError> {
    config.check("query", &q)?;
    config.check("key", &k)?;
    config.check("value", &v)?;
    let q_rot = rotate_rows(&config.variant, &q, Role::Query);
    let k_rot = rotate_rows(&config.variant, &k, Role::Key);
    let mut scores = q_rot.dot(&k_rot.t()) * config.score_scale;
    if config.causal {
        for ((m, n), s) in scores.indexed_iter_mut() {
            if n > m {
                *s = f64::NEG_INFINITY;
            }
        }
    }
    softmax_rows(&mut scores);
    let output = scores.dot(&v);
    Ok(Forward {
        q_rot,
        k_rot,
        weights: scores,
        output,
    })
}

/// Single-head attention with the rotary encoding applied to queries and keys.
///
/// `scores[m][n] = scale * <rot(Q_m, m, query), rot(K_n, n, key)>`, causal
/// entries `n > m` masked before the row softmax, `output = weights . V`.
pub fn attention_forward(
    config: &AttentionConfig,
    q: ArrayView2<f64>,
    k: ArrayView2<f64>,
    v: ArrayView2<f64>,
) -> Result<AttentionOutput, AttentionError> {
    let f = forward_inner(config, q, k, v)?;
    Ok(AttentionOutput {
        output: f.output,
        weights: f.weights,
    })
}

/// Loss `sum(output^2)` and its analytic gradients.
pub fn attention_backward(
    config: &AttentionConfig,
    q: ArrayView2<f64>,
    k: ArrayView2<f64>,
    v: ArrayView2<f64>,
) -> Result<AttentionGrads, AttentionError> {
    let f = forward_inner(config, q, k, v)?;
    let loss = f.output.iter().map(|o| o * o).sum();
    let d_out = &f.output * 2.0;
    let d_value = f.weights.t().dot(&d_out);
    let d_weights = d_out.dot(&v.t());
    // softmax backward: dS = W * (dW - rowsum(dW * W)); masked entries have W = 0
    let row_dot = (&d_weights * &f.weights).sum_axis(Axis(1));
    let mut d_scores = d_weights;
    for ((m, _), g) in d_scores.indexed_iter_mut() {
        *g -= row_dot[m];
    }
    d_scores = d_scores * &f.weights * config.score_scale;
    let d_q_rot = d_scores.dot(&f.k_rot);
    let d_k_rot = d_scores.t().dot(&f.q_rot);
    Ok(AttentionGrads {
        loss,
        d_query: unrotate_rows(&config.variant, &d_q_rot, Role::Query),
        d_key: unrotate_rows(&config.variant, &d_k_rot, Role::Key),
        d_value,
    })
}

/// Largest number of entries per tensor for which finite differences run.
pub const MAX_GRADCHECK_PARAMS: usize = 64;

/// Central finite-difference step.
pub const GRADCHECK_STEP: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Deterministic standard-normal `seq_len x d` inputs for a seed.
pub fn random_inputs(
    config: &AttentionConfig,
    seed: u64,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = (config.seq_len, config.head_dim());
    let mut draw = || Array2::from_shape_simple_fn(shape, || StandardNormal.sample(&mut rng));
    let q = draw();
    let k = draw();
    let v = draw();
    (q, k, v)
}

/// Compares analytic gradients of `sum(output^2)` against central differences
/// with step `1e-5` on seeded random inputs. Returns the max relative error
/// over every entry of `Q`, `K` and `V`.
pub fn gradient_check(config: &AttentionConfig, seed: u64) -> Result<f64, AttentionError> {
    let n = config.seq_len * config.head_dim();
    if n > MAX_GRADCHECK_PARAMS {
        return Err(AttentionError::TooLarge {
            params: n,
            max: MAX_GRADCHECK_PARAMS,
        });
    }
    let (q, k, v) = random_inputs(config, seed);
    let grads = attention_backward(config, q.view(), k.view(), v.view())?;
    let loss = |q: &Array2<f64>, k: &Array2<f64>, v: &Array2<f64>| -> Result<f64, AttentionError> {
        let out = attention_forward(config, q.view(), k.view(), v.view())?;
        Ok(out.output.iter().map(|o| o * o).sum())
    };
    let mut worst = 0.0f64;
    for which in 0..3 {
        let analytic = match which {
            0 => &grads.d_query,
            1 => &grads.d_key,
            _ => &grads.d_value,
        };
        for idx in 0..n {
            let pos = (idx / config.head_dim(), idx % config.head_dim());
            let mut inputs = [q.clone(), k.clone(), v.clone()];
            inputs[which][pos] += GRADCHECK_STEP;
            let plus = loss(&inputs[0], &inputs[1], &inputs[2])?;
            inputs[which][pos] -= 2.0 * GRADCHECK_STEP;
            let minus = loss(&inputs[0], &inputs[1], &inputs[2])?;
            let numeric = (plus - minus) / (2.0 * GRADCHECK_STEP);
            worst = worst.max(relative_error(analytic[pos], numeric));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn rope(d: usize) -> PeVariant {
        PeVariant::rope(1e4, d).unwrap()
    }

    #[test]
    fn single_token_returns_value() {
        let cfg = AttentionConfig::new(rope(4), 1, true).unwrap();
        let q = array![[0.3, -1.0, 2.0, 0.5]];
        let v = array![[1.0, 2.0, 3.0, 4.0]];
        let out = attention_forward(&cfg, q.view(), q.view(), v.view()).unwrap();
        assert_eq!(out.weights, array![[1.0]]);
        assert_eq!(out.output, v);
    }

    #[test]
    fn constant_logits_give_uniform_weights() {
        // zero queries make every logit 0 regardless of position
        let cfg = AttentionConfig::new(rope(4), 5, false).unwrap();
        let q = Array2::zeros((5, 4));
        let k = Array2::from_elem((5, 4), 1.0);
        let v = Array2::from_shape_fn((5, 4), |(i, j)| (i * 4 + j) as f64);
        let out = attention_forward(&cfg, q.view(), k.view(), v.view()).unwrap();
        for w in out.weights.iter() {
            assert!((w - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn causal_rows_are_stochastic_and_masked() {
        let cfg = AttentionConfig::new(PeVariant::abf(1e4, 8, 50.0).unwrap(), 6, true).unwrap();
        let (q, k, v) = random_inputs(&cfg, 3);
        let out = attention_forward(&cfg, q.view(), k.view(), v.view()).unwrap();
        for (m, row) in out.weights.outer_iter().enumerate() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            for n in m + 1..6 {
                assert_eq!(row[n], 0.0);
            }
        }
    }

    #[test]
    fn rejects_bad_shapes_and_nan() {
        let cfg = AttentionConfig::new(rope(4), 2, false).unwrap();
        let good = Array2::zeros((2, 4));
        let bad = Array2::zeros((3, 4));
        assert!(matches!(
            attention_forward(&cfg, bad.view(), good.view(), good.view()),
            Err(AttentionError::ShapeMismatch { name: "query", .. })
        ));
        let mut nan = good.clone();
        nan[(1, 2)] = f64::NAN;
        assert_eq!(
            attention_forward(&cfg, good.view(), good.view(), nan.view()),
            Err(AttentionError::NanInput("value"))
        );
        assert!(AttentionConfig::new(rope(4), 0, false).is_err());
    }

    #[test]
    fn gradient_check_small_rope_and_abf() {
        let cfg = AttentionConfig::new(rope(8), 4, true).unwrap();
        assert!(gradient_check(&cfg, 1).unwrap() < 1e-4);
        let cfg = AttentionConfig::new(PeVariant::abf(1e4, 8, 50.0).unwrap(), 4, true).unwrap();
        assert!(gradient_check(&cfg, 2).unwrap() < 1e-4);
    }

    #[test]
    fn gradient_check_refuses_large_tensors() {
        let cfg = AttentionConfig::new(rope(16), 8, true).unwrap();
        assert!(matches!(
            gradient_check(&cfg, 0),
            Err(AttentionError::TooLarge { params: 128, .. })
        ));
    }

    #[test]
    fn value_gradient_is_linear_in_upstream() {
        let cfg = AttentionConfig::new(PeVariant::pi(1e4, 8, 0.25).unwrap(), 4, false).unwrap();
        let (q, k, v) = random_inputs(&cfg, 9);
        let grads = attention_backward(&cfg, q.view(), k.view(), v.view()).unwrap();
        let fwd = attention_forward(&cfg, q.view(), k.view(), v.view()).unwrap();
        // with the weights held fixed the loss is quadratic in V, so central
        // differences are exact for any step; a large one keeps rounding small
        let h = 0.5;
        for i in 0..4 {
            for j in 0..8 {
                let mut vp = v.clone();
                vp[(i, j)] += h;
                let lp: f64 = fwd.weights.dot(&vp).iter().map(|o| o * o).sum();
                vp[(i, j)] -= 2.0 * h;
                let lm: f64 = fwd.weights.dot(&vp).iter().map(|o| o * o).sum();
                let numeric = (lp - lm) / (2.0 * h);
                assert!(relative_error(grads.d_value[(i, j)], numeric) < 1e-10);
            }
        }
        let expected = fwd.weights.t().dot(&(&fwd.output * 2.0));
        assert_eq!(grads.d_value, expected);
    }
}

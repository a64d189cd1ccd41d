//! Fitting `L(c) = (alpha / c)^beta + gamma` to (context length, loss) points.
//!
//! The fit runs in two stages. A log-spaced grid over `beta` makes the problem
//! linear in `(alpha^beta, gamma)`, which is solved in closed form at every
//! knot. The best knot seeds a damped Gauss-Newton refinement on
//! `(ln alpha, ln beta, gamma)`.

use serde::{Deserialize, Serialize};

use super::ScalingError;
use crate::exec::Exec;
use crate::export::{csv_table, fmt_f64};

pub const BETA_GRID_MIN: f64 = 0.05;
pub const BETA_GRID_MAX: f64 = 4.0;
pub const BETA_GRID_KNOTS: usize = 200;
pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossPoint {
    pub context_length: u64,
    pub loss: f64,
}

impl LossPoint {
    pub fn new(context_length: u64, loss: f64) -> Self {
        Self {
            context_length,
            loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub rmse: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl PowerLawFit {
    /// A fit record from known parameters (no data behind it).
    pub fn from_params(alpha: f64, beta: f64, gamma: f64) -> Result<Self, ScalingError> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite() && gamma.is_finite())
        {
            return Err(ScalingError::InvalidParameter(format!(
                "need alpha > 0, beta > 0 and finite gamma, got ({alpha}, {beta}, {gamma})"
            )));
        }
        Ok(Self {
            alpha,
            beta,
            gamma,
            rmse: 0.0,
            iterations: 0,
            converged: true,
        })
    }

    fn eval(&self, c: f64) -> f64 {
        (self.alpha / c).powf(self.beta) + self.gamma
    }
}

/// `(alpha / c)^beta + gamma`.
pub fn predict_loss(fit: &PowerLawFit, context_length: f64) -> Result<f64, ScalingError> {
    if !(context_length > 0.0) {
        return Err(ScalingError::NonPositiveContext);
    }
    Ok(fit.eval(context_length))
}

/// `context_length,predicted_loss` CSV.
pub fn prediction_csv(fit: &PowerLawFit, contexts: &[u64]) -> Result<String, ScalingError> {
    let rows = contexts
        .iter()
        .map(|&c| Ok(vec![c.to_string(), fmt_f64(predict_loss(fit, c as f64)?)]))
        .collect::<Result<Vec<_>, ScalingError>>()?;
    Ok(csv_table(&["context_length", "predicted_loss"], rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoublingFactor {
    pub factor: f64,
    pub constant_offset: f64,
}

/// Doubling the context multiplies the loss by `2^-beta` and adds
/// `(1 - 2^-beta) gamma`.
pub fn doubling_loss_factor(fit: &PowerLawFit) -> DoublingFactor {
    let factor = (-fit.beta).exp2();
    DoublingFactor {
        factor,
        constant_offset: (1.0 - factor) * fit.gamma,
    }
}

/// Parameters in the refinement space.
#[derive(Debug, Clone, Copy)]
struct Params {
    ln_alpha: f64,
    ln_beta: f64,
    gamma: f64,
}

struct Problem {
    ln_c: Vec<f64>,
    loss: Vec<f64>,
}

impl Problem {
    fn sse(&self, p: &Params) -> f64 {
        let beta = p.ln_beta.exp();
        self.ln_c
            .iter()
            .zip(&self.loss)
            .map(|(lc, l)| {
                let r = (beta * (p.ln_alpha - lc)).exp() + p.gamma - l;
                r * r
            })
            .sum()
    }

    /// Closed-form linear least squares `L = a u + g` at fixed beta.
    fn grid_candidate(&self, beta: f64) -> Option<(Params, f64)> {
        let u: Vec<f64> = self.ln_c.iter().map(|lc| (-beta * lc).exp()).collect();
        let n = u.len() as f64;
        let mu = u.iter().sum::<f64>() / n;
        let ml = self.loss.iter().sum::<f64>() / n;
        let suu: f64 = u.iter().map(|x| (x - mu) * (x - mu)).sum();
        let sul: f64 = u
            .iter()
            .zip(&self.loss)
            .map(|(x, l)| (x - mu) * (l - ml))
            .sum();
        if suu <= 0.0 {
            return None;
        }
        let mut a = sul / suu;
        let mut g = ml - a * mu;
        if g < 0.0 {
            // intercept pinned at zero: a = <u, L> / <u, u>
            g = 0.0;
            a = u.iter().zip(&self.loss).map(|(x, l)| x * l).sum::<f64>()
                / u.iter().map(|x| x * x).sum::<f64>();
        }
        if !(a > 0.0) {
            return None;
        }
        let ln_alpha = a.ln() / beta;
        if !ln_alpha.is_finite() {
            return None;
        }
        let p = Params {
            ln_alpha,
            ln_beta: beta.ln(),
            gamma: g,
        };
        let sse = self.sse(&p);
        sse.is_finite().then_some((p, sse))
    }

    /// Residuals and Jacobian rows `(d/d ln alpha, d/d ln beta, d/d gamma)`.
    fn linearize(&self, p: &Params) -> (Vec<f64>, Vec<[f64; 3]>) {
        let beta = p.ln_beta.exp();
        self.ln_c
            .iter()
            .zip(&self.loss)
            .map(|(lc, l)| {
                let z = beta * (p.ln_alpha - lc);
                let e = z.exp();
                (e + p.gamma - l, [e * beta, e * z, 1.0])
            })
            .unzip()
    }
}

#[allow(clippy::needless_range_loop)]
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Levenberg-damped Gauss-Newton with gamma projected onto `[0, inf)`.
fn refine(problem: &Problem, start: Params, start_sse: f64) -> (Params, f64, usize, bool) {
    let mut p = start;
    let mut sse = start_sse;
    let mut lambda = 1e-3;
    for iter in 1..=MAX_ITERATIONS {
        let (r, jac) = problem.linearize(&p);
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (ri, row) in r.iter().zip(&jac) {
            for a in 0..3 {
                jtr[a] += row[a] * ri;
                for b in 0..3 {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        if jtr.iter().all(|g| *g == 0.0) {
            return (p, sse, iter, true);
        }
        loop {
            let mut damped = jtj;
            for (k, row) in damped.iter_mut().enumerate() {
                row[k] += lambda * jtj[k][k].max(1e-300);
            }
            let Some(step) = solve3(damped, jtr.map(|g| -g)) else {
                lambda *= 10.0;
                if lambda > 1e30 {
                    return (p, sse, iter, true);
                }
                continue;
            };
            let trial = Params {
                ln_alpha: p.ln_alpha + step[0],
                ln_beta: p.ln_beta + step[1],
                gamma: (p.gamma + step[2]).max(0.0),
            };
            let trial_sse = problem.sse(&trial);
            if trial_sse.is_finite() && trial_sse <= sse {
                let moved = [
                    trial.ln_alpha - p.ln_alpha,
                    trial.ln_beta - p.ln_beta,
                    trial.gamma - p.gamma,
                ];
                let step_norm = moved.iter().map(|v| v * v).sum::<f64>().sqrt();
                let scale = [p.ln_alpha, p.ln_beta, p.gamma]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
                    .max(1.0);
                p = trial;
                sse = trial_sse;
                lambda = (lambda / 10.0).max(1e-12);
                if step_norm / scale < STEP_TOLERANCE {
                    return (p, sse, iter, true);
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e30 {
                // no descent direction left: at a (projected) minimum
                return (p, sse, iter, true);
            }
        }
    }
    (p, sse, MAX_ITERATIONS, false)
}

pub fn fit_power_law(points: &[LossPoint]) -> Result<PowerLawFit, ScalingError> {
    fit_power_law_with(Exec::default(), points)
}

/// Least-squares fit of `(alpha / c)^beta + gamma`, equal weights.
pub fn fit_power_law_with(exec: Exec, points: &[LossPoint]) -> Result<PowerLawFit, ScalingError> {
    if points.len() < 3 {
        return Err(ScalingError::TooFewPoints(points.len()));
    }
    if points.iter().any(|p| p.context_length == 0) {
        return Err(ScalingError::NonPositiveContext);
    }
    if points.iter().any(|p| !p.loss.is_finite()) {
        return Err(ScalingError::InvalidParameter("non-finite loss".into()));
    }
    let mut distinct: Vec<u64> = points.iter().map(|p| p.context_length).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(ScalingError::TooFewPoints(distinct.len()));
    }
    let problem = Problem {
        ln_c: points.iter().map(|p| (p.context_length as f64).ln()).collect(),
        loss: points.iter().map(|p| p.loss).collect(),
    };
    let n = problem.loss.len() as f64;
    let mean = problem.loss.iter().sum::<f64>() / n;
    let var = problem.loss.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    if var.sqrt() <= 1e-14 * mean.abs().max(1.0) {
        return Err(ScalingError::DegenerateFit(
            "losses have zero variance".into(),
        ));
    }

    let step = (BETA_GRID_MAX / BETA_GRID_MIN).ln() / (BETA_GRID_KNOTS - 1) as f64;
    let candidates = exec.map(BETA_GRID_KNOTS, |k| {
        let beta = if k == BETA_GRID_KNOTS - 1 {
            BETA_GRID_MAX
        } else {
            BETA_GRID_MIN * (step * k as f64).exp()
        };
        problem.grid_candidate(beta)
    });
    // strict < keeps the smallest beta on ties
    let (start, start_sse) = candidates
        .into_iter()
        .flatten()
        .reduce(|best, c| if c.1 < best.1 { c } else { best })
        .ok_or_else(|| {
            ScalingError::DegenerateFit("no grid candidate with a positive amplitude".into())
        })?;

    let (p, sse, iterations, converged) = refine(&problem, start, start_sse);
    Ok(PowerLawFit {
        alpha: p.ln_alpha.exp(),
        beta: p.ln_beta.exp(),
        gamma: p.gamma,
        rmse: (sse / n).sqrt(),
        iterations,
        converged,
    })
}

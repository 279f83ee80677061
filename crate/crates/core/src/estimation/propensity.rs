use serde::{Deserialize, Serialize};

use crate::domain::Dataset;
use crate::error::{Error, Result};
use crate::estimation::encode::{DesignMatrix, FeatureEncoder};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropensityConfig {
    /// L2 penalty on non-intercept weights.
    pub lambda_reg: f64,
    pub clip_epsilon: f64,
    /// Gradient-norm tolerance.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PropensityConfig {
    fn default() -> Self {
        PropensityConfig {
            lambda_reg: 1e-4,
            clip_epsilon: 0.01,
            tol: 1e-6,
            max_iters: 5000,
        }
    }
}

impl PropensityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::Config(format!("lambda_reg = {} must be ≥ 0", self.lambda_reg)));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::Config(format!(
                "clip_epsilon = {} must lie in (0, 1)",
                self.clip_epsilon
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_iters == 0 {
            return Err(Error::Config("tol must be > 0 and max_iters ≥ 1".into()));
        }
        Ok(())
    }
}

/// Penalized multinomial log-likelihood of the observed treatments.
///
/// Treatment 0 is the reference class. The parameter vector holds, for each
/// treatment `a = 1..m`, an intercept followed by `k` weights, i.e. it has
/// length `(m - 1) * (k + 1)`. The value is averaged over subjects.
pub struct PropensityObjective<'a> {
    x: &'a DesignMatrix,
    treatments: &'a [usize],
    m: usize,
    lambda_reg: f64,
}

impl<'a> PropensityObjective<'a> {
    pub fn new(x: &'a DesignMatrix, treatments: &'a [usize], m: usize, lambda_reg: f64) -> Self {
        PropensityObjective {
            x,
            treatments,
            m,
            lambda_reg,
        }
    }

    pub fn dim(&self) -> usize {
        (self.m - 1) * (self.x.cols + 1)
    }

    fn stride(&self) -> usize {
        self.x.cols + 1
    }

    /// Softmax probabilities for one encoded row; writes `m` entries.
    fn probs_into(&self, theta: &[f64], z: &[f64], out: &mut [f64]) {
        softmax_into(theta, self.stride(), z, out);
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let mut ll = 0.0;
        for i in 0..self.x.rows {
            let logits = logits(theta, self.stride(), self.x.row(i), self.m);
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
            ll += logits[self.treatments[i]] - lse;
        }
        ll / self.x.rows as f64 - 0.5 * self.lambda_reg * self.penalty_norm2(theta)
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let stride = self.stride();
        let mut grad = vec![0.0; self.dim()];
        let mut probs = vec![0.0; self.m];
        for i in 0..self.x.rows {
            let z = self.x.row(i);
            self.probs_into(theta, z, &mut probs);
            for a in 1..self.m {
                let resid = f64::from(u8::from(self.treatments[i] == a)) - probs[a];
                let g = &mut grad[(a - 1) * stride..a * stride];
                g[0] += resid;
                for (gj, zj) in g[1..].iter_mut().zip(z) {
                    *gj += resid * zj;
                }
            }
        }
        let n = self.x.rows as f64;
        for (j, g) in grad.iter_mut().enumerate() {
            *g /= n;
            if j % stride != 0 {
                *g -= self.lambda_reg * theta[j];
            }
        }
        grad
    }

    fn penalty_norm2(&self, theta: &[f64]) -> f64 {
        let stride = self.stride();
        theta
            .iter()
            .enumerate()
            .filter(|(j, _)| j % stride != 0)
            .map(|(_, t)| t * t)
            .sum()
    }
}

fn logits(theta: &[f64], stride: usize, z: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m];
    for (a, slot) in out.iter_mut().enumerate().skip(1) {
        let w = &theta[(a - 1) * stride..a * stride];
        *slot = w[0] + w[1..].iter().zip(z).map(|(wj, zj)| wj * zj).sum::<f64>();
    }
    out
}

fn softmax_into(theta: &[f64], stride: usize, z: &[f64], out: &mut [f64]) {
    let l = logits(theta, stride, z, out.len());
    let max = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, li) in out.iter_mut().zip(&l) {
        *o = (li - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fitted propensity model `ω̂(x, a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub encoder: FeatureEncoder,
    /// Row `a` holds `[intercept, weights...]`; row 0 is the all-zero reference.
    pub weights: Vec<Vec<f64>>,
    pub clip_epsilon: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl PropensityModel {
    pub fn m(&self) -> usize {
        self.weights.len()
    }

    /// Unclipped class probabilities; they sum to one.
    pub fn predict_raw(&self, row: &[f64]) -> Vec<f64> {
        let z = self.encoder.encode_row(row);
        let theta: Vec<f64> = self.weights[1..].concat();
        let mut out = vec![0.0; self.m()];
        softmax_into(&theta, self.encoder.width() + 1, &z, &mut out);
        out
    }

    /// Probabilities clipped below at `clip_epsilon`.
    pub fn predict(&self, row: &[f64]) -> Vec<f64> {
        self.predict_raw(row)
            .into_iter()
            .map(|p| p.max(self.clip_epsilon))
            .collect()
    }

    /// L2 norm of the penalized (non-intercept) weights.
    pub fn weight_norm(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w[1..].iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Fits `ω̂` by full-batch gradient ascent with backtracking line search.
///
/// Trial steps start from the Barzilai-Borwein estimate and are halved until
/// the Armijo condition holds.
pub fn fit_propensity(ds: &Dataset, config: &PropensityConfig) -> Result<PropensityModel> {
    config.validate()?;
    let m = ds.m();
    let mut counts = vec![0usize; m];
    for &a in ds.treatments() {
        counts[a] += 1;
    }
    if let Some(a) = counts.iter().position(|&c| c == 0) {
        return Err(Error::validation(
            "dataset",
            format!(
                "treatment `{}` never appears; its propensity cannot be fitted",
                ds.schema().treatments[a].name
            ),
        ));
    }
    let encoder = FeatureEncoder::fit(ds);
    let x = encoder.transform(ds);
    let objective = PropensityObjective::new(&x, ds.treatments(), m, config.lambda_reg);
    let stride = x.cols + 1;

    let mut theta = vec![0.0; objective.dim()];
    // start intercepts at the empirical log-odds against the reference class
    for a in 1..m {
        theta[(a - 1) * stride] = (counts[a] as f64 / counts[0] as f64).ln();
    }

    let (iterations, grad_norm) = if m == 1 {
        (0, 0.0)
    } else {
        ascend(&objective, &mut theta, config)?
    };

    let mut weights = vec![vec![0.0; stride]];
    weights.extend(theta.chunks(stride).map(<[f64]>::to_vec));
    Ok(PropensityModel {
        encoder,
        weights,
        clip_epsilon: config.clip_epsilon,
        iterations,
        grad_norm,
    })
}

fn ascend(
    objective: &PropensityObjective<'_>,
    theta: &mut Vec<f64>,
    config: &PropensityConfig,
) -> Result<(usize, f64)> {
    const ARMIJO: f64 = 1e-4;
    let mut value = objective.value(theta);
    let mut grad = objective.gradient(theta);
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for iter in 0..config.max_iters {
        let gnorm2 = dot(&grad, &grad);
        if gnorm2.sqrt() <= config.tol {
            return Ok((iter, gnorm2.sqrt()));
        }
        if let Some((prev_theta, prev_grad)) = &prev {
            let s: Vec<f64> = theta.iter().zip(prev_theta).map(|(a, b)| a - b).collect();
            // gradient of the concave objective decreases along s
            let y: Vec<f64> = prev_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 0.0 {
                step = (dot(&s, &s) / sy).clamp(1e-8, 1e8);
            }
        }
        let mut t = step;
        let accepted = loop {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(w, g)| w + t * g).collect();
            let trial_value = objective.value(&trial);
            if trial_value >= value + ARMIJO * t * gnorm2 {
                break Some((trial, trial_value));
            }
            t *= 0.5;
            if t < 1e-16 {
                break None;
            }
        };
        let Some((next, next_value)) = accepted else {
            // no ascent possible at machine precision
            return Err(Error::Convergence {
                iterations: iter,
                grad_norm: gnorm2.sqrt(),
            });
        };
        prev = Some((std::mem::replace(theta, next), std::mem::take(&mut grad)));
        value = next_value;
        grad = objective.gradient(theta);
    }
    let grad_norm = dot(&grad, &grad).sqrt();
    if grad_norm <= config.tol {
        Ok((config.max_iters, grad_norm))
    } else {
        Err(Error::Convergence {
            iterations: config.max_iters,
            grad_norm,
        })
    }
}

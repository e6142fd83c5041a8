//! Gaussian-process regression with anisotropic Matern-5/2 kernels.

use std::sync::OnceLock;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{vec_b64, Dense};
use crate::dense::Cholesky;
use crate::error::{Error, Result};

use super::lbfgs::{minimize, LbfgsOptions};

const SQRT5: f64 = 2.236_067_977_499_79;
const LOG_BOUND: f64 = 6.907_755_278_982_137; // ln 1e3
const JITTERS: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Matern-5/2 correlation at scaled distance `r`.
#[inline]
pub fn matern52(r: f64) -> f64 {
    (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * (-SQRT5 * r).exp()
}

fn default_restarts() -> usize {
    5
}

fn default_iterations() -> usize {
    200
}

/// Hyperparameter search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GprConfig {
    /// Random restarts in addition to the unit length-scale start.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
}

impl Default for GprConfig {
    fn default() -> Self {
        GprConfig { restarts: default_restarts(), seed: 0, max_iterations: default_iterations() }
    }
}

/// One independent GP for one output dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpOutput {
    pub y_mean: f64,
    pub y_scale: f64,
    pub log_lengthscales: Vec<f64>,
    /// Profiled signal variance in standardized output units.
    pub signal_variance: f64,
    /// Relative diagonal jitter that made the kernel matrix factorizable.
    pub jitter: f64,
    /// Training log marginal likelihood (standardized outputs).
    pub log_marginal_likelihood: f64,
    /// `K^-1 y` in standardized units; empty for a constant predictor.
    #[serde(with = "vec_b64")]
    pub weights: Vec<f64>,
}

impl GpOutput {
    fn is_constant(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Independent GPs sharing standardized training inputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct GprModel {
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    /// Standardized training inputs.
    pub x: Dense,
    pub outputs: Vec<GpOutput>,
    #[serde(skip)]
    factors: OnceLock<Vec<Option<Cholesky>>>,
}

impl Clone for GprModel {
    fn clone(&self) -> Self {
        GprModel {
            x_mean: self.x_mean.clone(),
            x_scale: self.x_scale.clone(),
            x: self.x.clone(),
            outputs: self.outputs.clone(),
            factors: OnceLock::new(),
        }
    }
}

/// Posterior mean and variance per output dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

fn mean_scale(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let var = v.map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn correlation(x: &Dense, lengths: &[f64], jitter: f64) -> Mat<f64> {
    let n = x.rows;
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            return 1.0 + jitter;
        }
        let r2: f64 = (0..x.cols)
            .map(|d| ((x.row(i)[d] - x.row(j)[d]) / lengths[d]).powi(2))
            .sum();
        matern52(r2.sqrt())
    })
}

fn factor(x: &Dense, lengths: &[f64]) -> Option<(Cholesky, f64)> {
    JITTERS
        .iter()
        .find_map(|&tau| Cholesky::new(&correlation(x, lengths, tau)).map(|c| (c, tau)))
}

/// Negative profiled log marginal likelihood and its gradient in
/// `log lengthscale`.
fn objective(x: &Dense, y: &[f64], theta: &[f64]) -> Option<(f64, Vec<f64>)> {
    let n = x.rows;
    let lengths: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
    let (chol, _) = factor(x, &lengths)?;
    let beta = chol.solve(y);
    let quad: f64 = y.iter().zip(&beta).map(|(a, b)| a * b).sum();
    let s2 = quad / n as f64;
    if !(s2 > 0.0) {
        return None;
    }
    let lml = -0.5 * n as f64 * s2.ln()
        - 0.5 * chol.log_det()
        - 0.5 * n as f64 * (1.0 + (2.0 * std::f64::consts::PI).ln());
    let kinv = chol.inverse();
    let mut grad = vec![0.0; x.cols];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let diffs: Vec<f64> = (0..x.cols)
                .map(|d| ((x.row(i)[d] - x.row(j)[d]) / lengths[d]).powi(2))
                .collect();
            let r = diffs.iter().sum::<f64>().sqrt();
            let common = 5.0 / 3.0 * (1.0 + SQRT5 * r) * (-SQRT5 * r).exp();
            let w = 0.5 * beta[i] * beta[j] / s2 - 0.5 * kinv[(i, j)];
            for d in 0..x.cols {
                grad[d] += w * common * diffs[d];
            }
        }
    }
    Some((-lml, grad.into_iter().map(|g| -g).collect()))
}

impl GprModel {
    /// Fits one GP per column of `y` (rows are samples).
    pub fn train(x: &[Vec<f64>], y: &[Vec<f64>], cfg: &GprConfig) -> Result<Self> {
        let n = x.len();
        if n == 0 || y.len() != n {
            return Err(Error::Dimension(format!("{n} inputs for {} outputs", y.len())));
        }
        let p = x[0].len();
        let m = y[0].len();
        if x.iter().any(|r| r.len() != p) || y.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("ragged training data".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if x[i] == x[j] && y[i] != y[j] {
                    return Err(Error::InvalidParameter(format!(
                        "duplicate inputs {j} and {i} with conflicting outputs"
                    )));
                }
            }
        }
        let (mut x_mean, mut x_scale) = (vec![0.0; p], vec![1.0; p]);
        for d in 0..p {
            let (mu, s) = mean_scale(x.iter().map(|r| r[d]));
            x_mean[d] = mu;
            x_scale[d] = if s > 0.0 { s } else { 1.0 };
        }
        let xs = Dense::from_rows(
            &x.iter()
                .map(|r| (0..p).map(|d| (r[d] - x_mean[d]) / x_scale[d]).collect())
                .collect::<Vec<Vec<f64>>>(),
        );
        let mut outputs = Vec::with_capacity(m);
        for k in 0..m {
            let (mu, s) = mean_scale(y.iter().map(|r| r[k]));
            if n == 1 || s == 0.0 {
                outputs.push(GpOutput {
                    y_mean: mu,
                    y_scale: 1.0,
                    log_lengthscales: vec![0.0; p],
                    signal_variance: 0.0,
                    jitter: 0.0,
                    log_marginal_likelihood: 0.0,
                    weights: Vec::new(),
                });
                continue;
            }
            let ys: Vec<f64> = y.iter().map(|r| (r[k] - mu) / s).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64));
            let mut starts = vec![vec![0.0; p]];
            for _ in 0..cfg.restarts {
                starts.push((0..p).map(|_| rng.gen_range(-2.3..2.3)).collect());
            }
            let opts = LbfgsOptions { max_iterations: cfg.max_iterations, ..Default::default() };
            let mut best: Option<(f64, Vec<f64>)> = None;
            for s0 in &starts {
                if let Some(found) = minimize(|t| objective(&xs, &ys, t), s0, -LOG_BOUND, LOG_BOUND, opts) {
                    if best.as_ref().is_none_or(|b| found.value < b.0) {
                        best = Some((found.value, found.x));
                    }
                }
            }
            let (neg_lml, theta) = best.ok_or_else(|| {
                Error::Singular(format!("kernel matrix of output {k} not SPD after maximum jitter"))
            })?;
            let lengths: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
            let (chol, jitter) = factor(&xs, &lengths)
                .ok_or_else(|| Error::Singular(format!("kernel matrix of output {k} not SPD")))?;
            let weights = chol.solve(&ys);
            let quad: f64 = ys.iter().zip(&weights).map(|(a, b)| a * b).sum();
            outputs.push(GpOutput {
                y_mean: mu,
                y_scale: s,
                log_lengthscales: theta,
                signal_variance: quad / n as f64,
                jitter,
                log_marginal_likelihood: -neg_lml,
                weights,
            });
        }
        Ok(GprModel { x_mean, x_scale, x: xs, outputs, factors: OnceLock::new() })
    }

    pub fn input_dim(&self) -> usize {
        self.x_mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.len()
    }

    fn factors(&self) -> &[Option<Cholesky>] {
        self.factors.get_or_init(|| {
            self.outputs
                .iter()
                .map(|o| {
                    if o.is_constant() {
                        return None;
                    }
                    let lengths: Vec<f64> = o.log_lengthscales.iter().map(|t| t.exp()).collect();
                    Cholesky::new(&correlation(&self.x, &lengths, o.jitter))
                })
                .collect()
        })
    }

    /// Posterior mean only; cheaper than [`GprModel::predict`].
    pub fn predict_mean(&self, q: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(q, false)?.mean)
    }

    pub fn predict(&self, q: &[f64]) -> Result<Prediction> {
        self.evaluate(q, true)
    }

    fn evaluate(&self, q: &[f64], with_variance: bool) -> Result<Prediction> {
        let p = self.input_dim();
        if q.len() != p {
            return Err(Error::Dimension(format!("query of length {} for {p} inputs", q.len())));
        }
        let qs: Vec<f64> = (0..p).map(|d| (q[d] - self.x_mean[d]) / self.x_scale[d]).collect();
        let mut mean = Vec::with_capacity(self.outputs.len());
        let mut variance = Vec::with_capacity(self.outputs.len());
        for (k, o) in self.outputs.iter().enumerate() {
            if o.is_constant() {
                mean.push(o.y_mean);
                variance.push(0.0);
                continue;
            }
            let kq: Vec<f64> = (0..self.x.rows)
                .map(|i| {
                    let r2: f64 = (0..p)
                        .map(|d| ((self.x.row(i)[d] - qs[d]) / o.log_lengthscales[d].exp()).powi(2))
                        .sum();
                    matern52(r2.sqrt())
                })
                .collect();
            let m: f64 = kq.iter().zip(&o.weights).map(|(a, b)| a * b).sum();
            mean.push(o.y_mean + o.y_scale * m);
            if with_variance {
                let v = match &self.factors()[k] {
                    Some(c) => {
                        let s = c.solve(&kq);
                        let red: f64 = kq.iter().zip(&s).map(|(a, b)| a * b).sum();
                        (o.signal_variance * (1.0 + o.jitter - red)).max(0.0)
                    }
                    None => 0.0,
                };
                variance.push(v * o.y_scale * o.y_scale);
            } else {
                variance.push(f64::NAN);
            }
        }
        Ok(Prediction { mean, variance })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_gradient_matches_finite_differences() {
        let x = Dense::from_rows(&[vec![0.0, 0.1], vec![0.5, -0.3], vec![1.0, 0.7], vec![-0.4, 0.2]]);
        let y = [0.3, -1.0, 0.8, 0.1];
        let theta = [0.2, -0.4];
        let (_, g) = objective(&x, &y, &theta).unwrap();
        for d in 0..2 {
            let h = 1e-6;
            let mut tp = theta;
            tp[d] += h;
            let mut tm = theta;
            tm[d] -= h;
            let fd = (objective(&x, &y, &tp).unwrap().0 - objective(&x, &y, &tm).unwrap().0) / (2.0 * h);
            assert!((fd - g[d]).abs() < 1e-6 * (1.0 + fd.abs()), "{d}: {fd} vs {}", g[d]);
        }
    }

    #[test]
    fn interpolates_training_data() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0, (i * i) as f64 / 121.0]).collect();
        let y: Vec<Vec<f64>> = x.iter().map(|r| vec![(3.0 * r[0]).sin() + r[1], 2.0]).collect();
        let m = GprModel::train(&x, &y, &GprConfig::default()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let p = m.predict(xi).unwrap();
            assert!((p.mean[0] - yi[0]).abs() <= 1e-6 * yi[0].abs().max(1.0));
            assert_eq!(p.mean[1], 2.0);
            assert_eq!(p.variance[1], 0.0);
        }
    }

    #[test]
    fn single_sample_is_constant() {
        let m = GprModel::train(&[vec![1.0, 2.0]], &[vec![3.0]], &GprConfig::default()).unwrap();
        assert_eq!(m.predict_mean(&[5.0, -1.0]).unwrap(), vec![3.0]);
        assert!(m.predict_mean(&[5.0]).is_err());
    }

    #[test]
    fn conflicting_duplicates_are_rejected() {
        let x = vec![vec![0.0], vec![0.0]];
        assert!(GprModel::train(&x, &[vec![1.0], vec![2.0]], &GprConfig::default()).is_err());
    }
}

//! L2-regularised logistic regression fit by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearConfig {
    pub lambda: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self { lambda: 1e-3, grad_tol: 1e-6, max_iter: 5000 }
    }
}

/// Logistic model over standardised features. Columns with zero training
/// variance are dropped at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub n_features: usize,
    pub kept: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFitReport {
    pub iterations: usize,
    pub converged: bool,
    pub dropped_columns: Vec<usize>,
    pub loss_history: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(-y z))` for `y` in {-1, +1}, overflow-safe.
fn log_loss(z: f64, label: bool) -> f64 {
    let m = if label { -z } else { z };
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

impl LogisticModel {
    fn standardize(&self, row: &[f64]) -> impl Iterator<Item = f64> + '_ {
        let row = row.to_vec();
        self.kept.iter().enumerate().map(move |(j, &c)| (row[c] - self.mean[j]) / self.std[j])
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        self.intercept + self.standardize(row).zip(&self.weights).map(|(x, w)| x * w).sum::<f64>()
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

pub fn train_linear(features: &[Vec<f64>], labels: &[bool], cfg: &LinearConfig) -> Result<(LogisticModel, LinearFitReport)> {
    train_linear_weighted(features, labels, &vec![1.0; labels.len()], cfg)
}

/// Weighted fit; integer weights are equivalent to duplicating rows.
///
/// The step size is `1 / L` with `L = 0.25 * mean_w ||x~||^2 + lambda`
/// (`x~` = standardised row plus intercept), an upper bound on the Lipschitz
/// constant of the gradient, so the objective never increases.
pub fn train_linear_weighted(
    features: &[Vec<f64>],
    labels: &[bool],
    sample_weights: &[f64],
    cfg: &LinearConfig,
) -> Result<(LogisticModel, LinearFitReport)> {
    let n = features.len();
    if n == 0 || labels.len() != n || sample_weights.len() != n {
        return Err(Error::DegenerateFeatures(format!(
            "{n} rows, {} labels, {} weights",
            labels.len(),
            sample_weights.len()
        )));
    }
    let d = features[0].len();
    if features.iter().any(|r| r.len() != d) {
        return Err(Error::DegenerateFeatures("ragged feature rows".into()));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) || sample_weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::DegenerateFeatures("non-finite feature or negative weight".into()));
    }
    let wsum: f64 = sample_weights.iter().sum();
    if wsum <= 0.0 {
        return Err(Error::DegenerateFeatures("all sample weights are zero".into()));
    }

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let (mut mean, mut std) = (Vec::new(), Vec::new());
    for c in 0..d {
        let m = features.iter().zip(sample_weights).map(|(r, w)| w * r[c]).sum::<f64>() / wsum;
        let var = features.iter().zip(sample_weights).map(|(r, w)| w * (r[c] - m).powi(2)).sum::<f64>() / wsum;
        let s = var.sqrt();
        if s > 1e-12 * (1.0 + m.abs()) {
            kept.push(c);
            mean.push(m);
            std.push(s);
        } else {
            log::warn!("dropping zero-variance feature column {c}");
            dropped.push(c);
        }
    }
    let k = kept.len();
    let x: Vec<Vec<f64>> =
        features.iter().map(|r| kept.iter().enumerate().map(|(j, &c)| (r[c] - mean[j]) / std[j]).collect()).collect();

    let sq_norm = x.iter().zip(sample_weights).map(|(r, w)| w * (1.0 + r.iter().map(|v| v * v).sum::<f64>())).sum::<f64>() / wsum;
    let step = 1.0 / (0.25 * sq_norm + cfg.lambda);

    let objective = |w: &[f64], b: f64| -> f64 {
        let data = x
            .iter()
            .zip(labels)
            .zip(sample_weights)
            .map(|((r, &y), sw)| sw * log_loss(b + r.iter().zip(w).map(|(a, c)| a * c).sum::<f64>(), y))
            .sum::<f64>()
            / wsum;
        data + 0.5 * cfg.lambda * w.iter().map(|v| v * v).sum::<f64>()
    };

    let mut w = vec![0.0; k];
    let mut b = 0.0;
    let mut history = vec![objective(&w, b)];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.max_iter {
        let mut gw = vec![0.0; k];
        let mut gb = 0.0;
        for ((r, &y), sw) in x.iter().zip(labels).zip(sample_weights) {
            let z = b + r.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let resid = sw * (sigmoid(z) - if y { 1.0 } else { 0.0 });
            gb += resid;
            for (g, v) in gw.iter_mut().zip(r) {
                *g += resid * v;
            }
        }
        gb /= wsum;
        for (g, wj) in gw.iter_mut().zip(&w) {
            *g = *g / wsum + cfg.lambda * wj;
        }
        let gnorm = (gb * gb + gw.iter().map(|g| g * g).sum::<f64>()).sqrt();
        if gnorm < cfg.grad_tol {
            converged = true;
            break;
        }
        b -= step * gb;
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= step * g;
        }
        iterations += 1;
        history.push(objective(&w, b));
    }

    Ok((
        LogisticModel { n_features: d, kept, mean, std, weights: w, intercept: b },
        LinearFitReport { iterations, converged, dropped_columns: dropped, loss_history: history },
    ))
}

//! Multinomial logistic regression trained by mini-batch SGD.
//!
//! Weights are stored row-major as `n_classes x dim`; slot 0 of every row is
//! the bias and is excluded from the L2 penalty.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainDiagnostics};
use crate::dataset::SparseVector;
use crate::error::{Error, Result};
use crate::seed;

/// A feature row as seen by the linear head. Implementations add the bias
/// term themselves.
pub trait FeatureRow: Sync {
    /// `w[0] + sum_j w[slot(j)] * x_j`
    fn dot(&self, w: &[f64]) -> f64;
    /// `g[0] += a; g[slot(j)] += a * x_j`
    fn axpy(&self, a: f64, g: &mut [f64]);
    /// Highest weight slot this row touches.
    fn max_slot(&self) -> usize;
}

/// Sparse rows use the feature index directly as the weight slot.
impl FeatureRow for SparseVector {
    fn dot(&self, w: &[f64]) -> f64 {
        w[0] + self.dot_dense(w)
    }

    fn axpy(&self, a: f64, g: &mut [f64]) {
        g[0] += a;
        for &(i, v) in self.pairs() {
            if let Some(slot) = g.get_mut(i as usize) {
                *slot += a * v;
            }
        }
    }

    fn max_slot(&self) -> usize {
        self.max_index() as usize
    }
}

/// Dense rows map position `j` to slot `j + 1`.
impl FeatureRow for Vec<f64> {
    fn dot(&self, w: &[f64]) -> f64 {
        w[0] + self.iter().zip(&w[1..]).map(|(x, w)| x * w).sum::<f64>()
    }

    fn axpy(&self, a: f64, g: &mut [f64]) {
        g[0] += a;
        for (gi, x) in g[1..].iter_mut().zip(self) {
            *gi += a * x;
        }
    }

    fn max_slot(&self) -> usize {
        self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxRegression {
    n_classes: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl SoftmaxRegression {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        SoftmaxRegression {
            n_classes,
            dim,
            weights: vec![0.0; n_classes * dim],
        }
    }

    pub fn from_weights(n_classes: usize, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if n_classes < 2 || dim == 0 || weights.len() != n_classes * dim {
            return Err(Error::invalid(format!(
                "weight array of length {} does not fit {n_classes} x {dim}",
                weights.len()
            )));
        }
        Ok(SoftmaxRegression {
            n_classes,
            dim,
            weights,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.dim..(k + 1) * self.dim]
    }

    pub fn predict_proba<R: FeatureRow + ?Sized>(&self, x: &R) -> Vec<f64> {
        let scores: Vec<f64> = (0..self.n_classes).map(|k| x.dot(self.row(k))).collect();
        softmax(&scores)
    }

    /// Regularised mean negative log-likelihood and its gradient.
    pub fn loss_and_gradient<R: FeatureRow>(
        &self,
        rows: &[&R],
        labels: &[usize],
        l2: f64,
    ) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.weights.len()];
        let n = rows.len().max(1) as f64;
        let mut loss = 0.0;
        for (x, &y) in rows.iter().zip(labels) {
            let p = self.predict_proba(*x);
            loss -= p[y].max(f64::MIN_POSITIVE).ln();
            for (k, pk) in p.iter().enumerate() {
                let coef = (pk - if k == y { 1.0 } else { 0.0 }) / n;
                x.axpy(coef, &mut grad[k * self.dim..(k + 1) * self.dim]);
            }
        }
        loss /= n;
        for k in 0..self.n_classes {
            for j in 1..self.dim {
                let w = self.weights[k * self.dim + j];
                loss += 0.5 * l2 * w * w;
                grad[k * self.dim + j] += l2 * w;
            }
        }
        (loss, grad)
    }

    /// Fits by mini-batch SGD with inverse-time learning-rate decay. The seed
    /// fixes both the initial weights and the shuffle order.
    pub fn fit<R: FeatureRow>(
        rows: &[R],
        labels: &[usize],
        n_classes: usize,
        config: &TrainConfig,
    ) -> Result<(Self, TrainDiagnostics)> {
        config.validate()?;
        check_labels(labels, n_classes)?;
        if rows.len() != labels.len() {
            return Err(Error::invalid("rows and labels differ in length"));
        }
        let dim = rows.iter().map(|r| r.max_slot()).max().unwrap_or(0) + 1;
        let mut rng = seed::rng(config.seed, &[seed::label_hash("sgd")]);
        let mut model = SoftmaxRegression::zeros(n_classes, dim);
        for w in model.weights.iter_mut() {
            *w = rng.gen_range(-0.01..0.01);
        }

        let mut order: Vec<usize> = (0..rows.len()).collect();
        let mut grad = vec![0.0; model.weights.len()];
        let mut step = 0usize;
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(config.batch_size) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let scale = 1.0 / batch.len() as f64;
                for &i in batch {
                    let p = model.predict_proba(&rows[i]);
                    for (k, pk) in p.iter().enumerate() {
                        let coef = (pk - if k == labels[i] { 1.0 } else { 0.0 }) * scale;
                        rows[i].axpy(coef, &mut grad[k * dim..(k + 1) * dim]);
                    }
                }
                let lr = config.learning_rate / (1.0 + config.lr_decay * step as f64);
                for (j, (w, g)) in model.weights.iter_mut().zip(&grad).enumerate() {
                    let reg = if j % dim == 0 { 0.0 } else { config.l2 * *w };
                    *w -= lr * (g + reg);
                }
                step += 1;
            }
        }

        let refs: Vec<&R> = rows.iter().collect();
        let (final_loss, _) = model.loss_and_gradient(&refs, labels, config.l2);
        Ok((
            model,
            TrainDiagnostics {
                final_loss,
                epochs: config.epochs,
            },
        ))
    }
}

pub(crate) fn check_labels(labels: &[usize], n_classes: usize) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if n_classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::invalid(format!("label {bad} outside 0..{n_classes}")));
    }
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(Error::invalid(format!(
            "training set has a single class ({})",
            labels[0]
        )));
    }
    Ok(())
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / z).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

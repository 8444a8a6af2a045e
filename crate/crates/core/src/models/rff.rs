//! Random Fourier features for the RBF kernel `exp(-gamma * |x - x'|^2)`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::SparseVector;
use crate::error::{Error, Result};
use crate::seed;

/// A frozen random projection. Frequencies are stored feature-major so a
/// sparse input touches one contiguous block per nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RffParams {
    input_dim: usize,
    n_features: usize,
    gamma: f64,
    /// `input_dim x n_features`
    frequencies: Vec<f64>,
    phases: Vec<f64>,
}

impl RffParams {
    /// Draws `n_features` frequencies from `N(0, 2 gamma I)` and phases from
    /// `U(0, 2 pi)`.
    pub fn new(input_dim: usize, n_features: usize, gamma: f64, seed: u64) -> Result<Self> {
        if input_dim == 0 || n_features == 0 {
            return Err(Error::invalid("random features need positive dimensions"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::config("gamma", "must be positive"));
        }
        let mut rng = seed::rng(seed, &[seed::label_hash("rff")]);
        let normal = Normal::new(0.0, (2.0 * gamma).sqrt())
            .map_err(|e| Error::invalid(e.to_string()))?;
        let frequencies = (0..input_dim * n_features)
            .map(|_| normal.sample(&mut rng))
            .collect();
        let phases = (0..n_features)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        Ok(RffParams {
            input_dim,
            n_features,
            gamma,
            frequencies,
            phases,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// `v_j = sqrt(2 / D) cos(w_j . x + b_j)`. Features beyond `input_dim` are
    /// ignored.
    pub fn transform(&self, x: &SparseVector) -> Vec<f64> {
        let d = self.n_features;
        let mut proj = self.phases.clone();
        for &(i, v) in x.pairs() {
            let i = i as usize;
            if i == 0 || i > self.input_dim {
                continue;
            }
            let block = &self.frequencies[(i - 1) * d..i * d];
            for (p, w) in proj.iter_mut().zip(block) {
                *p += w * v;
            }
        }
        let scale = (2.0 / d as f64).sqrt();
        proj.iter_mut().for_each(|p| *p = scale * p.cos());
        proj
    }
}

/// Kernel estimate from two transformed vectors.
pub fn kernel_estimate(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact RBF kernel value.
pub fn rbf_kernel(a: &SparseVector, b: &SparseVector, gamma: f64) -> f64 {
    (-gamma * a.squared_distance(b)).exp()
}

/// Free-function form of [`RffParams::transform`].
pub fn rff_transform(x: &SparseVector, params: &RffParams) -> Vec<f64> {
    params.transform(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_of(vals: &[f64]) -> SparseVector {
        SparseVector::from_dense(vals)
    }

    #[test]
    fn self_kernel_near_one() {
        let d = 2048;
        let params = RffParams::new(3, d, 0.5, 1).unwrap();
        let x = vec_of(&[0.3, -1.0, 2.0]);
        let z = params.transform(&x);
        assert_eq!(z.len(), d);
        let k = kernel_estimate(&z, &z);
        assert!((k - 1.0).abs() < 3.0 / (d as f64).sqrt(), "k = {k}");
    }

    #[test]
    fn distant_points_near_zero() {
        let d = 2048;
        let params = RffParams::new(2, d, 0.5, 2).unwrap();
        let a = params.transform(&vec_of(&[0.0, 0.0]));
        let b = params.transform(&vec_of(&[50.0, -40.0]));
        assert!(kernel_estimate(&a, &b).abs() < 3.0 / (d as f64).sqrt());
    }

    #[test]
    fn frozen_by_seed() {
        assert_eq!(
            RffParams::new(4, 16, 1.0, 3).unwrap(),
            RffParams::new(4, 16, 1.0, 3).unwrap()
        );
        assert_ne!(
            RffParams::new(4, 16, 1.0, 3).unwrap(),
            RffParams::new(4, 16, 1.0, 4).unwrap()
        );
    }

    #[test]
    fn invalid_params() {
        assert!(RffParams::new(0, 4, 1.0, 0).is_err());
        assert!(RffParams::new(2, 0, 1.0, 0).is_err());
        assert!(RffParams::new(2, 4, 0.0, 0).is_err());
    }
}

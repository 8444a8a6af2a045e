//! Seeded synthetic classification datasets.
//!
//! These stand in for real data in tests and desk-scale runs. Every
//! generator is a pure function of its arguments; ids run from 1 and native
//! labels are `1..=K`.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::{Normal, StandardNormal};

use super::{Dataset, Example, SparseVector};
use crate::error::{Error, Result};
use crate::models::sigmoid;
use crate::seed;

fn assemble(rows: Vec<(Vec<f64>, usize)>, n_classes: usize) -> Dataset {
    let n_features = rows.iter().map(|(x, _)| x.len()).max().unwrap_or(0) as u32;
    Dataset {
        examples: rows
            .into_iter()
            .enumerate()
            .map(|(i, (x, label))| Example {
                id: i as u64 + 1,
                features: SparseVector::from_dense(&x),
                label,
                domain: None,
            })
            .collect(),
        native_labels: (1..=n_classes).map(|k| k as f64).collect(),
        n_features,
    }
}

/// Isotropic Gaussian clusters, one per class, with centres drawn from
/// `N(0, separation^2)` and unit noise.
pub fn gaussian_blobs(
    n: usize,
    n_classes: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_classes < 2 || dim == 0 || !(separation > 0.0) {
        return Err(Error::invalid(
            "blobs need at least 2 classes, 1 dimension and a positive separation",
        ));
    }
    let mut rng = seed::rng(seed, &[seed::label_hash("blobs")]);
    let centres: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| {
            (0..dim)
                .map(|_| separation * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let rows = (0..n)
        .map(|i| {
            let k = i % n_classes;
            let x = centres[k]
                .iter()
                .map(|c| c + rng.sample::<f64, _>(StandardNormal))
                .collect();
            (x, k)
        })
        .collect();
    Ok(assemble(rows, n_classes))
}

/// Two noisy concentric rings (radius 1 for class 0, 2 for class 1) in the
/// plane; no linear boundary separates them.
pub fn concentric_circles(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    let radial = Normal::new(0.0, noise).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = seed::rng(seed, &[seed::label_hash("circles")]);
    let rows = (0..n)
        .map(|i| {
            let k = i % 2;
            let r = (k + 1) as f64 + radial.sample(&mut rng);
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            (vec![r * theta.cos(), r * theta.sin()], k)
        })
        .collect();
    Ok(assemble(rows, 2))
}

/// Binary task drawn from a logistic model with standard normal inputs and
/// weights: `P(y = 1 | x) = sigmoid(w . x)`.
pub fn logistic_task(n: usize, dim: usize, seed: u64) -> Result<Dataset> {
    if dim == 0 {
        return Err(Error::invalid("logistic task needs at least 1 dimension"));
    }
    let mut rng = seed::rng(seed, &[seed::label_hash("logistic")]);
    let w: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let rows = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let z: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
            let y = usize::from(rng.gen::<f64>() < sigmoid(z));
            (x, y)
        })
        .collect();
    Ok(assemble(rows, 2))
}

/// Number of features in [`covtype_like`] rows.
pub const COVTYPE_FEATURES: usize = 54;

const COVTYPE_PRIOR: [f64; 7] = [0.365, 0.488, 0.062, 0.005, 0.016, 0.030, 0.035];
const COVTYPE_SCALE: [f64; 10] = [
    3858.0, 360.0, 66.0, 1397.0, 601.0, 7117.0, 254.0, 254.0, 254.0, 7173.0,
];
const CLUSTERS_PER_CLASS: usize = 12;
const CLUSTER_SPREAD: f64 = 0.05;
const LABEL_NOISE: f64 = 0.03;

/// A seven-class dataset shaped like the forest cover-type data: ten
/// integer-valued continuous columns on their native scales followed by a
/// 4-way and a 40-way one-hot block, with skewed class priors. Each class is
/// a mixture of clusters in the continuous block, and each cluster prefers
/// one category per one-hot block, so the classes are not linearly separable.
pub fn covtype_like(n: usize, seed: u64) -> Result<Dataset> {
    struct Cluster {
        centre: [f64; 10],
        area: usize,
        soil: usize,
    }
    let mut rng = seed::rng(seed, &[seed::label_hash("covtype-structure")]);
    let clusters: Vec<Vec<Cluster>> = (0..COVTYPE_PRIOR.len())
        .map(|_| {
            (0..CLUSTERS_PER_CLASS)
                .map(|_| Cluster {
                    centre: std::array::from_fn(|_| rng.gen_range(0.15..0.85)),
                    area: rng.gen_range(0..4),
                    soil: rng.gen_range(0..40),
                })
                .collect()
        })
        .collect();
    let prior = WeightedIndex::new(COVTYPE_PRIOR).expect("valid prior");
    let spread = Normal::new(0.0, CLUSTER_SPREAD).expect("valid spread");
    let mut rng = seed::rng(seed, &[seed::label_hash("covtype-rows")]);
    let rows = (0..n)
        .map(|_| {
            let k = prior.sample(&mut rng);
            let c = &clusters[k][rng.gen_range(0..CLUSTERS_PER_CLASS)];
            let mut x = vec![0.0; COVTYPE_FEATURES];
            for j in 0..10 {
                let u = (c.centre[j] + spread.sample(&mut rng)).clamp(0.0, 1.0);
                x[j] = (u * COVTYPE_SCALE[j]).round();
            }
            let area = if rng.gen::<f64>() < 0.3 { c.area } else { rng.gen_range(0..4) };
            let soil = if rng.gen::<f64>() < 0.2 { c.soil } else { rng.gen_range(0..40) };
            x[10 + area] = 1.0;
            x[14 + soil] = 1.0;
            let label = if rng.gen::<f64>() < LABEL_NOISE {
                prior.sample(&mut rng)
            } else {
                k
            };
            (x, label)
        })
        .collect();
    let mut ds = assemble(rows, COVTYPE_PRIOR.len());
    ds.n_features = COVTYPE_FEATURES as u32;
    Ok(ds)
}

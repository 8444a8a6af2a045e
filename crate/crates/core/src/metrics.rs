//! Evaluation metrics and learning-curve statistics.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Domain, Example, Instance, TokenSentence};
use crate::error::{Error, Result};
use crate::models::ProbabilisticClassifier;
use crate::seed;

/// z-value for the two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Accuracy,
    F1,
}

/// Binary confusion counts; the positive class is class 1 for examples and
/// "break" for tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub correct: u64,
    pub total: u64,
}

impl Confusion {
    pub fn record(&mut self, predicted: usize, actual: usize) {
        self.total += 1;
        if predicted == actual {
            self.correct += 1;
        }
        match (predicted == 1, actual == 1) {
            (true, true) => self.true_pos += 1,
            (true, false) => self.false_pos += 1,
            (false, true) => self.false_neg += 1,
            (false, false) => {}
        }
    }

    fn merge(self, o: Confusion) -> Confusion {
        Confusion {
            true_pos: self.true_pos + o.true_pos,
            false_pos: self.false_pos + o.false_pos,
            false_neg: self.false_neg + o.false_neg,
            correct: self.correct + o.correct,
            total: self.total + o.total,
        }
    }

    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }

    pub fn precision(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_pos)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_neg)
    }

    /// `2PR / (P + R)`, zero when `P + R = 0`.
    pub fn f1(&self) -> f64 {
        f1_from(self.precision(), self.recall())
    }

    pub fn value(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Accuracy => self.accuracy(),
            Metric::F1 => self.f1(),
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Something a model can be scored on.
pub trait Evaluable {
    fn tally(&self, model: &ProbabilisticClassifier, into: &mut Confusion) -> Result<()>;
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

impl Evaluable for Example {
    fn tally(&self, model: &ProbabilisticClassifier, into: &mut Confusion) -> Result<()> {
        let p = model.predict_example(self)?;
        into.record(argmax(&p), self.label);
        Ok(())
    }
}

impl Evaluable for TokenSentence {
    fn tally(&self, model: &ProbabilisticClassifier, into: &mut Confusion) -> Result<()> {
        for (p, &gold) in model.predict_sentence(self)?.iter().zip(&self.labels) {
            into.record(usize::from(p[1] > p[0]), usize::from(gold));
        }
        Ok(())
    }
}

pub fn confusion<T: Evaluable + Sync>(
    model: &ProbabilisticClassifier,
    holdout: &[T],
) -> Result<Confusion> {
    if holdout.is_empty() {
        return Err(Error::invalid("empty holdout set"));
    }
    holdout
        .par_iter()
        .map(|x| {
            let mut c = Confusion::default();
            x.tally(model, &mut c)?;
            Ok(c)
        })
        .try_reduce(Confusion::default, |a, b| Ok(a.merge(b)))
}

pub fn evaluate<T: Evaluable + Sync>(
    model: &ProbabilisticClassifier,
    holdout: &[T],
    metric: Metric,
) -> Result<f64> {
    Ok(confusion(model, holdout)?.value(metric))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub training_size: usize,
    pub value: f64,
}

/// Metric values against strictly increasing training sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CurvePoint>", into = "Vec<CurvePoint>")]
pub struct LearningCurve {
    points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn new(points: Vec<CurvePoint>) -> Result<Self> {
        if points
            .windows(2)
            .any(|w| w[0].training_size >= w[1].training_size)
        {
            return Err(Error::invalid(
                "learning curve sizes must be strictly increasing",
            ));
        }
        Ok(LearningCurve { points })
    }

    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(training_size, value)| CurvePoint {
                    training_size,
                    value,
                })
                .collect(),
        )
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.training_size).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl TryFrom<Vec<CurvePoint>> for LearningCurve {
    type Error = Error;
    fn try_from(p: Vec<CurvePoint>) -> Result<Self> {
        LearningCurve::new(p)
    }
}

impl From<LearningCurve> for Vec<CurvePoint> {
    fn from(c: LearningCurve) -> Self {
        c.points
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub training_sizes: Vec<usize>,
    pub mean: Vec<f64>,
    /// `(lower, upper)` normal-approximation 95% bands; absent for one curve.
    pub bands: Option<(Vec<f64>, Vec<f64>)>,
    pub n_curves: usize,
}

impl AggregateCurve {
    pub fn mean_curve(&self) -> Result<LearningCurve> {
        LearningCurve::new(
            self.training_sizes
                .iter()
                .zip(&self.mean)
                .map(|(&training_size, &value)| CurvePoint {
                    training_size,
                    value,
                })
                .collect(),
        )
    }
}

/// Pointwise mean and `mean +- 1.96 * s / sqrt(n)`.
pub fn aggregate_curves(curves: &[LearningCurve]) -> Result<AggregateCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::invalid("no curves to aggregate"))?;
    let sizes = first.sizes();
    if curves.iter().any(|c| c.sizes() != sizes) {
        return Err(Error::invalid("curves do not share a training-size grid"));
    }
    let n = curves.len();
    let mut mean = Vec::with_capacity(sizes.len());
    let mut half_width = Vec::with_capacity(sizes.len());
    for i in 0..sizes.len() {
        // Welford keeps the mean of identical values exact.
        let (mut m, mut m2) = (0.0f64, 0.0f64);
        for (k, c) in curves.iter().enumerate() {
            let x = c.points[i].value;
            let delta = x - m;
            m += delta / (k + 1) as f64;
            m2 += delta * (x - m);
        }
        mean.push(m);
        if n > 1 {
            let sd = (m2 / (n - 1) as f64).max(0.0).sqrt();
            half_width.push(Z_95 * sd / (n as f64).sqrt());
        }
    }
    let bands = (n > 1).then(|| {
        (
            mean.iter().zip(&half_width).map(|(m, h)| m - h).collect(),
            mean.iter().zip(&half_width).map(|(m, h)| m + h).collect(),
        )
    });
    Ok(AggregateCurve {
        training_sizes: sizes,
        mean,
        bands,
        n_curves: n,
    })
}

/// A label saving measured at a crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gain {
    /// `(reference_size - active_size) / reference_size`
    pub fraction: f64,
    pub active_size: usize,
    pub reference_size: usize,
}

impl Gain {
    fn new(active_size: usize, reference_size: usize) -> Gain {
        Gain {
            fraction: (reference_size as f64 - active_size as f64) / reference_size as f64,
            active_size,
            reference_size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct GainReport {
    pub last_vs_max: Option<Gain>,
    pub first_vs_final: Option<Gain>,
}

fn nonempty(active: &LearningCurve, passive: &LearningCurve) -> Result<()> {
    if active.is_empty() || passive.is_empty() {
        return Err(Error::invalid("gain needs nonempty curves"));
    }
    Ok(())
}

/// Saving at the latest point where the active curve rises strictly above
/// the passive maximum.
pub fn last_vs_max_gain(active: &LearningCurve, passive: &LearningCurve) -> Result<Option<Gain>> {
    nonempty(active, passive)?;
    let mut best = passive.points[0];
    for p in &passive.points[1..] {
        if p.value > best.value {
            best = *p;
        }
    }
    let pts = &active.points;
    let crossing = (0..pts.len()).rev().find(|&i| {
        pts[i].value > best.value && (i == 0 || pts[i - 1].value <= best.value)
    });
    Ok(crossing.map(|i| Gain::new(pts[i].training_size, best.training_size)))
}

/// Saving at the earliest point where the active curve rises strictly above
/// the final passive value.
pub fn first_vs_final_gain(
    active: &LearningCurve,
    passive: &LearningCurve,
) -> Result<Option<Gain>> {
    nonempty(active, passive)?;
    let last = passive.points[passive.points.len() - 1];
    Ok(active
        .points
        .iter()
        .find(|p| p.value > last.value)
        .map(|p| Gain::new(p.training_size, last.training_size)))
}

pub fn gain_report(active: &LearningCurve, passive: &LearningCurve) -> Result<GainReport> {
    Ok(GainReport {
        last_vs_max: last_vs_max_gain(active, passive)?,
        first_vs_final: first_vs_final_gain(active, passive)?,
    })
}

/// `sum_i rho^i v_i / sum_i rho^i` over round indices.
pub fn discounted_average(curve: &LearningCurve, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::config("rho", "must lie in (0, 1]"));
    }
    if curve.is_empty() {
        return Err(Error::invalid("discounted average of an empty curve"));
    }
    let (mut num, mut den, mut w) = (0.0, 0.0, 1.0);
    for p in &curve.points {
        num += w * p.value;
        den += w;
        w *= rho;
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSamplingEstimate {
    pub variance: f64,
    /// Metric of every half-model, two per pair.
    pub values: Vec<f64>,
}

/// Sample variance with the `n - 1` denominator.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    // Welford: identical values give exactly zero.
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for (k, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    m2.max(0.0) / (n - 1) as f64
}

/// Splits `items` into two complementary halves, stratified by
/// [`Instance::stratum`].
fn stratified_halves<T: Instance>(items: &[T], seed: u64) -> (Vec<T>, Vec<T>) {
    let mut strata: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, x) in items.iter().enumerate() {
        strata.entry(x.stratum()).or_default().push(i);
    }
    let mut rng = seed::rng(seed, &[seed::label_hash("halves")]);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    let mut odd_to_a = true;
    for idx in strata.values_mut() {
        idx.shuffle(&mut rng);
        let mut take = idx.len() / 2;
        if idx.len() % 2 == 1 {
            if odd_to_a {
                take += 1;
            }
            odd_to_a = !odd_to_a;
        }
        a.extend(idx[..take].iter().map(|&i| items[i].clone()));
        b.extend(idx[take..].iter().map(|&i| items[i].clone()));
    }
    (a, b)
}

/// Variance of the metric across models trained on complementary random
/// halves of `labeled`, pooled over `n_pairs` splits.
pub fn half_sampling_variance<T, F>(
    train: F,
    labeled: &[T],
    holdout: &[T],
    metric: Metric,
    n_pairs: usize,
    seed: u64,
) -> Result<HalfSamplingEstimate>
where
    T: Instance + Evaluable,
    F: Fn(&[T], u64) -> Result<ProbabilisticClassifier> + Sync,
{
    if n_pairs == 0 {
        return Err(Error::config("n_pairs", "must be at least 1"));
    }
    if labeled.len() < 4 {
        return Err(Error::invalid("half-sampling needs at least 4 labeled items"));
    }
    let mut counts: std::collections::BTreeMap<usize, usize> = Default::default();
    for x in labeled {
        *counts.entry(x.stratum()).or_default() += 1;
    }
    if counts.len() > 1 && counts.values().any(|&c| c < 2) {
        return Err(Error::invalid(
            "cannot halve the labeled set with every class in both halves",
        ));
    }
    let pairs: Vec<[f64; 2]> = (0..n_pairs)
        .into_par_iter()
        .map(|p| {
            let split_seed = seed::derive(seed, &[p as u64]);
            let (a, b) = stratified_halves(labeled, split_seed);
            let ma = train(&a, seed::derive(split_seed, &[0]))?;
            let mb = train(&b, seed::derive(split_seed, &[1]))?;
            Ok([evaluate(&ma, holdout, metric)?, evaluate(&mb, holdout, metric)?])
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = pairs.into_iter().flatten().collect();
    Ok(HalfSamplingEstimate {
        variance: sample_variance(&values),
        values,
    })
}

/// Domain mix and token lengths of a selected batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchComposition {
    pub size: usize,
    pub proportion_a: f64,
    pub proportion_b: f64,
    pub mean_length_a: Option<f64>,
    pub mean_length_b: Option<f64>,
    pub mean_length: f64,
}

pub fn batch_composition<T: Instance>(batch: &[T]) -> Result<BatchComposition> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let stats = |d: Domain| {
        let lens: Vec<usize> = batch
            .iter()
            .filter(|x| x.domain() == Some(d))
            .map(|x| x.length())
            .collect();
        let mean = (!lens.is_empty())
            .then(|| lens.iter().sum::<usize>() as f64 / lens.len() as f64);
        (lens.len(), mean)
    };
    let (n_a, mean_a) = stats(Domain::A);
    let (n_b, mean_b) = stats(Domain::B);
    let n = batch.len() as f64;
    Ok(BatchComposition {
        size: batch.len(),
        proportion_a: n_a as f64 / n,
        proportion_b: n_b as f64 / n,
        mean_length_a: mean_a,
        mean_length_b: mean_b,
        mean_length: batch.iter().map(|x| x.length()).sum::<usize>() as f64 / n,
    })
}

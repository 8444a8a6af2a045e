//! Selection strategies.
//!
//! Margin sampling ranks candidates by `M(x) = p1(x) - p2(x)` (optionally
//! multiplied by `L(x)^lambda` for sentences) in ascending order and takes the
//! first `batch_size`. Ties are broken by ascending id, so every selection is
//! a deterministic function of its inputs and seed.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Instance;
use crate::error::{Error, Result};
use crate::models::{ModelInput, ModelKind, Prediction, ProbabilisticClassifier};
use crate::seed;

const NORMALISATION_TOL: f64 = 1e-6;

/// Gap between the two largest class probabilities, in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct MarginScore(f64);

impl MarginScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_distribution(probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::invalid("probabilities must be non-negative"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > NORMALISATION_TOL {
        return Err(Error::invalid(format!("probabilities sum to {sum}")));
    }
    Ok(())
}

pub fn margin_score(probs: &[f64]) -> Result<MarginScore> {
    if probs.len() < 2 {
        return Err(Error::invalid("margin needs at least two classes"));
    }
    check_distribution(probs)?;
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &p in probs {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    Ok(MarginScore((first - second).clamp(0.0, 1.0)))
}

/// Sentence-level margin under token independence.
///
/// The best joint labeling takes every token's more likely label, so
/// `p1 = prod_t max(q_t, 1 - q_t)`. The runner-up flips exactly the token
/// whose (second / best) ratio is largest, giving
/// `M = p1 * (1 - max_t ratio_t)`.
pub fn sentence_margin(token_probs: &[[f64; 2]]) -> Result<MarginScore> {
    if token_probs.is_empty() {
        return Err(Error::invalid("sentence margin of an empty sentence"));
    }
    let mut best = 1.0;
    let mut max_ratio = 0.0f64;
    for pair in token_probs {
        check_distribution(pair)?;
        let (hi, lo) = if pair[0] >= pair[1] {
            (pair[0], pair[1])
        } else {
            (pair[1], pair[0])
        };
        best *= hi;
        max_ratio = max_ratio.max(lo / hi);
    }
    Ok(MarginScore((best * (1.0 - max_ratio)).clamp(0.0, 1.0)))
}

/// `M * L^lambda`.
pub fn penalized_margin(margin: MarginScore, length: usize, lambda: f64) -> Result<f64> {
    if length == 0 {
        return Err(Error::invalid("length penalty needs at least one token"));
    }
    Ok(margin.value() * (length as f64).powf(lambda))
}

/// Ranking key plus the raw margin it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub raw_margin: f64,
    pub penalized_margin: f64,
}

/// Subset of the pool considered for ranking: the `subset_size` items with the
/// smallest keyed hash of their ids, which is a uniform draw without
/// replacement that does not depend on pool order.
pub fn draw_subset<'a, T: Instance>(
    pool: &'a [T],
    subset_size: Option<usize>,
    seed: u64,
) -> Vec<&'a T> {
    match subset_size {
        Some(m) if m < pool.len() => {
            let salt = seed::label_hash("subset");
            let mut keyed: Vec<(u64, u64, &T)> = pool
                .iter()
                .map(|x| (seed::derive(seed, &[salt, x.id()]), x.id(), x))
                .collect();
            keyed.select_nth_unstable_by(m - 1, |a, b| (a.0, a.1).cmp(&(b.0, b.1)));
            keyed.truncate(m);
            keyed.into_iter().map(|k| k.2).collect()
        }
        _ => pool.iter().collect(),
    }
}

/// Scores candidates (concurrently) and returns the `batch_size` smallest
/// penalized margins in rank order.
pub fn select_scored<T, F>(
    pool: &[T],
    scorer: F,
    batch_size: usize,
    subset_size: Option<usize>,
    seed: u64,
) -> Result<Vec<(u64, Scored)>>
where
    T: Instance,
    F: Fn(&T) -> Result<Scored> + Sync,
{
    if pool.is_empty() {
        return Err(Error::invalid("cannot select from an empty pool"));
    }
    if batch_size == 0 {
        return Err(Error::config("batch_size", "must be positive"));
    }
    let candidates = draw_subset(pool, subset_size, seed);
    if batch_size > candidates.len() {
        return Err(Error::invalid(format!(
            "batch of {batch_size} exceeds {} candidates",
            candidates.len()
        )));
    }
    let mut scored: Vec<(u64, Scored)> = candidates
        .par_iter()
        .map(|x| {
            let s = scorer(x)?;
            if s.penalized_margin.is_nan() {
                return Err(Error::invalid(format!("NaN score for item {}", x.id())));
            }
            Ok((x.id(), s))
        })
        .collect::<Result<_>>()?;
    let cmp = |a: &(u64, Scored), b: &(u64, Scored)| -> Ordering {
        a.1.penalized_margin
            .total_cmp(&b.1.penalized_margin)
            .then(a.0.cmp(&b.0))
    };
    if batch_size < scored.len() {
        scored.select_nth_unstable_by(batch_size - 1, cmp);
        scored.truncate(batch_size);
    }
    scored.sort_unstable_by(cmp);
    Ok(scored)
}

/// Ascending-rank selection with a plain score function.
pub fn select_batch<T, F>(
    pool: &[T],
    scorer: F,
    batch_size: usize,
    subset_size: Option<usize>,
    seed: u64,
) -> Result<Vec<u64>>
where
    T: Instance,
    F: Fn(&T) -> Result<f64> + Sync,
{
    let ranked = select_scored(
        pool,
        |x| {
            let s = scorer(x)?;
            Ok(Scored {
                raw_margin: s,
                penalized_margin: s,
            })
        },
        batch_size,
        subset_size,
        seed,
    )?;
    Ok(ranked.into_iter().map(|(id, _)| id).collect())
}

/// Uniform selection without replacement.
pub fn passive_select<T: Instance>(pool: &[T], batch_size: usize, seed: u64) -> Result<Vec<u64>> {
    if batch_size > pool.len() {
        return Err(Error::invalid(format!(
            "batch of {batch_size} exceeds pool of {}",
            pool.len()
        )));
    }
    let salt = seed::label_hash("passive");
    let mut keyed: Vec<(u64, u64)> = pool
        .iter()
        .map(|x| (seed::derive(seed, &[salt, x.id()]), x.id()))
        .collect();
    if batch_size > 0 && batch_size < keyed.len() {
        keyed.select_nth_unstable(batch_size - 1);
        keyed.truncate(batch_size);
    }
    keyed.sort_unstable();
    Ok(keyed.into_iter().take(batch_size).map(|k| k.1).collect())
}

/// One piece `f(t) = a + b t^alpha`, active from `t_start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerPiece {
    pub t_start: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
}

/// Piecewise power-law weight on the first ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PowerPiece>", into = "Vec<PowerPiece>")]
pub struct PowerSchedule {
    pieces: Vec<PowerPiece>,
}

impl PowerSchedule {
    pub fn new(pieces: Vec<PowerPiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::config("schedule", "needs at least one piece"));
        }
        if pieces
            .iter()
            .any(|p| ![p.t_start, p.a, p.b, p.alpha].iter().all(|v| v.is_finite()))
        {
            return Err(Error::config("schedule", "parameters must be finite"));
        }
        if pieces.windows(2).any(|w| w[0].t_start >= w[1].t_start) {
            return Err(Error::config(
                "schedule",
                "piece start sizes must be strictly increasing",
            ));
        }
        Ok(PowerSchedule { pieces })
    }

    pub fn pieces(&self) -> &[PowerPiece] {
        &self.pieces
    }
}

impl TryFrom<Vec<PowerPiece>> for PowerSchedule {
    type Error = Error;
    fn try_from(p: Vec<PowerPiece>) -> Result<Self> {
        PowerSchedule::new(p)
    }
}

impl From<PowerSchedule> for Vec<PowerPiece> {
    fn from(s: PowerSchedule) -> Self {
        s.pieces
    }
}

/// Evaluates the piece with the largest `t_start <= t` (the first piece when
/// `t` precedes every start) and clamps to [0, 1].
pub fn power_weight(t: f64, schedule: &PowerSchedule) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid("training size must be non-negative"));
    }
    let piece = schedule
        .pieces
        .iter()
        .rev()
        .find(|p| p.t_start <= t)
        .unwrap_or(&schedule.pieces[0]);
    let w = piece.a + piece.b * t.powf(piece.alpha);
    Ok(if w.is_nan() { 0.0 } else { w.clamp(0.0, 1.0) })
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n || n == 0 {
        return Err(Error::invalid(format!(
            "{} weights for {n} models",
            weights.len()
        )));
    }
    check_distribution(weights).map_err(|_| Error::invalid("ensemble weights must be non-negative and sum to 1"))
}

/// Weighted average of class-probability vectors.
pub fn ensemble_probs(probs: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    check_weights(weights, probs.len())?;
    let k = probs[0].len();
    if probs.iter().any(|p| p.len() != k) {
        return Err(Error::invalid("ensemble members disagree on class count"));
    }
    let mut avg = vec![0.0; k];
    for (p, w) in probs.iter().zip(weights) {
        for (a, v) in avg.iter_mut().zip(p) {
            *a += w * v;
        }
    }
    Ok(avg)
}

/// Margin of the probability-space weighted average of the models' outputs.
/// For sentences the average is taken per token before the sentence margin.
pub fn ensemble_score(
    models: &[&ProbabilisticClassifier],
    weights: &[f64],
    input: ModelInput<'_>,
) -> Result<MarginScore> {
    check_weights(weights, models.len())?;
    let mut class_probs = Vec::new();
    let mut token_probs: Vec<Vec<[f64; 2]>> = Vec::new();
    for m in models {
        match m.predict_proba(input)? {
            Prediction::Classes(p) => class_probs.push(p),
            Prediction::Tokens(t) => token_probs.push(t),
        }
    }
    if !class_probs.is_empty() {
        return margin_score(&ensemble_probs(&class_probs, weights)?);
    }
    let len = token_probs[0].len();
    let mut avg = vec![[0.0; 2]; len];
    for (t, w) in token_probs.iter().zip(weights) {
        for (a, p) in avg.iter_mut().zip(t) {
            a[0] += w * p[0];
            a[1] += w * p[1];
        }
    }
    sentence_margin(&avg)
}

/// Candidate grid for [`fit_power_schedule`]: one start size per piece and a
/// list of `(a, b, alpha)` candidates per piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerGrid {
    pub t_starts: Vec<f64>,
    pub candidates: Vec<Vec<[f64; 3]>>,
}

impl PowerGrid {
    pub fn validate(&self) -> Result<()> {
        if self.t_starts.is_empty() || self.t_starts.len() != self.candidates.len() {
            return Err(Error::config(
                "grid",
                "need one candidate list per piece start",
            ));
        }
        if self.candidates.iter().any(|c| c.is_empty()) {
            return Err(Error::config("grid", "candidate lists must be nonempty"));
        }
        Ok(())
    }

    /// Every schedule in the grid, in lexicographic order of the flattened
    /// parameter tuple.
    pub fn schedules(&self) -> Result<Vec<PowerSchedule>> {
        self.validate()?;
        let lex = |a: &[f64; 3], b: &[f64; 3]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        };
        let sorted: Vec<Vec<[f64; 3]>> = self
            .candidates
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.sort_by(lex);
                c.dedup();
                c
            })
            .collect();
        let mut out = vec![Vec::<PowerPiece>::new()];
        for (t_start, cands) in self.t_starts.iter().zip(&sorted) {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    cands.iter().map(move |c| {
                        let mut p = prefix.clone();
                        p.push(PowerPiece {
                            t_start: *t_start,
                            a: c[0],
                            b: c[1],
                            alpha: c[2],
                        });
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(PowerSchedule::new).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedSchedule {
    pub schedule: PowerSchedule,
    pub score: f64,
    /// Score of every grid candidate in enumeration order.
    pub all_scores: Vec<f64>,
}

/// Exhaustive grid search; ties go to the lexicographically smallest
/// parameter tuple.
pub fn fit_power_schedule<F>(grid: &PowerGrid, evaluate: F) -> Result<FittedSchedule>
where
    F: Fn(&PowerSchedule) -> Result<f64> + Sync,
{
    let schedules = grid.schedules()?;
    let scores: Vec<f64> = schedules
        .par_iter()
        .map(|s| {
            let v = evaluate(s)?;
            if v.is_nan() {
                Err(Error::invalid("schedule objective is NaN"))
            } else {
                Ok(v)
            }
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok(FittedSchedule {
        schedule: schedules[best].clone(),
        score: scores[best],
        all_scores: scores,
    })
}

/// A sampling strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    Passive,
    /// Margin sampling with a fixed scorer class.
    MarginPure { scorer: ModelKind },
    /// Margin sampling scored by whatever the current evaluation model is.
    MarginNaiveAdaptive,
    /// Margin of a two-model ensemble; the schedule gives the weight on
    /// `members[0]`. Either a schedule or a grid to fit one from.
    MarginPower {
        #[serde(default)]
        schedule: Option<PowerSchedule>,
        #[serde(default)]
        grid: Option<PowerGrid>,
        #[serde(default = "default_members")]
        members: [ModelKind; 2],
    },
}

fn default_members() -> [ModelKind; 2] {
    [ModelKind::Logistic, ModelKind::KernelLogistic]
}

impl Strategy {
    pub fn default_name(&self) -> String {
        match self {
            Strategy::Passive => "passive".into(),
            Strategy::MarginPure { scorer } => format!("margin-{scorer}"),
            Strategy::MarginNaiveAdaptive => "margin-naive_adaptive".into(),
            Strategy::MarginPower { .. } => "margin-power".into(),
        }
    }

    pub fn is_passive(&self) -> bool {
        matches!(self, Strategy::Passive)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub strategy: Strategy,
    /// Sentence length penalty exponent; falls back to the experiment default.
    #[serde(default)]
    pub length_penalty: Option<f64>,
}

impl SchemeConfig {
    pub fn new(strategy: Strategy) -> Self {
        SchemeConfig {
            name: None,
            strategy,
            length_penalty: None,
        }
    }

    pub fn name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.strategy.default_name())
    }
}

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed;

/// Outcome of a best-of-k training round.
#[derive(Debug, Clone)]
pub struct BestOfK<M> {
    pub model: M,
    pub run_index: usize,
    /// Validation metric of every run, by run index.
    pub scores: Vec<f64>,
}

/// Trains `k` times with seeds derived from `(base_seed, run_index)` and keeps
/// the run with the highest validation metric; ties go to the lowest index.
/// Runs may execute concurrently; the choice does not depend on completion order.
pub fn best_of_k_train<M, T, V>(k: usize, base_seed: u64, train: T, validate: V) -> Result<BestOfK<M>>
where
    M: Send,
    T: Fn(u64) -> Result<M> + Sync,
    V: Fn(&M) -> Result<f64> + Sync,
{
    if k == 0 {
        return Err(Error::config("best_of_k", "must be at least 1"));
    }
    let runs: Vec<(M, f64)> = (0..k)
        .into_par_iter()
        .map(|i| {
            let model = train(seed::derive(base_seed, &[i as u64]))?;
            let score = validate(&model)?;
            if score.is_nan() {
                return Err(Error::invalid("validation metric is NaN"));
            }
            Ok((model, score))
        })
        .collect::<Result<_>>()?;

    let scores: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    let model = runs.into_iter().nth(best).map(|r| r.0).expect("k >= 1");
    Ok(BestOfK {
        model,
        run_index: best,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_run_uses_first_derived_seed() {
        let out = best_of_k_train(1, 42, |s| Ok(s), |_| Ok(0.0)).unwrap();
        assert_eq!(out.model, seed::derive(42, &[0]));
        assert_eq!(out.run_index, 0);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let out = best_of_k_train(5, 1, |_| Ok(7u8), |_| Ok(0.5)).unwrap();
        assert_eq!(out.run_index, 0);
        assert_eq!(out.scores, vec![0.5; 5]);
    }

    #[test]
    fn picks_maximum() {
        let out = best_of_k_train(4, 0, |s| Ok(s), |m| Ok((*m % 1000) as f64)).unwrap();
        let expected = out
            .scores
            .iter()
            .enumerate()
            .fold(0, |b, (i, s)| if *s > out.scores[b] { i } else { b });
        assert_eq!(out.run_index, expected);
    }

    #[test]
    fn zero_runs_rejected() {
        assert!(best_of_k_train(0, 0, |s| Ok(s), |_| Ok(0.0)).is_err());
    }
}

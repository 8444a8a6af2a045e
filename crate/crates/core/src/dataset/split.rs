use rand::seq::index;

use crate::error::{Error, Result};
use crate::seed;

/// Splits `items` into `(pool, holdout)`, drawing the holdout uniformly without
/// replacement. Both halves keep the input order.
pub fn split_pool_holdout<T: Clone>(
    items: &[T],
    holdout_size: usize,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if holdout_size == 0 || holdout_size >= items.len() {
        return Err(Error::config(
            "holdout_size",
            format!(
                "must be in 1..{} for a dataset of {} items",
                items.len(),
                items.len()
            ),
        ));
    }
    let mut rng = seed::rng(seed, &[seed::label_hash("holdout")]);
    let mut in_holdout = vec![false; items.len()];
    for i in index::sample(&mut rng, items.len(), holdout_size) {
        in_holdout[i] = true;
    }
    let mut pool = Vec::with_capacity(items.len() - holdout_size);
    let mut holdout = Vec::with_capacity(holdout_size);
    for (item, held) in items.iter().zip(in_holdout) {
        if held {
            holdout.push(item.clone());
        } else {
            pool.push(item.clone());
        }
    }
    Ok((pool, holdout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn covtype_sized_split() {
        let items: Vec<u32> = (0..581_012).collect();
        let (pool, holdout) = split_pool_holdout(&items, 10_000, 3).unwrap();
        assert_eq!(pool.len(), 571_012);
        assert_eq!(holdout.len(), 10_000);
    }

    #[test]
    fn empty_pool_forbidden() {
        let items: Vec<u32> = (0..10).collect();
        assert!(split_pool_holdout(&items, 10, 0).is_err());
        assert!(split_pool_holdout(&items, 0, 0).is_err());
    }

    #[test]
    fn deterministic() {
        let items: Vec<u32> = (0..500).collect();
        assert_eq!(
            split_pool_holdout(&items, 50, 11).unwrap(),
            split_pool_holdout(&items, 50, 11).unwrap()
        );
        assert_ne!(
            split_pool_holdout(&items, 50, 11).unwrap().1,
            split_pool_holdout(&items, 50, 12).unwrap().1
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn partition_is_exact(seed in any::<u64>(), n in 2usize..400, frac in 0.01f64..0.99) {
            let items: Vec<usize> = (0..n).collect();
            let h = ((n as f64 * frac) as usize).clamp(1, n - 1);
            let (pool, holdout) = split_pool_holdout(&items, h, seed).unwrap();
            prop_assert_eq!(pool.len() + holdout.len(), n);
            let mut all: Vec<usize> = pool.iter().chain(&holdout).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, items);
        }
    }
}

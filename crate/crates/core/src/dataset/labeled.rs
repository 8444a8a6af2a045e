//! Labeled-set history plus the label-revision and expiration events.

use serde::{Deserialize, Serialize};

use super::Instance;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEntry<T> {
    pub item: T,
    /// Round in which the label was acquired (0 for the seed set).
    pub round: usize,
    /// Number of revisions that touched this entry.
    pub generation: u32,
}

/// Labeled data in acquisition order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet<T> {
    entries: Vec<LabeledEntry<T>>,
    generation: u32,
}

impl<T> Default for LabeledSet<T> {
    fn default() -> Self {
        LabeledSet {
            entries: Vec::new(),
            generation: 0,
        }
    }
}

impl<T: Instance> LabeledSet<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set with every item acquired in `round`.
    pub fn from_items(items: impl IntoIterator<Item = T>, round: usize) -> Self {
        LabeledSet {
            entries: items
                .into_iter()
                .map(|item| LabeledEntry {
                    item,
                    round,
                    generation: 0,
                })
                .collect(),
            generation: 0,
        }
    }

    pub fn push(&mut self, item: T, round: usize) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if round < last.round {
                return Err(Error::invalid(format!(
                    "acquisition round {round} precedes round {}",
                    last.round
                )));
            }
        }
        self.entries.push(LabeledEntry {
            item,
            round,
            generation: 0,
        });
        Ok(())
    }

    pub fn entries(&self) -> &[LabeledEntry<T>] {
        &self.entries
    }

    pub fn items(&self) -> impl Iterator<Item = &T> {
        self.entries.iter().map(|e| &e.item)
    }

    pub fn to_items(&self) -> Vec<T> {
        self.items().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Revision counter; every entry's generation is at most this.
    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&LabeledEntry<T>) -> bool) {
        self.entries.retain(|e| keep(e));
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut LabeledEntry<T>> {
        self.entries.iter_mut()
    }
}

/// A rewrite of already-acquired labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RevisionRule {
    /// Flip labels on a fixed fraction of entries. Entries are chosen by ranking
    /// a keyed hash of their ids, and within a sentence one anchor token always
    /// flips plus every other token with probability `token_flip_rate`.
    Flip {
        target_fraction: f64,
        #[serde(default = "default_token_flip_rate")]
        token_flip_rate: f64,
    },
    /// Re-derive labels under a new segmentation rule version.
    Guideline { rule_version: u32 },
}

fn default_token_flip_rate() -> f64 {
    0.1
}

impl RevisionRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RevisionRule::Flip {
                target_fraction,
                token_flip_rate,
            } => {
                if !(0.0..=1.0).contains(&target_fraction) {
                    return Err(Error::config("target_fraction", "must lie in [0, 1]"));
                }
                if !(0.0..=1.0).contains(&token_flip_rate) {
                    return Err(Error::config("token_flip_rate", "must lie in [0, 1]"));
                }
            }
            RevisionRule::Guideline { rule_version } => {
                if !(1..=2).contains(&rule_version) {
                    return Err(Error::config("rule_version", "must be 1 or 2"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevisionStats {
    /// Fraction of entries with at least one changed label.
    pub sentences_touched_fraction: f64,
    pub labels_flipped_count: usize,
}

/// Applies a revision and bumps the generation of every touched entry.
pub fn apply_label_revision<T: Instance>(
    set: &LabeledSet<T>,
    rule: &RevisionRule,
    seed: u64,
    n_classes: usize,
) -> Result<(LabeledSet<T>, RevisionStats)> {
    if set.is_empty() {
        return Err(Error::invalid("label revision on an empty labeled set"));
    }
    rule.validate()?;
    let mut revised = set.clone();
    revised.generation += 1;
    let generation = revised.generation;
    let mut touched = 0usize;
    let mut flipped = 0usize;

    match *rule {
        RevisionRule::Flip {
            target_fraction,
            token_flip_rate,
        } => {
            let n = set.len();
            let target = (target_fraction * n as f64).round() as usize;
            let mut order: Vec<(u64, usize)> = set
                .entries
                .iter()
                .enumerate()
                .map(|(pos, e)| (seed::derive(seed, &[e.item.id()]), pos))
                .collect();
            order.sort_unstable();
            for &(_, pos) in order.iter().take(target) {
                let entry = &mut revised.entries[pos];
                let key = seed::derive(seed, &[entry.item.id(), 1]);
                let n_flipped = entry.item.flip_labels(key, token_flip_rate, n_classes);
                if n_flipped > 0 {
                    touched += 1;
                    flipped += n_flipped;
                    entry.generation = generation;
                }
            }
        }
        RevisionRule::Guideline { rule_version } => {
            for entry in revised.entries.iter_mut() {
                let changed = entry.item.relabel(rule_version)?;
                if changed > 0 {
                    touched += 1;
                    flipped += changed;
                    entry.generation = generation;
                }
            }
        }
    }

    let stats = RevisionStats {
        sentences_touched_fraction: touched as f64 / set.len() as f64,
        labels_flipped_count: flipped,
    };
    Ok((revised, stats))
}

/// How long acquired labels stay in the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExpirationPolicy {
    #[default]
    Never,
    /// Drop entries older than `max_age` rounds; age equal to the limit is kept.
    Hard { max_age: i64 },
    /// Keep each entry with probability `retention[age]` (the last value
    /// extends to older ages).
    Gradual { retention: Vec<f64> },
}

impl ExpirationPolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            ExpirationPolicy::Never => Ok(()),
            ExpirationPolicy::Hard { max_age } => {
                if *max_age < 0 {
                    Err(Error::config("max_age", "must be non-negative"))
                } else {
                    Ok(())
                }
            }
            ExpirationPolicy::Gradual { retention } => {
                if retention.is_empty() {
                    return Err(Error::config("retention", "schedule must be nonempty"));
                }
                if retention.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::config("retention", "probabilities must lie in [0, 1]"));
                }
                Ok(())
            }
        }
    }

    /// Whether an entry of `age` rounds survives, keyed by `(seed, id)`.
    pub fn keeps(&self, age: usize, id: u64, seed: u64) -> bool {
        match self {
            ExpirationPolicy::Never => true,
            ExpirationPolicy::Hard { max_age } => (age as i64) <= *max_age,
            ExpirationPolicy::Gradual { retention } => {
                let p = retention[age.min(retention.len() - 1)];
                seed::unit(seed, &[id]) < p
            }
        }
    }
}

/// Drops expired entries. Age is `current_round - acquisition round`.
pub fn apply_expiration_limit<T: Instance>(
    set: &LabeledSet<T>,
    current_round: usize,
    policy: &ExpirationPolicy,
    seed: u64,
) -> Result<LabeledSet<T>> {
    policy.validate()?;
    if let Some(e) = set.entries.iter().find(|e| e.round > current_round) {
        return Err(Error::invalid(format!(
            "entry {} acquired in round {} after current round {current_round}",
            e.item.id(),
            e.round
        )));
    }
    let mut kept = set.clone();
    kept.retain(|e| policy.keeps(current_round - e.round, e.item.id(), seed));
    Ok(kept)
}

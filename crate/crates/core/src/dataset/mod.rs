//! Data model and data-side experiment events.
//!
//! Two kinds of instances flow through the harness: sparse classification
//! [`Example`]s (read from SVMlight files) and [`TokenSentence`]s from the
//! synthetic segmentation corpus. Both implement [`Instance`], which is all
//! the sampling and experiment code needs to know about them.

mod corpus;
mod labeled;
mod split;
mod svmlight;
pub mod synthetic;

pub use corpus::{
    generate_segmentation_corpus, is_strong_delimiter, segment, word_category, CorpusConfig,
    LengthRange,
};
pub use labeled::{
    apply_expiration_limit, apply_label_revision, ExpirationPolicy, LabeledEntry, LabeledSet,
    RevisionRule, RevisionStats,
};
pub use split::split_pool_holdout;
pub use svmlight::{parse_svmlight, read_svmlight_file, write_svmlight};

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Source domain of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    A,
    B,
}

/// Sparse feature vector stored as `(index, value)` pairs with strictly
/// increasing indices, all `>= 1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u32, f64)>", into = "Vec<(u32, f64)>")]
pub struct SparseVector(Vec<(u32, f64)>);

impl SparseVector {
    pub fn new(pairs: Vec<(u32, f64)>) -> Result<Self> {
        if let Some(&(idx, _)) = pairs.first() {
            if idx == 0 {
                return Err(Error::invalid("feature indices start at 1"));
            }
        }
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid(format!(
                "feature indices not strictly increasing ({} then {})",
                w[0].0, w[1].0
            )));
        }
        if pairs.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        Ok(SparseVector(pairs))
    }

    /// Builds a sparse vector from a dense slice (index `i` maps to feature `i + 1`),
    /// dropping exact zeros.
    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector(
            values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i as u32 + 1, *v))
                .collect(),
        )
    }

    pub fn pairs(&self) -> &[(u32, f64)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_index(&self) -> u32 {
        self.0.last().map_or(0, |p| p.0)
    }

    /// Dot product against a dense vector indexed by feature number; entries
    /// beyond the dense length contribute nothing.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.0
            .iter()
            .filter_map(|&(i, v)| dense.get(i as usize).map(|w| w * v))
            .sum()
    }

    pub fn squared_distance(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (self.0.iter().peekable(), other.0.iter().peekable());
        let mut acc = 0.0;
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&(i, x)), Some(&&(j, y))) => {
                    if i == j {
                        acc += (x - y) * (x - y);
                        a.next();
                        b.next();
                    } else if i < j {
                        acc += x * x;
                        a.next();
                    } else {
                        acc += y * y;
                        b.next();
                    }
                }
                (Some(&&(_, x)), None) => {
                    acc += x * x;
                    a.next();
                }
                (None, Some(&&(_, y))) => {
                    acc += y * y;
                    b.next();
                }
                (None, None) => return acc,
            }
        }
    }
}

impl TryFrom<Vec<(u32, f64)>> for SparseVector {
    type Error = Error;
    fn try_from(pairs: Vec<(u32, f64)>) -> Result<Self> {
        SparseVector::new(pairs)
    }
}

impl From<SparseVector> for Vec<(u32, f64)> {
    fn from(v: SparseVector) -> Self {
        v.0
    }
}

/// One classification instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: u64,
    pub features: SparseVector,
    pub label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
}

/// A labeled classification dataset with labels remapped to `0..n_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub examples: Vec<Example>,
    /// Native label value for each class index, ascending.
    pub native_labels: Vec<f64>,
    /// Largest feature index present.
    pub n_features: u32,
}

impl Dataset {
    pub fn n_classes(&self) -> usize {
        self.native_labels.len()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Divides every feature by its largest absolute value over the dataset,
    /// mapping values into [-1, 1] while keeping zeros (and sparsity) intact.
    pub fn scale_max_abs(&mut self) {
        let mut max_abs = vec![0.0f64; self.n_features as usize + 1];
        for ex in &self.examples {
            for &(i, v) in ex.features.pairs() {
                max_abs[i as usize] = max_abs[i as usize].max(v.abs());
            }
        }
        for ex in &mut self.examples {
            for p in ex.features.0.iter_mut() {
                let m = max_abs[p.0 as usize];
                if m > 0.0 {
                    p.1 /= m;
                }
            }
        }
    }
}

/// Category attached to every synthetic token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TokenCategory {
    Plain,
    Delimiter,
    Compound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub word: u32,
    pub category: TokenCategory,
}

/// A token sequence with one break/no-break mark per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSentence {
    pub id: u64,
    pub tokens: Vec<Token>,
    pub labels: Vec<bool>,
    pub domain: Domain,
}

impl TokenSentence {
    pub fn new(id: u64, tokens: Vec<Token>, labels: Vec<bool>, domain: Domain) -> Result<Self> {
        if tokens.is_empty() || tokens.len() != labels.len() {
            return Err(Error::invalid(format!(
                "sentence {id}: {} tokens with {} labels",
                tokens.len(),
                labels.len()
            )));
        }
        Ok(TokenSentence {
            id,
            tokens,
            labels,
            domain,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Behaviour shared by everything that can sit in a pool or a labeled set.
pub trait Instance: Clone + Send + Sync + 'static {
    fn id(&self) -> u64;

    /// Stratum used when halving data; the class label for examples.
    fn stratum(&self) -> usize;

    /// Token count `L(x)`; 1 for non-sequence instances.
    fn length(&self) -> usize;

    fn domain(&self) -> Option<Domain>;

    /// Flips labels chosen by a key-dependent rule and returns how many flipped.
    /// The choice depends only on `(key, id, length)`, so a second call with the
    /// same key undoes the first.
    fn flip_labels(&mut self, key: u64, token_flip_rate: f64, n_classes: usize) -> usize;

    /// Re-derives labels under a segmentation rule version, returning the
    /// number of labels that changed.
    fn relabel(&mut self, rule_version: u32) -> Result<usize>;
}

impl Instance for Example {
    fn id(&self) -> u64 {
        self.id
    }

    fn stratum(&self) -> usize {
        self.label
    }

    fn length(&self) -> usize {
        1
    }

    fn domain(&self) -> Option<Domain> {
        self.domain
    }

    fn flip_labels(&mut self, _key: u64, _token_flip_rate: f64, n_classes: usize) -> usize {
        // reflection is an involution for any class count
        let flipped = n_classes.saturating_sub(1).saturating_sub(self.label);
        if flipped == self.label {
            return 0;
        }
        self.label = flipped;
        1
    }

    fn relabel(&mut self, _rule_version: u32) -> Result<usize> {
        Err(Error::invalid(
            "guideline relabeling applies to token sentences only",
        ))
    }
}

impl Instance for TokenSentence {
    fn id(&self) -> u64 {
        self.id
    }

    fn stratum(&self) -> usize {
        0
    }

    fn length(&self) -> usize {
        self.tokens.len()
    }

    fn domain(&self) -> Option<Domain> {
        Some(self.domain)
    }

    fn flip_labels(&mut self, key: u64, token_flip_rate: f64, _n_classes: usize) -> usize {
        let len = self.labels.len();
        let anchor = (seed::derive(key, &[0]) % len as u64) as usize;
        let mut flipped = 0;
        for (j, label) in self.labels.iter_mut().enumerate() {
            if j == anchor || seed::unit(key, &[1, j as u64]) < token_flip_rate {
                *label = !*label;
                flipped += 1;
            }
        }
        flipped
    }

    fn relabel(&mut self, rule_version: u32) -> Result<usize> {
        let fresh = segment(&self.tokens, rule_version)?;
        let changed = fresh
            .iter()
            .zip(&self.labels)
            .filter(|(a, b)| a != b)
            .count();
        self.labels = fresh;
        Ok(changed)
    }
}

/// Writes one JSON object per line.
pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut out: W) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads line-delimited JSON records, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(input: R) -> Result<Vec<T>> {
    let mut items = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(items)
}

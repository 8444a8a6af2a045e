//! Averaged-perceptron break tagger over a +-2 token window.
//!
//! Break probabilities come from a logistic link on the averaged score:
//! `P(break) = sigmoid(scale * score)`.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::linear::sigmoid;
use super::{TrainConfig, TrainDiagnostics};
use crate::dataset::{Token, TokenCategory, TokenSentence};
use crate::error::{Error, Result};
use crate::seed;

const WINDOW: i64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenTagger {
    /// Averaged weights sorted by feature key.
    weights: Vec<(u64, f64)>,
    calibration_scale: f64,
    #[serde(skip)]
    lookup: HashMap<u64, f64>,
}

fn category_code(c: TokenCategory) -> u64 {
    match c {
        TokenCategory::Plain => 1,
        TokenCategory::Delimiter => 2,
        TokenCategory::Compound => 3,
    }
}

fn word_at(tokens: &[Token], i: i64) -> u64 {
    if i < 0 {
        u64::MAX - 1
    } else {
        tokens
            .get(i as usize)
            .map_or(u64::MAX, |t| u64::from(t.word))
    }
}

fn category_at(tokens: &[Token], i: i64) -> u64 {
    if i < 0 {
        10
    } else {
        tokens.get(i as usize).map_or(11, |t| category_code(t.category))
    }
}

/// Hashed window features for token `i`.
fn features(tokens: &[Token], i: usize) -> Vec<u64> {
    let i = i as i64;
    let mut out = Vec::with_capacity(2 * (2 * WINDOW as usize + 1) + 3);
    out.push(seed::derive(0, &[0]));
    for off in -WINDOW..=WINDOW {
        let o = (off + WINDOW) as u64;
        out.push(seed::derive(1, &[o, word_at(tokens, i + off)]));
        out.push(seed::derive(2, &[o, category_at(tokens, i + off)]));
    }
    out.push(seed::derive(
        3,
        &[word_at(tokens, i), word_at(tokens, i + 1)],
    ));
    out.push(seed::derive(
        4,
        &[category_at(tokens, i), category_at(tokens, i + 1)],
    ));
    out
}

impl TokenTagger {
    pub fn train(corpus: &[TokenSentence], config: &TrainConfig) -> Result<(Self, TrainDiagnostics)> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::invalid("empty training corpus"));
        }
        // current weight, accumulated timestamped updates
        let mut weights: HashMap<u64, (f64, f64)> = HashMap::new();
        let mut clock = 1.0f64;
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        let mut rng = seed::rng(config.seed, &[seed::label_hash("perceptron")]);
        let mut mistakes = 0usize;
        let mut seen = 0usize;

        let featurised: Vec<Vec<Vec<u64>>> = corpus
            .iter()
            .map(|s| (0..s.len()).map(|i| features(&s.tokens, i)).collect())
            .collect();

        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            mistakes = 0;
            seen = 0;
            for &s in &order {
                for (feats, &gold) in featurised[s].iter().zip(&corpus[s].labels) {
                    let score: f64 = feats
                        .iter()
                        .map(|f| weights.get(f).map_or(0.0, |w| w.0))
                        .sum();
                    let predicted = score > 0.0;
                    if predicted != gold {
                        let delta = if gold { 1.0 } else { -1.0 };
                        for f in feats {
                            let w = weights.entry(*f).or_insert((0.0, 0.0));
                            w.0 += delta;
                            w.1 += clock * delta;
                        }
                        mistakes += 1;
                    }
                    seen += 1;
                    clock += 1.0;
                }
            }
        }

        let mut averaged: Vec<(u64, f64)> = weights
            .into_iter()
            .map(|(k, (w, acc))| (k, w - acc / clock))
            .filter(|(_, w)| *w != 0.0)
            .collect();
        averaged.sort_unstable_by_key(|p| p.0);
        let tagger = TokenTagger::from_weights(averaged, config.tagger_calibration)?;
        Ok((
            tagger,
            TrainDiagnostics {
                final_loss: mistakes as f64 / seen.max(1) as f64,
                epochs: config.epochs,
            },
        ))
    }

    pub fn from_weights(weights: Vec<(u64, f64)>, calibration_scale: f64) -> Result<Self> {
        if !(calibration_scale > 0.0) {
            return Err(Error::config("tagger_calibration", "must be positive"));
        }
        let lookup = weights.iter().copied().collect();
        Ok(TokenTagger {
            weights,
            calibration_scale,
            lookup,
        })
    }

    /// Rebuilds the lookup table after deserialisation.
    pub(crate) fn reindex(&mut self) {
        self.lookup = self.weights.iter().copied().collect();
    }

    pub fn score(&self, tokens: &[Token], i: usize) -> f64 {
        features(tokens, i)
            .iter()
            .map(|f| self.lookup.get(f).copied().unwrap_or(0.0))
            .sum()
    }

    /// Per-token `(P(no break), P(break))`.
    pub fn predict(&self, sentence: &TokenSentence) -> Vec<[f64; 2]> {
        (0..sentence.len())
            .map(|i| {
                let p = sigmoid(self.calibration_scale * self.score(&sentence.tokens, i));
                [1.0 - p, p]
            })
            .collect()
    }
}

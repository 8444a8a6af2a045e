//! Synthetic two-domain segmentation corpus.
//!
//! Words are drawn from a Zipf distribution over the vocabulary, with domain B
//! using a rotated rank order so its frequent words are rare in domain A. Each
//! word has a fixed category; a hidden subset of delimiter words are "strong".
//!
//! Segmentation rules:
//! - version 1: break after every strong delimiter.
//! - version 2: version 1, plus a break after each compound token that is
//!   followed by another compound token.

use rand::Rng;
use rand_distr::{Distribution, Zipf};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Domain, Token, TokenCategory, TokenSentence};
use crate::error::{Error, Result};
use crate::seed;

const CATEGORY_SALT: u64 = 0x5e6_c0e1;
const STRENGTH_SALT: u64 = 0x5_7a0c;
const DELIMITER_RATE: f64 = 0.12;
const COMPOUND_RATE: f64 = 0.185;
const STRONG_RATE: f64 = 0.6;

/// Inclusive uniform range of sentence lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub n_sentences: usize,
    /// Probability that a sentence comes from domain A.
    #[serde(default = "default_mix")]
    pub domain_mix: f64,
    #[serde(default = "default_length_a")]
    pub length_a: LengthRange,
    #[serde(default = "default_length_b")]
    pub length_b: LengthRange,
    #[serde(default = "default_vocab")]
    pub vocab_size: u32,
    #[serde(default = "default_rule_version")]
    pub rule_version: u32,
    #[serde(default = "default_zipf")]
    pub zipf_exponent: f64,
}

fn default_mix() -> f64 {
    0.5
}
fn default_length_a() -> LengthRange {
    LengthRange { min: 3, max: 13 }
}
fn default_length_b() -> LengthRange {
    LengthRange { min: 8, max: 20 }
}
fn default_vocab() -> u32 {
    2000
}
fn default_rule_version() -> u32 {
    1
}
fn default_zipf() -> f64 {
    1.05
}

impl CorpusConfig {
    pub fn new(n_sentences: usize) -> Self {
        CorpusConfig {
            n_sentences,
            domain_mix: default_mix(),
            length_a: default_length_a(),
            length_b: default_length_b(),
            vocab_size: default_vocab(),
            rule_version: default_rule_version(),
            zipf_exponent: default_zipf(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sentences == 0 {
            return Err(Error::config("n_sentences", "must be positive"));
        }
        if !(self.domain_mix > 0.0 && self.domain_mix < 1.0) {
            return Err(Error::config("domain_mix", "must lie in (0, 1)"));
        }
        for (key, r) in [("length_a", self.length_a), ("length_b", self.length_b)] {
            if r.min < 1 || r.min > r.max {
                return Err(Error::config(key, "need 1 <= min <= max"));
            }
        }
        if self.vocab_size == 0 {
            return Err(Error::config("vocab_size", "must be positive"));
        }
        if !(1..=2).contains(&self.rule_version) {
            return Err(Error::config("rule_version", "must be 1 or 2"));
        }
        if !(self.zipf_exponent > 0.0) {
            return Err(Error::config("zipf_exponent", "must be positive"));
        }
        Ok(())
    }
}

/// Fixed category of a vocabulary word.
pub fn word_category(word: u32) -> TokenCategory {
    let u = seed::unit(CATEGORY_SALT, &[u64::from(word)]);
    if u < DELIMITER_RATE {
        TokenCategory::Delimiter
    } else if u < DELIMITER_RATE + COMPOUND_RATE {
        TokenCategory::Compound
    } else {
        TokenCategory::Plain
    }
}

/// Whether a delimiter word forces a break. Not visible in token features.
pub fn is_strong_delimiter(word: u32) -> bool {
    word_category(word) == TokenCategory::Delimiter
        && seed::unit(STRENGTH_SALT, &[u64::from(word)]) < STRONG_RATE
}

/// Break labels for a token sequence under a rule version (1 or 2).
pub fn segment(tokens: &[Token], rule_version: u32) -> Result<Vec<bool>> {
    if !(1..=2).contains(&rule_version) {
        return Err(Error::invalid(format!(
            "unknown segmentation rule version {rule_version}"
        )));
    }
    Ok((0..tokens.len())
        .map(|i| {
            let strong =
                tokens[i].category == TokenCategory::Delimiter && is_strong_delimiter(tokens[i].word);
            let compound_inner = rule_version >= 2
                && tokens[i].category == TokenCategory::Compound
                && tokens
                    .get(i + 1)
                    .is_some_and(|t| t.category == TokenCategory::Compound);
            strong || compound_inner
        })
        .collect())
}

/// Generates a reproducible corpus. Each sentence draws from its own derived
/// stream, so the result does not depend on the thread count.
pub fn generate_segmentation_corpus(config: &CorpusConfig, seed: u64) -> Result<Vec<TokenSentence>> {
    config.validate()?;
    let zipf = Zipf::new(u64::from(config.vocab_size), config.zipf_exponent)
        .map_err(|e| Error::invalid(format!("zipf: {e}")))?;
    let vocab = config.vocab_size;
    (0..config.n_sentences)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng(seed, &[seed::label_hash("sentence"), i as u64]);
            let domain = if rng.gen::<f64>() < config.domain_mix {
                Domain::A
            } else {
                Domain::B
            };
            let range = match domain {
                Domain::A => config.length_a,
                Domain::B => config.length_b,
            };
            let len = rng.gen_range(range.min..=range.max);
            let tokens: Vec<Token> = (0..len)
                .map(|_| {
                    let rank = (zipf.sample(&mut rng) as u32).saturating_sub(1);
                    let word = match domain {
                        Domain::A => rank,
                        Domain::B => (rank + vocab / 2) % vocab,
                    };
                    Token {
                        word,
                        category: word_category(word),
                    }
                })
                .collect();
            let labels = segment(&tokens, config.rule_version)?;
            TokenSentence::new(i as u64, tokens, labels, domain)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_semantics() {
        let corpus = generate_segmentation_corpus(&CorpusConfig::new(1000), 5).unwrap();
        assert_eq!(corpus.len(), 1000);
        let a = corpus.iter().filter(|s| s.domain == Domain::A).count();
        // binomial(1000, 0.5): sd ~ 15.8, allow ~4 sd
        assert!((437..=563).contains(&a), "domain A count {a}");
    }

    #[test]
    fn deterministic_for_seed() {
        let cfg = CorpusConfig::new(300);
        assert_eq!(
            generate_segmentation_corpus(&cfg, 9).unwrap(),
            generate_segmentation_corpus(&cfg, 9).unwrap()
        );
    }

    #[test]
    fn identical_across_thread_counts() {
        let cfg = CorpusConfig::new(400);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| generate_segmentation_corpus(&cfg, 21).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| generate_segmentation_corpus(&cfg, 21).unwrap());
        assert_eq!(one, four);
    }

    #[test]
    fn domains_differ_in_length() {
        let corpus = generate_segmentation_corpus(&CorpusConfig::new(2000), 1).unwrap();
        let mean = |d: Domain| {
            let lens: Vec<usize> = corpus
                .iter()
                .filter(|s| s.domain == d)
                .map(|s| s.len())
                .collect();
            lens.iter().sum::<usize>() as f64 / lens.len() as f64
        };
        assert!(mean(Domain::B) > mean(Domain::A) + 3.0);
    }

    #[test]
    fn degenerate_configs_rejected() {
        let mut cfg = CorpusConfig::new(0);
        assert!(generate_segmentation_corpus(&cfg, 0).is_err());
        cfg.n_sentences = 10;
        cfg.vocab_size = 0;
        assert!(generate_segmentation_corpus(&cfg, 0).is_err());
        cfg.vocab_size = 10;
        cfg.domain_mix = 1.0;
        assert!(generate_segmentation_corpus(&cfg, 0).is_err());
        cfg.domain_mix = 0.5;
        cfg.length_a = LengthRange { min: 0, max: 3 };
        assert!(generate_segmentation_corpus(&cfg, 0).is_err());
    }

    #[test]
    fn version_two_adds_compound_breaks() {
        let c = |word| Token {
            word,
            category: TokenCategory::Compound,
        };
        let p = Token {
            word: 0,
            category: TokenCategory::Plain,
        };
        let tokens = vec![c(1), c(2), c(3), p];
        assert_eq!(segment(&tokens, 1).unwrap(), vec![false; 4]);
        assert_eq!(
            segment(&tokens, 2).unwrap(),
            vec![true, true, false, false]
        );
        assert!(segment(&tokens, 3).is_err());
    }

    #[test]
    fn rule_change_touches_about_two_fifths_of_sentences() {
        // measured once on this generator and frozen
        let corpus = generate_segmentation_corpus(&CorpusConfig::new(10_000), 1).unwrap();
        let touched = corpus
            .iter()
            .filter(|s| segment(&s.tokens, 2).unwrap() != s.labels)
            .count() as f64
            / 1e4;
        assert!((0.379..=0.399).contains(&touched), "{touched}");
    }
}

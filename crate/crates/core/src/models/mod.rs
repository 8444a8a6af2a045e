//! Probabilistic learners used as scorers and evaluation models.

mod best_of_k;
mod linear;
mod rff;
mod tagger;

pub use best_of_k::{best_of_k_train, BestOfK};
pub use linear::{sigmoid, softmax, FeatureRow, SoftmaxRegression};
pub use rff::{kernel_estimate, rbf_kernel, rff_transform, RffParams};
pub use tagger::TokenTagger;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dataset::{Example, TokenSentence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    KernelLogistic,
    TokenTagger,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::KernelLogistic => "kernel_logistic",
            ModelKind::TokenTagger => "token_tagger",
        }
    }

    pub fn is_sequence(self) -> bool {
        self == ModelKind::TokenTagger
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// SGD / perceptron training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Inverse-time decay per mini-batch step: `lr / (1 + lr_decay * step)`.
    pub lr_decay: f64,
    pub epochs: usize,
    pub l2: f64,
    pub batch_size: usize,
    /// Slope of the logistic link applied to tagger scores.
    pub tagger_calibration: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            lr_decay: 1e-3,
            epochs: 5,
            l2: 1e-4,
            batch_size: 32,
            tagger_calibration: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        TrainConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("tagger_calibration", self.tagger_calibration),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be positive"));
            }
        }
        for (key, v) in [("lr_decay", self.lr_decay), ("l2", self.l2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be non-negative"));
            }
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    /// Regularised log-loss for the linear models, last-epoch mistake rate for
    /// the tagger.
    pub final_loss: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Logistic {
        head: SoftmaxRegression,
    },
    KernelLogistic {
        features: RffParams,
        head: SoftmaxRegression,
    },
    TokenTagger {
        tagger: TokenTagger,
    },
}

/// A trained model with class-probability output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilisticClassifier {
    pub params: ModelParams,
    pub diagnostics: TrainDiagnostics,
}

/// Input to [`ProbabilisticClassifier::predict_proba`].
#[derive(Debug, Clone, Copy)]
pub enum ModelInput<'a> {
    Example(&'a Example),
    Sentence(&'a TokenSentence),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Classes(Vec<f64>),
    Tokens(Vec<[f64; 2]>),
}

impl ProbabilisticClassifier {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::Logistic { .. } => ModelKind::Logistic,
            ModelParams::KernelLogistic { .. } => ModelKind::KernelLogistic,
            ModelParams::TokenTagger { .. } => ModelKind::TokenTagger,
        }
    }

    pub fn predict_proba(&self, input: ModelInput<'_>) -> Result<Prediction> {
        match input {
            ModelInput::Example(x) => self.predict_example(x).map(Prediction::Classes),
            ModelInput::Sentence(s) => self.predict_sentence(s).map(Prediction::Tokens),
        }
    }

    pub fn predict_example(&self, x: &Example) -> Result<Vec<f64>> {
        match &self.params {
            ModelParams::Logistic { head } => Ok(head.predict_proba(&x.features)),
            ModelParams::KernelLogistic { features, head } => {
                Ok(head.predict_proba(&features.transform(&x.features)))
            }
            ModelParams::TokenTagger { .. } => Err(Error::KindMismatch(
                "token tagger cannot score a sparse example".into(),
            )),
        }
    }

    pub fn predict_sentence(&self, s: &TokenSentence) -> Result<Vec<[f64; 2]>> {
        match &self.params {
            ModelParams::TokenTagger { tagger } => Ok(tagger.predict(s)),
            _ => Err(Error::KindMismatch(format!(
                "{} model cannot score a token sentence",
                self.kind()
            ))),
        }
    }

    /// Writes a JSON checkpoint.
    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        let mut model: ProbabilisticClassifier = serde_json::from_reader(input)?;
        if let ModelParams::TokenTagger { tagger } = &mut model.params {
            tagger.reindex();
        }
        Ok(model)
    }
}

/// Multinomial logistic regression on the raw sparse features.
pub fn train_logistic(
    examples: &[Example],
    n_classes: usize,
    config: &TrainConfig,
) -> Result<ProbabilisticClassifier> {
    let rows: Vec<_> = examples.iter().map(|e| e.features.clone()).collect();
    let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let (head, diagnostics) = SoftmaxRegression::fit(&rows, &labels, n_classes, config)?;
    Ok(ProbabilisticClassifier {
        params: ModelParams::Logistic { head },
        diagnostics,
    })
}

/// Logistic regression on random Fourier features.
pub fn train_kernel_logistic(
    examples: &[Example],
    n_classes: usize,
    features: &RffParams,
    config: &TrainConfig,
) -> Result<ProbabilisticClassifier> {
    let rows: Vec<Vec<f64>> = examples
        .iter()
        .map(|e| features.transform(&e.features))
        .collect();
    let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let (head, diagnostics) = SoftmaxRegression::fit(&rows, &labels, n_classes, config)?;
    Ok(ProbabilisticClassifier {
        params: ModelParams::KernelLogistic {
            features: features.clone(),
            head,
        },
        diagnostics,
    })
}

pub fn train_token_tagger(
    corpus: &[TokenSentence],
    config: &TrainConfig,
) -> Result<ProbabilisticClassifier> {
    let (tagger, diagnostics) = TokenTagger::train(corpus, config)?;
    Ok(ProbabilisticClassifier {
        params: ModelParams::TokenTagger { tagger },
        diagnostics,
    })
}

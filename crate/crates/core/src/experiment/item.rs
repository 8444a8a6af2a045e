use crate::dataset::{Example, Instance, TokenSentence};
use crate::error::{Error, Result};
use crate::metrics::Evaluable;
use crate::models::{
    train_kernel_logistic, train_logistic, train_token_tagger, ModelInput, ModelKind,
    ProbabilisticClassifier, RffParams, TrainConfig,
};

/// Everything a training call needs besides the data and seed.
#[derive(Debug, Clone)]
pub struct TrainContext {
    pub n_classes: usize,
    pub features: Option<RffParams>,
    pub train: TrainConfig,
}

/// Instances that can flow through a trial.
pub trait TrialItem: Instance + Evaluable {
    /// Whether items are token sequences (no random-feature map needed).
    const SEQUENCE: bool;

    fn train(
        kind: ModelKind,
        items: &[Self],
        ctx: &TrainContext,
        seed: u64,
    ) -> Result<ProbabilisticClassifier>;

    fn input(&self) -> ModelInput<'_>;
}

impl TrialItem for Example {
    const SEQUENCE: bool = false;

    fn train(
        kind: ModelKind,
        items: &[Self],
        ctx: &TrainContext,
        seed: u64,
    ) -> Result<ProbabilisticClassifier> {
        let cfg = ctx.train.with_seed(seed);
        match kind {
            ModelKind::Logistic => train_logistic(items, ctx.n_classes, &cfg),
            ModelKind::KernelLogistic => {
                let features = ctx
                    .features
                    .as_ref()
                    .ok_or_else(|| Error::invalid("kernel model without random features"))?;
                train_kernel_logistic(items, ctx.n_classes, features, &cfg)
            }
            ModelKind::TokenTagger => Err(Error::KindMismatch(
                "token tagger cannot train on sparse examples".into(),
            )),
        }
    }

    fn input(&self) -> ModelInput<'_> {
        ModelInput::Example(self)
    }
}

impl TrialItem for TokenSentence {
    const SEQUENCE: bool = true;

    fn train(
        kind: ModelKind,
        items: &[Self],
        ctx: &TrainContext,
        seed: u64,
    ) -> Result<ProbabilisticClassifier> {
        match kind {
            ModelKind::TokenTagger => train_token_tagger(items, &ctx.train.with_seed(seed)),
            other => Err(Error::KindMismatch(format!(
                "{other} cannot train on token sentences"
            ))),
        }
    }

    fn input(&self) -> ModelInput<'_> {
        ModelInput::Sentence(self)
    }
}

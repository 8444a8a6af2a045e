use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dataset::{CorpusConfig, ExpirationPolicy, RevisionRule};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::models::{ModelKind, TrainConfig};
use crate::sampling::{SchemeConfig, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// SVMlight file; optionally subsampled per trial and max-abs scaled.
    Svmlight {
        path: PathBuf,
        #[serde(default)]
        subsample: Option<usize>,
        #[serde(default = "yes")]
        scale: bool,
    },
    /// Synthetic segmentation corpus, generated once per experiment.
    Segmentation { corpus: CorpusConfig },
}

fn yes() -> bool {
    true
}

impl DataSource {
    pub fn is_sequence(&self) -> bool {
        matches!(self, DataSource::Segmentation { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    /// Changes the evaluation model class (and the naive-adaptive scorer).
    /// With `reseed`, every label acquired so far by any scheme joins the
    /// common seed set.
    ModelSwitch {
        to: ModelKind,
        #[serde(default)]
        reseed: bool,
    },
    LabelRevision { rule: RevisionRule },
    ExpirationPolicyChange { policy: ExpirationPolicy },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::ModelSwitch { .. } => "model_switch",
            Event::LabelRevision { .. } => "label_revision",
            Event::ExpirationPolicyChange { .. } => "expiration_policy_change",
        }
    }
}

/// An event applied at the start of `round`, before that round's selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledEvent {
    pub round: usize,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RffConfig {
    pub features: usize,
    pub gamma: f64,
}

impl Default for RffConfig {
    fn default() -> Self {
        RffConfig {
            features: 500,
            gamma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub seed_set_size: usize,
    pub holdout_size: usize,
    /// Held-out validation items used by best-of-k selection.
    #[serde(default)]
    pub validation_size: usize,
    pub rounds: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub subset_size: Option<usize>,
    pub schemes: Vec<SchemeConfig>,
    #[serde(default)]
    pub events: Vec<ScheduledEvent>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "one")]
    pub best_of_k: usize,
    #[serde(default)]
    pub metric: Metric,
    /// Evaluation model class before any switch; defaults to the data track's
    /// natural model.
    #[serde(default)]
    pub initial_model: Option<ModelKind>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub rff: RffConfig,
    #[serde(default = "default_length_penalty")]
    pub length_penalty: f64,
    #[serde(default)]
    pub expiration: ExpirationPolicy,
}

fn one() -> usize {
    1
}

fn default_length_penalty() -> f64 {
    0.5
}

impl ExperimentConfig {
    pub fn initial_kind(&self) -> ModelKind {
        self.initial_model.unwrap_or(if self.data.is_sequence() {
            ModelKind::TokenTagger
        } else {
            ModelKind::Logistic
        })
    }

    pub fn scheme_names(&self) -> Vec<String> {
        self.schemes.iter().map(|s| s.name()).collect()
    }

    fn check_kind(&self, key: &str, kind: ModelKind) -> Result<()> {
        if kind.is_sequence() != self.data.is_sequence() {
            let track = if self.data.is_sequence() {
                "segmentation"
            } else {
                "svmlight"
            };
            return Err(Error::config(
                key,
                format!("model `{kind}` does not fit the {track} data track"),
            ));
        }
        Ok(())
    }

    /// Checks everything that does not depend on the loaded data.
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("rounds", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.seed_set_size == 0 {
            return Err(Error::config("seed_set_size", "must be at least 1"));
        }
        if self.holdout_size == 0 {
            return Err(Error::config("holdout_size", "must be at least 1"));
        }
        if let Some(m) = self.subset_size {
            if m < self.batch_size {
                return Err(Error::config("subset_size", "must be at least batch_size"));
            }
        }
        if self.best_of_k == 0 {
            return Err(Error::config("best_of_k", "must be at least 1"));
        }
        if self.best_of_k > 1 && self.validation_size == 0 {
            return Err(Error::config(
                "validation_size",
                "must be positive when best_of_k > 1",
            ));
        }
        if !self.length_penalty.is_finite() {
            return Err(Error::config("length_penalty", "must be finite"));
        }
        self.train.validate()?;
        if self.rff.features == 0 {
            return Err(Error::config("rff.features", "must be at least 1"));
        }
        if !(self.rff.gamma > 0.0 && self.rff.gamma.is_finite()) {
            return Err(Error::config("rff.gamma", "must be positive"));
        }
        self.expiration.validate()?;
        match &self.data {
            DataSource::Svmlight { subsample, .. } => {
                if *subsample == Some(0) {
                    return Err(Error::config("data.subsample", "must be positive"));
                }
            }
            DataSource::Segmentation { corpus } => corpus.validate()?,
        }
        self.check_kind("initial_model", self.initial_kind())?;

        if self.schemes.is_empty() {
            return Err(Error::config("schemes", "need at least one scheme"));
        }
        let mut names = BTreeSet::new();
        for s in &self.schemes {
            let name = s.name();
            if !names.insert(name.clone()) {
                return Err(Error::config("schemes", format!("duplicate scheme name `{name}`")));
            }
            if let Some(l) = s.length_penalty {
                if !l.is_finite() {
                    return Err(Error::config("length_penalty", "must be finite"));
                }
            }
            match &s.strategy {
                Strategy::Passive | Strategy::MarginNaiveAdaptive => {}
                Strategy::MarginPure { scorer } => self.check_kind("scorer", *scorer)?,
                Strategy::MarginPower {
                    schedule,
                    grid,
                    members,
                } => {
                    if self.data.is_sequence() {
                        return Err(Error::config(
                            "strategy",
                            "margin_power needs two model classes; the segmentation track has one",
                        ));
                    }
                    for m in members {
                        self.check_kind("members", *m)?;
                    }
                    match (schedule, grid) {
                        (Some(_), None) => {}
                        (None, Some(g)) => g.validate()?,
                        _ => {
                            return Err(Error::config(
                                "strategy",
                                format!("scheme `{name}` needs exactly one of schedule or grid"),
                            ))
                        }
                    }
                }
            }
        }

        let mut switch_rounds = BTreeSet::new();
        for e in &self.events {
            if e.round == 0 || e.round > self.rounds {
                return Err(Error::config(
                    "events.round",
                    format!("must lie in 1..={}", self.rounds),
                ));
            }
            match &e.event {
                Event::ModelSwitch { to, .. } => {
                    self.check_kind("events.to", *to)?;
                    if !switch_rounds.insert(e.round) {
                        return Err(Error::config(
                            "events",
                            format!("more than one model_switch in round {}", e.round),
                        ));
                    }
                }
                Event::LabelRevision { rule } => {
                    rule.validate()?;
                    if matches!(rule, RevisionRule::Guideline { .. }) && !self.data.is_sequence() {
                        return Err(Error::config(
                            "rule",
                            "guideline revisions need the segmentation track",
                        ));
                    }
                }
                Event::ExpirationPolicyChange { policy } => policy.validate()?,
            }
        }
        Ok(())
    }

    /// Items the protocol needs beyond the holdout, ignoring reseeding.
    pub fn required_items(&self) -> usize {
        self.holdout_size + self.validation_size + self.seed_set_size + self.rounds * self.batch_size
    }

    /// Events scheduled for `round`, in listed order.
    pub fn events_at(&self, round: usize) -> impl Iterator<Item = &Event> {
        self.events
            .iter()
            .filter(move |e| e.round == round)
            .map(|e| &e.event)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(v: serde_json::Value) -> std::result::Result<ExperimentConfig, serde_json::Error> {
        serde_json::from_value(v)
    }

    fn base() -> serde_json::Value {
        json!({
            "data": {"kind": "svmlight", "path": "x.svm"},
            "seed_set_size": 10, "holdout_size": 10, "rounds": 3, "batch_size": 5,
            "schemes": [{"strategy": {"kind": "passive"}}]
        })
    }

    fn with(patch: serde_json::Value) -> ExperimentConfig {
        let mut v = base();
        for (k, x) in patch.as_object().unwrap() {
            v[k] = x.clone();
        }
        parse(v).unwrap()
    }

    fn rejects(patch: serde_json::Value, key: &str) {
        match with(patch).validate() {
            Err(Error::Config { key: k, .. }) => assert_eq!(k, key),
            other => panic!("expected config error on {key}, got {other:?}"),
        }
    }

    #[test]
    fn defaults_fill_in() {
        let c = with(json!({}));
        c.validate().unwrap();
        assert_eq!(c.trials, 1);
        assert_eq!(c.best_of_k, 1);
        assert_eq!(c.initial_kind(), ModelKind::Logistic);
        assert_eq!(c.required_items(), 10 + 10 + 15);
        assert_eq!(c.scheme_names(), vec!["passive"]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v = base();
        v["round"] = json!(3);
        let err = parse(v).unwrap_err().to_string();
        assert!(err.contains("unknown field `round`"), "{err}");
    }

    #[test]
    fn structural_constraints() {
        rejects(json!({"rounds": 0}), "rounds");
        rejects(json!({"trials": 0}), "trials");
        rejects(json!({"subset_size": 2}), "subset_size");
        rejects(json!({"best_of_k": 3}), "validation_size");
        rejects(json!({"schemes": []}), "schemes");
        rejects(
            json!({"schemes": [{"strategy": {"kind": "passive"}}, {"strategy": {"kind": "passive"}}]}),
            "schemes",
        );
    }

    #[test]
    fn model_kinds_must_match_the_track() {
        rejects(json!({"initial_model": "token_tagger"}), "initial_model");
        rejects(
            json!({"schemes": [{"strategy": {"kind": "margin_pure", "scorer": "token_tagger"}}]}),
            "scorer",
        );
        let mut v = base();
        v["data"] = json!({"kind": "segmentation", "corpus": {"n_sentences": 100}});
        v["schemes"] = json!([{"strategy": {"kind": "margin_power",
            "schedule": [{"t_start": 0, "a": 1.0, "b": 0.0, "alpha": 1.0}]}}]);
        let c = parse(v).unwrap();
        assert_eq!(c.initial_kind(), ModelKind::TokenTagger);
        assert!(matches!(c.validate(), Err(Error::Config { .. })));
    }

    #[test]
    fn power_needs_schedule_xor_grid() {
        rejects(json!({"schemes": [{"strategy": {"kind": "margin_power"}}]}), "strategy");
    }

    #[test]
    fn event_constraints() {
        rejects(
            json!({"events": [{"round": 4, "event": {"kind": "model_switch", "to": "kernel_logistic"}}]}),
            "events.round",
        );
        rejects(
            json!({"events": [{"round": 0, "event": {"kind": "model_switch", "to": "kernel_logistic"}}]}),
            "events.round",
        );
        rejects(
            json!({"events": [
                {"round": 2, "event": {"kind": "model_switch", "to": "kernel_logistic"}},
                {"round": 2, "event": {"kind": "model_switch", "to": "logistic"}}
            ]}),
            "events",
        );
        rejects(
            json!({"events": [{"round": 2, "event": {"kind": "label_revision",
                "rule": {"kind": "guideline", "rule_version": 2}}}]}),
            "rule",
        );
        let c = with(json!({"events": [
            {"round": 2, "event": {"kind": "model_switch", "to": "kernel_logistic"}},
            {"round": 2, "event": {"kind": "label_revision", "rule": {"kind": "flip", "target_fraction": 0.4}}}
        ]}));
        c.validate().unwrap();
        let names: Vec<_> = c.events_at(2).map(Event::name).collect();
        assert_eq!(names, vec!["model_switch", "label_revision"]);
        assert_eq!(c.events_at(1).count(), 0);
    }
}

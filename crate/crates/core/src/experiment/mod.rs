//! Round-based active-learning trials.
//!
//! A trial splits the data into holdout, optional validation set, a common
//! seed set and a pool, then runs every scheme in lockstep: at each round due
//! events fire, expired labels are pruned, each scheme selects a batch from
//! its own copy of the pool, and its evaluation model is retrained from
//! scratch and scored on the shared holdout.
//!
//! Randomness is keyed by `(base_seed, trial, purpose, round)` and, for model
//! training, by a hash chain over the scheme's labeled-set history. Schemes
//! with identical histories therefore train identical models and draw
//! identical candidate subsets.

mod config;
mod item;

pub use config::{DataSource, Event, ExperimentConfig, RffConfig, ScheduledEvent};
pub use item::{TrainContext, TrialItem};

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    apply_label_revision, generate_segmentation_corpus, read_svmlight_file, split_pool_holdout,
    Dataset, ExpirationPolicy, LabeledSet, RevisionRule, TokenSentence,
};
use crate::error::{Error, Result};
use crate::metrics::{
    batch_composition, discounted_average, evaluate, BatchComposition, CurvePoint, LearningCurve,
};
use crate::models::{best_of_k_train, ModelKind, ProbabilisticClassifier, RffParams};
use crate::sampling::{
    ensemble_score, fit_power_schedule, passive_select, penalized_margin, power_weight,
    select_scored, PowerSchedule, SchemeConfig, Scored, Strategy,
};
use crate::seed;

mod purpose {
    pub const SUBSAMPLE: u64 = 1;
    pub const HOLDOUT: u64 = 2;
    pub const VALIDATION: u64 = 3;
    pub const SEED_SET: u64 = 4;
    pub const RFF: u64 = 5;
    pub const SUBSET: u64 = 6;
    pub const PASSIVE: u64 = 7;
    pub const REVISION: u64 = 8;
    pub const EXPIRE: u64 = 9;
    pub const TRAIN: u64 = 10;
    pub const ACQUIRE: u64 = 11;
    pub const RESEED: u64 = 12;
    pub const CORPUS: u64 = 13;
    pub const START: u64 = 14;
}

/// Data loaded once per experiment.
#[derive(Debug, Clone)]
pub enum PreparedData {
    Binary(Dataset),
    Segmentation(Vec<TokenSentence>),
}

impl PreparedData {
    pub fn len(&self) -> usize {
        match self {
            PreparedData::Binary(d) => d.len(),
            PreparedData::Segmentation(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loads or generates the experiment's data and checks it can host the
/// protocol.
pub fn prepare_data(config: &ExperimentConfig) -> Result<PreparedData> {
    config.validate()?;
    let data = match &config.data {
        DataSource::Svmlight {
            path,
            subsample,
            scale,
        } => {
            let mut ds = read_svmlight_file(path)?;
            if *scale {
                ds.scale_max_abs();
            }
            if let Some(m) = subsample {
                if *m > ds.len() {
                    return Err(Error::config(
                        "data.subsample",
                        format!("{m} exceeds the {} examples in the file", ds.len()),
                    ));
                }
            }
            PreparedData::Binary(ds)
        }
        DataSource::Segmentation { corpus } => PreparedData::Segmentation(
            generate_segmentation_corpus(corpus, seed::derive(config.base_seed, &[purpose::CORPUS]))?,
        ),
    };
    let available = match (&config.data, &data) {
        (DataSource::Svmlight { subsample: Some(m), .. }, _) => *m,
        _ => data.len(),
    };
    if config.required_items() > available {
        return Err(Error::config(
            "data",
            format!(
                "protocol needs {} items (holdout + validation + seed + rounds x batch) but only {available} are available",
                config.required_items()
            ),
        ));
    }
    Ok(data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub id: u64,
    pub raw_margin: Option<f64>,
    pub penalized_margin: Option<f64>,
}

/// One point of a scheme's learning curve plus its batch diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 0 is the seed-only model.
    pub round: usize,
    /// Cumulative labels used: seed plus every batch acquired so far.
    pub training_size: usize,
    /// Labels actually in the training set after expiration.
    pub retained_size: usize,
    pub metric: f64,
    pub eval_model: ModelKind,
    pub selections: Vec<Selection>,
    pub composition: Option<BatchComposition>,
    /// Weight on the first ensemble member for power schemes.
    pub ensemble_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeOutcome {
    pub scheme: String,
    pub rounds: Vec<RoundRecord>,
}

impl SchemeOutcome {
    pub fn curve(&self) -> Result<LearningCurve> {
        LearningCurve::new(
            self.rounds
                .iter()
                .map(|r| CurvePoint {
                    training_size: r.training_size,
                    value: r.metric,
                })
                .collect(),
        )
    }

    pub fn selected_ids(&self, round: usize) -> Vec<u64> {
        self.rounds
            .iter()
            .find(|r| r.round == round)
            .map(|r| r.selections.iter().map(|s| s.id).collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub round: usize,
    /// Scheme the record refers to; absent for trial-wide effects.
    pub scheme: Option<String>,
    pub event: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub touched_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_flipped: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub schemes: Vec<SchemeOutcome>,
    pub events: Vec<EventRecord>,
}

impl TrialResult {
    pub fn scheme(&self, name: &str) -> Option<&SchemeOutcome> {
        self.schemes.iter().find(|s| s.scheme == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub trials: Vec<TrialResult>,
    /// Power schedules fitted from grids, by scheme name.
    pub fitted_schedules: Vec<(String, PowerSchedule)>,
}

struct SchemeState<T> {
    name: String,
    strategy: Strategy,
    schedule: Option<PowerSchedule>,
    lambda: f64,
    pool: Vec<T>,
    labeled: LabeledSet<T>,
    /// Hash chain over the labeled-set history; keys model training.
    version: u64,
    training_size: usize,
    rounds: Vec<RoundRecord>,
}

type ModelCache = Mutex<HashMap<(u64, ModelKind), Arc<ProbabilisticClassifier>>>;

/// Mutable state of one trial. Exposed so the event and selection steps can
/// be driven and inspected individually.
pub struct TrialState<'a, T: TrialItem> {
    config: &'a ExperimentConfig,
    trial: usize,
    trial_seed: u64,
    ctx: TrainContext,
    holdout: Vec<T>,
    validation: Vec<T>,
    schemes: Vec<SchemeState<T>>,
    eval_kind: ModelKind,
    policy: ExpirationPolicy,
    cache: ModelCache,
    events: Vec<EventRecord>,
    started: Instant,
}

fn fold_ids(ids: &[u64]) -> u64 {
    ids.iter().fold(0, |h, &id| seed::mix64(h ^ id))
}

impl<'a, T: TrialItem> TrialState<'a, T> {
    /// Splits the data for `trial` and sets up every scheme. `schedules`
    /// resolves each scheme's power schedule (ignored for other strategies).
    pub fn new(
        config: &'a ExperimentConfig,
        data: &[T],
        n_classes: usize,
        input_dim: usize,
        trial: usize,
        schedules: &[Option<PowerSchedule>],
    ) -> Result<Self> {
        let trial_seed = seed::derive(config.base_seed, &[trial as u64]);
        let key = |p: u64| seed::derive(trial_seed, &[p]);

        let items: Vec<T> = match &config.data {
            DataSource::Svmlight {
                subsample: Some(m), ..
            } if *m < data.len() => {
                let mut rng = seed::rng(key(purpose::SUBSAMPLE), &[]);
                let mut picked = index::sample(&mut rng, data.len(), *m).into_vec();
                picked.sort_unstable();
                picked.into_iter().map(|i| data[i].clone()).collect()
            }
            _ => data.to_vec(),
        };
        if config.required_items() > items.len() {
            return Err(Error::config(
                "data",
                format!(
                    "protocol needs {} items but only {} are available",
                    config.required_items(),
                    items.len()
                ),
            ));
        }
        let (pool, holdout) = split_pool_holdout(&items, config.holdout_size, key(purpose::HOLDOUT))?;
        let (pool, validation) = if config.validation_size > 0 {
            split_pool_holdout(&pool, config.validation_size, key(purpose::VALIDATION))?
        } else {
            (pool, Vec::new())
        };
        let (pool, seed_set) = split_pool_holdout(&pool, config.seed_set_size, key(purpose::SEED_SET))
            .map_err(|_| Error::config("seed_set_size", "must be smaller than the pool"))?;

        let features = if T::SEQUENCE {
            None
        } else {
            Some(RffParams::new(
                input_dim.max(1),
                config.rff.features,
                config.rff.gamma,
                key(purpose::RFF),
            )?)
        };

        if schedules.len() != config.schemes.len() {
            return Err(Error::invalid("one schedule slot per scheme required"));
        }
        let start_version = seed::derive(trial_seed, &[purpose::START]);
        let schemes = config
            .schemes
            .iter()
            .zip(schedules)
            .map(|(sc, schedule): (&SchemeConfig, _)| {
                if matches!(sc.strategy, Strategy::MarginPower { .. }) && schedule.is_none() {
                    return Err(Error::config(
                        "schedule",
                        format!("scheme `{}` has no power schedule (fit the grid first)", sc.name()),
                    ));
                }
                Ok(SchemeState {
                    name: sc.name(),
                    strategy: sc.strategy.clone(),
                    schedule: schedule.clone(),
                    lambda: sc.length_penalty.unwrap_or(config.length_penalty),
                    pool: pool.clone(),
                    labeled: LabeledSet::from_items(seed_set.iter().cloned(), 0),
                    version: start_version,
                    training_size: seed_set.len(),
                    rounds: Vec::with_capacity(config.rounds + 1),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(TrialState {
            config,
            trial,
            trial_seed,
            ctx: TrainContext {
                n_classes,
                features,
                train: config.train.clone(),
            },
            holdout,
            validation,
            schemes,
            eval_kind: config.initial_kind(),
            policy: config.expiration.clone(),
            cache: Mutex::new(HashMap::new()),
            events: Vec::new(),
            started: Instant::now(),
        })
    }

    fn key(&self, parts: &[u64]) -> u64 {
        seed::derive(self.trial_seed, parts)
    }

    fn wrap(&self, scheme: &str, round: usize) -> impl Fn(Error) -> Error + '_ {
        let scheme = scheme.to_string();
        let trial = self.trial;
        move |e| match e {
            e @ Error::Trial { .. } => e,
            e => Error::Trial {
                trial,
                scheme: scheme.clone(),
                round,
                source: Box::new(e),
            },
        }
    }

    pub fn eval_kind(&self) -> ModelKind {
        self.eval_kind
    }

    pub fn holdout(&self) -> &[T] {
        &self.holdout
    }

    pub fn holdout_ids(&self) -> BTreeSet<u64> {
        self.holdout.iter().map(|x| x.id()).collect()
    }

    pub fn validation_ids(&self) -> BTreeSet<u64> {
        self.validation.iter().map(|x| x.id()).collect()
    }

    pub fn scheme_names(&self) -> Vec<String> {
        self.schemes.iter().map(|s| s.name.clone()).collect()
    }

    pub fn labeled(&self, scheme: usize) -> &LabeledSet<T> {
        &self.schemes[scheme].labeled
    }

    pub fn pool_ids(&self, scheme: usize) -> BTreeSet<u64> {
        self.schemes[scheme].pool.iter().map(|x| x.id()).collect()
    }

    pub fn event_log(&self) -> &[EventRecord] {
        &self.events
    }

    /// Model of `kind` trained on the scheme's current labeled set; shared by
    /// every scheme whose history hashes to the same version.
    fn model(&self, scheme: usize, kind: ModelKind) -> Result<Arc<ProbabilisticClassifier>> {
        let s = &self.schemes[scheme];
        let cache_key = (s.version, kind);
        if let Some(m) = self.cache.lock().expect("model cache").get(&cache_key) {
            return Ok(Arc::clone(m));
        }
        let items = s.labeled.to_items();
        let train_seed = self.key(&[purpose::TRAIN, s.version, kind as u64]);
        let model = if self.config.best_of_k > 1 {
            best_of_k_train(
                self.config.best_of_k,
                train_seed,
                |sd| T::train(kind, &items, &self.ctx, sd),
                |m| evaluate(m, &self.validation, self.config.metric),
            )?
            .model
        } else {
            T::train(kind, &items, &self.ctx, train_seed)?
        };
        let model = Arc::new(model);
        self.cache
            .lock()
            .expect("model cache")
            .insert(cache_key, Arc::clone(&model));
        Ok(model)
    }

    fn evict_stale_models(&self) {
        let live: HashSet<u64> = self.schemes.iter().map(|s| s.version).collect();
        self.cache
            .lock()
            .expect("model cache")
            .retain(|(v, _), _| live.contains(v));
    }

    fn log_event(&mut self, record: EventRecord) {
        log::debug!(
            "trial {} round {} {}: {}",
            self.trial,
            record.round,
            record.event,
            record.detail
        );
        self.events.push(record);
    }

    /// Evaluates the seed-only models (round 0).
    pub fn init(&mut self) -> Result<()> {
        for i in 0..self.schemes.len() {
            self.record_round(i, 0, Vec::new(), None)
                .map_err(self.wrap(&self.schemes[i].name, 0))?;
        }
        Ok(())
    }

    /// Applies every event scheduled for `round`, in listed order.
    pub fn apply_events(&mut self, round: usize) -> Result<()> {
        let events: Vec<Event> = self.config.events_at(round).cloned().collect();
        for (n, event) in events.into_iter().enumerate() {
            match event {
                Event::ModelSwitch { to, reseed } => {
                    if to == self.eval_kind {
                        self.log_event(EventRecord {
                            round,
                            scheme: None,
                            event: "model_switch".into(),
                            detail: format!("already using {to}; no-op"),
                            touched_fraction: None,
                            labels_flipped: None,
                            removed: None,
                        });
                    } else {
                        let from = self.eval_kind;
                        self.eval_kind = to;
                        self.log_event(EventRecord {
                            round,
                            scheme: None,
                            event: "model_switch".into(),
                            detail: format!("{from} -> {to}"),
                            touched_fraction: None,
                            labels_flipped: None,
                            removed: None,
                        });
                    }
                    if reseed {
                        self.reseed(round)?;
                    }
                }
                Event::LabelRevision { rule } => self.revise(round, n, &rule)?,
                Event::ExpirationPolicyChange { policy } => {
                    policy.validate()?;
                    self.log_event(EventRecord {
                        round,
                        scheme: None,
                        event: "expiration_policy_change".into(),
                        detail: format!("{policy:?}"),
                        touched_fraction: None,
                        labels_flipped: None,
                        removed: None,
                    });
                    self.policy = policy;
                }
            }
        }
        Ok(())
    }

    /// Folds every scheme's acquired labels into a new common seed set.
    fn reseed(&mut self, round: usize) -> Result<()> {
        let mut seen = HashSet::new();
        let mut common: Vec<T> = Vec::new();
        for e in self.schemes[0].labeled.entries().iter().filter(|e| e.round == 0) {
            seen.insert(e.item.id());
            common.push(e.item.clone());
        }
        let before = common.len();
        for s in &self.schemes {
            for e in s.labeled.entries().iter().filter(|e| e.round > 0) {
                if seen.insert(e.item.id()) {
                    common.push(e.item.clone());
                }
            }
        }
        let version = self.key(&[purpose::RESEED, round as u64]);
        for s in &mut self.schemes {
            s.pool.retain(|x| !seen.contains(&x.id()));
            s.labeled = LabeledSet::from_items(common.iter().cloned(), 0);
            s.version = version;
            s.training_size = s.training_size.max(common.len());
        }
        let added = common.len() - before;
        self.log_event(EventRecord {
            round,
            scheme: None,
            event: "reseed".into(),
            detail: format!("common seed grows by {added} to {}", common.len()),
            touched_fraction: None,
            labels_flipped: None,
            removed: None,
        });
        Ok(())
    }

    fn revise(&mut self, round: usize, index: usize, rule: &RevisionRule) -> Result<()> {
        let rev_seed = self.key(&[purpose::REVISION, round as u64, index as u64]);
        let n_classes = self.ctx.n_classes;
        if let RevisionRule::Guideline { rule_version } = rule {
            for x in self
                .holdout
                .iter_mut()
                .chain(self.validation.iter_mut())
                .chain(self.schemes.iter_mut().flat_map(|s| s.pool.iter_mut()))
            {
                x.relabel(*rule_version)?;
            }
        }
        let mut records = Vec::new();
        for s in &mut self.schemes {
            let (revised, stats) = apply_label_revision(&s.labeled, rule, rev_seed, n_classes)
                .map_err(|e| Error::Trial {
                    trial: self.trial,
                    scheme: s.name.clone(),
                    round,
                    source: Box::new(e),
                })?;
            s.labeled = revised;
            s.version = seed::derive(s.version, &[purpose::REVISION, round as u64, index as u64]);
            records.push(EventRecord {
                round,
                scheme: Some(s.name.clone()),
                event: "label_revision".into(),
                detail: format!(
                    "{:.4} of {} labeled items touched, {} labels flipped",
                    stats.sentences_touched_fraction,
                    s.labeled.len(),
                    stats.labels_flipped_count
                ),
                touched_fraction: Some(stats.sentences_touched_fraction),
                labels_flipped: Some(stats.labels_flipped_count),
                removed: None,
            });
        }
        for r in records {
            self.log_event(r);
        }
        Ok(())
    }

    /// Prunes acquired labels under the current policy. Seed labels never
    /// expire.
    pub fn expire(&mut self, round: usize) -> Result<()> {
        if self.policy == ExpirationPolicy::Never {
            return Ok(());
        }
        let exp_seed = self.key(&[purpose::EXPIRE, round as u64]);
        let mut records = Vec::new();
        for s in &mut self.schemes {
            let before = s.labeled.len();
            let policy = &self.policy;
            s.labeled.retain(|e| {
                e.round == 0 || policy.keeps(round - e.round, e.item.id(), exp_seed)
            });
            let removed = before - s.labeled.len();
            if removed > 0 {
                s.version = seed::derive(s.version, &[purpose::EXPIRE, round as u64, removed as u64]);
                records.push(EventRecord {
                    round,
                    scheme: Some(s.name.clone()),
                    event: "expiration".into(),
                    detail: format!("{removed} labels expired"),
                    touched_fraction: None,
                    labels_flipped: None,
                    removed: Some(removed),
                });
            }
        }
        for r in records {
            self.log_event(r);
        }
        Ok(())
    }

    fn select(&self, i: usize, round: usize) -> Result<(Vec<Selection>, Option<f64>)> {
        let s = &self.schemes[i];
        let batch = self.config.batch_size;
        if s.pool.len() < batch {
            return Err(Error::PoolExhausted {
                round,
                needed: batch,
                available: s.pool.len(),
            });
        }
        let subset_seed = self.key(&[purpose::SUBSET, round as u64]);
        let (members, weights, ensemble_weight): (Vec<ModelKind>, Vec<f64>, Option<f64>) =
            match &s.strategy {
                Strategy::Passive => {
                    let ids = passive_select(
                        &s.pool,
                        batch,
                        self.key(&[purpose::PASSIVE, round as u64]),
                    )?;
                    let sel = ids
                        .into_iter()
                        .map(|id| Selection {
                            id,
                            raw_margin: None,
                            penalized_margin: None,
                        })
                        .collect();
                    return Ok((sel, None));
                }
                Strategy::MarginPure { scorer } => (vec![*scorer], vec![1.0], None),
                Strategy::MarginNaiveAdaptive => (vec![self.eval_kind], vec![1.0], None),
                Strategy::MarginPower { members, .. } => {
                    let schedule = s.schedule.as_ref().expect("checked at construction");
                    let w = power_weight(s.training_size as f64, schedule)?;
                    let mut kinds = Vec::new();
                    let mut ws = Vec::new();
                    for (k, wk) in [(members[0], w), (members[1], 1.0 - w)] {
                        if wk > 0.0 {
                            kinds.push(k);
                            ws.push(wk);
                        }
                    }
                    (kinds, ws, Some(w))
                }
            };
        let models: Vec<Arc<ProbabilisticClassifier>> = members
            .iter()
            .map(|&k| self.model(i, k))
            .collect::<Result<_>>()?;
        let refs: Vec<&ProbabilisticClassifier> = models.iter().map(|m| m.as_ref()).collect();
        let lambda = s.lambda;
        let ranked = select_scored(
            &s.pool,
            |x: &T| {
                let m = ensemble_score(&refs, &weights, x.input())?;
                Ok(Scored {
                    raw_margin: m.value(),
                    penalized_margin: penalized_margin(m, x.length(), lambda)?,
                })
            },
            batch,
            self.config.subset_size,
            subset_seed,
        )?;
        let sel = ranked
            .into_iter()
            .map(|(id, sc)| Selection {
                id,
                raw_margin: Some(sc.raw_margin),
                penalized_margin: Some(sc.penalized_margin),
            })
            .collect();
        Ok((sel, ensemble_weight))
    }

    fn acquire(&mut self, i: usize, round: usize, selections: &[Selection]) -> Result<Vec<T>> {
        let ids: Vec<u64> = selections.iter().map(|s| s.id).collect();
        let wanted: HashSet<u64> = ids.iter().copied().collect();
        let s = &mut self.schemes[i];
        let mut taken: HashMap<u64, T> = HashMap::with_capacity(ids.len());
        let mut rest = Vec::with_capacity(s.pool.len() - ids.len());
        for x in s.pool.drain(..) {
            if wanted.contains(&x.id()) {
                taken.insert(x.id(), x);
            } else {
                rest.push(x);
            }
        }
        s.pool = rest;
        let mut batch = Vec::with_capacity(ids.len());
        for id in &ids {
            let x = taken
                .remove(id)
                .ok_or_else(|| Error::invalid(format!("selected id {id} not in pool")))?;
            s.labeled.push(x.clone(), round)?;
            batch.push(x);
        }
        s.training_size += ids.len();
        s.version = seed::derive(s.version, &[purpose::ACQUIRE, round as u64, fold_ids(&ids)]);
        Ok(batch)
    }

    fn record_round(
        &mut self,
        i: usize,
        round: usize,
        selections: Vec<Selection>,
        extra: Option<(Vec<T>, Option<f64>)>,
    ) -> Result<()> {
        let model = self.model(i, self.eval_kind)?;
        let metric = evaluate(&model, &self.holdout, self.config.metric)?;
        let (composition, ensemble_weight) = match extra {
            Some((batch, w)) => (Some(batch_composition(&batch)?), w),
            None => (None, None),
        };
        let s = &mut self.schemes[i];
        log::info!(
            "trial={} scheme={} round={} metric={:.5} batch={} elapsed={:.1}s",
            self.trial,
            s.name,
            round,
            metric,
            selections.len(),
            self.started.elapsed().as_secs_f64()
        );
        s.rounds.push(RoundRecord {
            round,
            training_size: s.training_size,
            retained_size: s.labeled.len(),
            metric,
            eval_model: self.eval_kind,
            selections,
            composition,
            ensemble_weight,
        });
        Ok(())
    }

    /// Selection, acquisition, retraining and evaluation for every scheme.
    pub fn select_and_evaluate(&mut self, round: usize) -> Result<()> {
        for i in 0..self.schemes.len() {
            let name = self.schemes[i].name.clone();
            let run = |state: &mut Self| -> Result<()> {
                let (selections, weight) = state.select(i, round)?;
                let batch = state.acquire(i, round, &selections)?;
                state.record_round(i, round, selections, Some((batch, weight)))
            };
            run(self).map_err(self.wrap(&name, round))?;
        }
        self.evict_stale_models();
        Ok(())
    }

    /// One full round: events, expiration, then selection and evaluation.
    pub fn step(&mut self, round: usize) -> Result<()> {
        self.apply_events(round)
            .map_err(self.wrap("-", round))?;
        self.expire(round).map_err(self.wrap("-", round))?;
        self.select_and_evaluate(round)
    }

    pub fn finish(self) -> TrialResult {
        TrialResult {
            trial: self.trial,
            schemes: self
                .schemes
                .into_iter()
                .map(|s| SchemeOutcome {
                    scheme: s.name,
                    rounds: s.rounds,
                })
                .collect(),
            events: self.events,
        }
    }
}

fn run_items<T: TrialItem>(
    config: &ExperimentConfig,
    data: &[T],
    n_classes: usize,
    input_dim: usize,
    trial: usize,
    schedules: &[Option<PowerSchedule>],
) -> Result<TrialResult> {
    let mut state = TrialState::new(config, data, n_classes, input_dim, trial, schedules)
        .map_err(|e| Error::Trial {
            trial,
            scheme: "-".into(),
            round: 0,
            source: Box::new(e),
        })?;
    state.init()?;
    for round in 1..=config.rounds {
        state.step(round)?;
    }
    Ok(state.finish())
}

fn explicit_schedules(config: &ExperimentConfig) -> Vec<Option<PowerSchedule>> {
    config
        .schemes
        .iter()
        .map(|s| match &s.strategy {
            Strategy::MarginPower { schedule, .. } => schedule.clone(),
            _ => None,
        })
        .collect()
}

/// Runs one trial with the schedules resolved per scheme.
pub fn run_trial_with(
    config: &ExperimentConfig,
    data: &PreparedData,
    trial: usize,
    schedules: &[Option<PowerSchedule>],
) -> Result<TrialResult> {
    match data {
        PreparedData::Binary(ds) => run_items(
            config,
            &ds.examples,
            ds.n_classes(),
            ds.n_features as usize,
            trial,
            schedules,
        ),
        PreparedData::Segmentation(corpus) => run_items(config, corpus, 2, 0, trial, schedules),
    }
}

/// Runs one trial; power schemes must carry explicit schedules.
pub fn run_trial(config: &ExperimentConfig, data: &PreparedData, trial: usize) -> Result<TrialResult> {
    run_trial_with(config, data, trial, &explicit_schedules(config))
}

/// Fits the schedule of every power scheme that carries a grid, maximising
/// the mean over trials of the undiscounted average metric over rounds.
pub fn fit_schedules(
    config: &ExperimentConfig,
    data: &PreparedData,
) -> Result<Vec<Option<PowerSchedule>>> {
    let mut schedules = explicit_schedules(config);
    for (i, scheme) in config.schemes.iter().enumerate() {
        let Strategy::MarginPower {
            grid: Some(grid),
            members,
            ..
        } = &scheme.strategy
        else {
            continue;
        };
        let fitted = fit_power_schedule(grid, |candidate| {
            let mut solo = config.clone();
            solo.schemes = vec![SchemeConfig {
                name: scheme.name.clone(),
                strategy: Strategy::MarginPower {
                    schedule: Some(candidate.clone()),
                    grid: None,
                    members: *members,
                },
                length_penalty: scheme.length_penalty,
            }];
            let slots = vec![Some(candidate.clone())];
            let scores = (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let r = run_trial_with(&solo, data, t, &slots)?;
                    discounted_average(&r.schemes[0].curve()?, 1.0)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(scores.iter().sum::<f64>() / scores.len() as f64)
        })?;
        log::info!(
            "fitted schedule for {}: {:?} (objective {:.5})",
            scheme.name(),
            fitted.schedule,
            fitted.score
        );
        schedules[i] = Some(fitted.schedule);
    }
    Ok(schedules)
}

/// Runs every trial (concurrently, on the current rayon pool). The result
/// does not depend on execution order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let data = prepare_data(config)?;
    run_experiment_on(config, &data)
}

pub fn run_experiment_on(config: &ExperimentConfig, data: &PreparedData) -> Result<ExperimentResult> {
    config.validate()?;
    let schedules = fit_schedules(config, data)?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial_with(config, data, t, &schedules))
        .collect::<Result<Vec<_>>>()?;
    let fitted_schedules = config
        .schemes
        .iter()
        .zip(&schedules)
        .filter(|(s, _)| matches!(&s.strategy, Strategy::MarginPower { grid: Some(_), .. }))
        .filter_map(|(s, sch)| sch.clone().map(|x| (s.name(), x)))
        .collect();
    Ok(ExperimentResult {
        trials,
        fitted_schedules,
    })
}

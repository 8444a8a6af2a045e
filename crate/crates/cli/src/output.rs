//! CSV and JSON outputs of a run, and readers for them.
//!
//! Column orders are fixed:
//! - `curves.csv`: `trial,scheme,round,training_size,retained_size,metric,eval_model`
//! - `aggregate.csv`: `scheme,round,training_size,metric_mean,ci_lo,ci_hi`
//! - `gains.csv`: `scheme_pair,gain_kind,gain,active_size,reference_size`
//! - `batches.csv`: `trial,round,scheme,example_id,raw_margin,penalized_margin`
//! - `composition.csv`: `trial,round,scheme,size,proportion_a,proportion_b,mean_length_a,mean_length_b,mean_length,ensemble_weight`
//! - `events.csv`: `trial,round,scheme,event,detail,touched_fraction,labels_flipped,removed`
//!
//! Absent values are empty fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use alsim::experiment::{ExperimentConfig, ExperimentResult};
use alsim::metrics::{aggregate_curves, gain_report, Gain, LearningCurve};
use alsim::sampling::Strategy;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub trial: usize,
    pub scheme: String,
    pub round: usize,
    pub training_size: usize,
    pub retained_size: usize,
    pub metric: f64,
    pub eval_model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scheme: String,
    pub round: usize,
    pub training_size: usize,
    pub metric_mean: f64,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub scheme_pair: String,
    pub gain_kind: String,
    pub gain: Option<f64>,
    pub active_size: Option<usize>,
    pub reference_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub trial: usize,
    pub round: usize,
    pub scheme: String,
    pub example_id: u64,
    pub raw_margin: Option<f64>,
    pub penalized_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionRow {
    pub trial: usize,
    pub round: usize,
    pub scheme: String,
    pub size: usize,
    pub proportion_a: f64,
    pub proportion_b: f64,
    pub mean_length_a: Option<f64>,
    pub mean_length_b: Option<f64>,
    pub mean_length: f64,
    pub ensemble_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub trial: usize,
    pub round: usize,
    pub scheme: Option<String>,
    pub event: String,
    pub detail: String,
    pub touched_fraction: Option<f64>,
    pub labels_flipped: Option<usize>,
    pub removed: Option<usize>,
}

/// Per-scheme curves of every trial, in trial then scheme order.
pub fn curve_rows(result: &ExperimentResult) -> Vec<CurveRow> {
    result
        .trials
        .iter()
        .flat_map(|t| {
            t.schemes.iter().flat_map(move |s| {
                s.rounds.iter().map(move |r| CurveRow {
                    trial: t.trial,
                    scheme: s.scheme.clone(),
                    round: r.round,
                    training_size: r.training_size,
                    retained_size: r.retained_size,
                    metric: r.metric,
                    eval_model: r.eval_model.to_string(),
                })
            })
        })
        .collect()
}

fn scheme_curves(result: &ExperimentResult, index: usize) -> CliResult<Vec<LearningCurve>> {
    result
        .trials
        .iter()
        .map(|t| t.schemes[index].curve().map_err(CliError::from))
        .collect()
}

/// Pointwise mean and 95% bands over trials for every scheme.
pub fn aggregate_rows(config: &ExperimentConfig, result: &ExperimentResult) -> CliResult<Vec<AggregateRow>> {
    let mut rows = Vec::new();
    for (i, name) in config.scheme_names().into_iter().enumerate() {
        let agg = aggregate_curves(&scheme_curves(result, i)?)?;
        for (round, (&training_size, &metric_mean)) in
            agg.training_sizes.iter().zip(&agg.mean).enumerate()
        {
            let (ci_lo, ci_hi) = match &agg.bands {
                Some((lo, hi)) => (Some(lo[round]), Some(hi[round])),
                None => (None, None),
            };
            rows.push(AggregateRow {
                scheme: name.clone(),
                round,
                training_size,
                metric_mean,
                ci_lo,
                ci_hi,
            });
        }
    }
    Ok(rows)
}

/// Gains of every non-passive scheme against every passive one, measured on
/// the mean curves.
pub fn gain_rows(config: &ExperimentConfig, result: &ExperimentResult) -> CliResult<Vec<GainRow>> {
    let names = config.scheme_names();
    let mean = |i: usize| -> CliResult<LearningCurve> {
        Ok(aggregate_curves(&scheme_curves(result, i)?)?.mean_curve()?)
    };
    let is_passive = |i: usize| matches!(config.schemes[i].strategy, Strategy::Passive);
    let mut rows = Vec::new();
    for p in (0..names.len()).filter(|&i| is_passive(i)) {
        let passive = mean(p)?;
        for a in (0..names.len()).filter(|&i| !is_passive(i)) {
            let report = gain_report(&mean(a)?, &passive)?;
            let pair = format!("{}/{}", names[a], names[p]);
            for (kind, gain) in [
                ("last_vs_max", report.last_vs_max),
                ("first_vs_final", report.first_vs_final),
            ] {
                rows.push(GainRow {
                    scheme_pair: pair.clone(),
                    gain_kind: kind.into(),
                    gain: gain.map(|g: Gain| g.fraction),
                    active_size: gain.map(|g| g.active_size),
                    reference_size: gain.map(|g| g.reference_size),
                });
            }
        }
    }
    Ok(rows)
}

pub fn batch_rows(result: &ExperimentResult) -> Vec<BatchRow> {
    let mut rows = Vec::new();
    for t in &result.trials {
        for s in &t.schemes {
            for r in &s.rounds {
                rows.extend(r.selections.iter().map(|sel| BatchRow {
                    trial: t.trial,
                    round: r.round,
                    scheme: s.scheme.clone(),
                    example_id: sel.id,
                    raw_margin: sel.raw_margin,
                    penalized_margin: sel.penalized_margin,
                }));
            }
        }
    }
    rows
}

pub fn composition_rows(result: &ExperimentResult) -> Vec<CompositionRow> {
    let mut rows = Vec::new();
    for t in &result.trials {
        for s in &t.schemes {
            for r in &s.rounds {
                if let Some(c) = &r.composition {
                    rows.push(CompositionRow {
                        trial: t.trial,
                        round: r.round,
                        scheme: s.scheme.clone(),
                        size: c.size,
                        proportion_a: c.proportion_a,
                        proportion_b: c.proportion_b,
                        mean_length_a: c.mean_length_a,
                        mean_length_b: c.mean_length_b,
                        mean_length: c.mean_length,
                        ensemble_weight: r.ensemble_weight,
                    });
                }
            }
        }
    }
    rows
}

pub fn event_rows(result: &ExperimentResult) -> Vec<EventRow> {
    result
        .trials
        .iter()
        .flat_map(|t| {
            t.events.iter().map(move |e| EventRow {
                trial: t.trial,
                round: e.round,
                scheme: e.scheme.clone(),
                event: e.event.clone(),
                detail: e.detail.clone(),
                touched_fraction: e.touched_fraction,
                labels_flipped: e.labels_flipped,
                removed: e.removed,
            })
        })
        .collect()
}

/// Writes rows with a header line, even when there are no rows.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> CliResult<()> {
    let file = File::create(path).map_err(CliError::output(path))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(file));
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(CliError::output(path))?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub const CURVES_HEADER: [&str; 7] = [
    "trial", "scheme", "round", "training_size", "retained_size", "metric", "eval_model",
];
pub const AGGREGATE_HEADER: [&str; 6] = [
    "scheme", "round", "training_size", "metric_mean", "ci_lo", "ci_hi",
];
pub const GAINS_HEADER: [&str; 5] = [
    "scheme_pair", "gain_kind", "gain", "active_size", "reference_size",
];
pub const BATCHES_HEADER: [&str; 6] = [
    "trial", "round", "scheme", "example_id", "raw_margin", "penalized_margin",
];
pub const COMPOSITION_HEADER: [&str; 10] = [
    "trial", "round", "scheme", "size", "proportion_a", "proportion_b", "mean_length_a",
    "mean_length_b", "mean_length", "ensemble_weight",
];
pub const EVENTS_HEADER: [&str; 8] = [
    "trial", "round", "scheme", "event", "detail", "touched_fraction", "labels_flipped", "removed",
];

/// One JSON document per trial.
pub fn write_trials_jsonl(path: &Path, result: &ExperimentResult) -> CliResult<()> {
    let file = File::create(path).map_err(CliError::output(path))?;
    let mut w = BufWriter::new(file);
    for t in &result.trials {
        serde_json::to_writer(&mut w, t).map_err(|e| CliError::Runtime(e.to_string()))?;
        w.write_all(b"\n").map_err(CliError::output(path))?;
    }
    w.flush().map_err(CliError::output(path))
}

use alsim::dataset::synthetic::logistic_task;
use alsim::dataset::{Domain, Example, Token, TokenCategory, TokenSentence};
use alsim::metrics::*;
use alsim::models::{train_logistic, ModelParams, ProbabilisticClassifier, SoftmaxRegression, TrainConfig, TrainDiagnostics};
use alsim::Error;
use approx::assert_abs_diff_eq;
use proptest::prelude::*;

fn curve(points: &[(usize, f64)]) -> LearningCurve {
    LearningCurve::from_pairs(points).unwrap()
}

/// Passive peaks at 0.90 with 6,000 labels and ends at 0.89 with 7,000; the
/// active curve first clears both at 4,000.
fn footnote_curves() -> (LearningCurve, LearningCurve) {
    let passive = curve(&[
        (1000, 0.70),
        (2000, 0.78),
        (3000, 0.83),
        (4000, 0.86),
        (5000, 0.88),
        (6000, 0.90),
        (7000, 0.89),
    ]);
    let active = curve(&[
        (1000, 0.70),
        (2000, 0.82),
        (3000, 0.87),
        (4000, 0.905),
        (5000, 0.91),
        (6000, 0.915),
        (7000, 0.92),
    ]);
    (active, passive)
}

/// A fixed binary logistic model `p(1|x) = sigmoid(w x_1 + b)`.
fn fixed_model(bias: f64, w: f64) -> ProbabilisticClassifier {
    // class 0 row then class 1 row; slot 0 is the bias
    let head = SoftmaxRegression::from_weights(2, 2, vec![0.0, 0.0, bias, w]).unwrap();
    ProbabilisticClassifier {
        params: ModelParams::Logistic { head },
        diagnostics: TrainDiagnostics { final_loss: 0.0, epochs: 0 },
    }
}

fn point(id: u64, x: f64, label: usize) -> Example {
    Example {
        id,
        features: alsim::dataset::SparseVector::from_dense(&[x]),
        label,
        domain: None,
    }
}

#[test]
fn perfect_predictions_score_one() {
    let m = fixed_model(0.0, 10.0);
    let holdout = vec![point(1, 1.0, 1), point(2, -1.0, 0), point(3, 2.0, 1)];
    assert_eq!(evaluate(&m, &holdout, Metric::Accuracy).unwrap(), 1.0);
    assert_eq!(evaluate(&m, &holdout, Metric::F1).unwrap(), 1.0);
}

#[test]
fn f1_without_positives_is_zero() {
    let m = fixed_model(-10.0, 0.0);
    let holdout = vec![point(1, 1.0, 0), point(2, -1.0, 0)];
    assert_eq!(evaluate(&m, &holdout, Metric::F1).unwrap(), 0.0);
    assert_eq!(evaluate(&m, &holdout, Metric::Accuracy).unwrap(), 1.0);
}

#[test]
fn f1_arithmetic() {
    assert_abs_diff_eq!(f1_from(0.5, 1.0), 2.0 / 3.0, epsilon = 1e-15);
    let mut c = Confusion::default();
    // two predicted positives, one correct; the only true positive found
    c.record(1, 1);
    c.record(1, 0);
    c.record(0, 0);
    assert_abs_diff_eq!(c.f1(), 2.0 / 3.0, epsilon = 1e-15);
}

#[test]
fn empty_holdout_is_an_error() {
    let m = fixed_model(0.0, 1.0);
    let empty: Vec<Example> = Vec::new();
    assert!(matches!(
        evaluate(&m, &empty, Metric::Accuracy),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn aggregate_identical_curves_have_zero_width() {
    let c = curve(&[(10, 0.3), (20, 0.7)]);
    let agg = aggregate_curves(&[c.clone(), c.clone(), c.clone()]).unwrap();
    assert_eq!(agg.mean, c.values());
    let (lo, hi) = agg.bands.unwrap();
    assert_eq!(lo, c.values());
    assert_eq!(hi, c.values());
}

#[test]
fn aggregate_two_curves_band() {
    let agg = aggregate_curves(&[curve(&[(5, 0.4)]), curve(&[(5, 0.6)])]).unwrap();
    assert_abs_diff_eq!(agg.mean[0], 0.5, epsilon = 1e-15);
    let sd = (0.02f64).sqrt();
    let half = Z_95 * sd / 2f64.sqrt();
    let (lo, hi) = agg.bands.unwrap();
    assert_abs_diff_eq!(lo[0], 0.5 - half, epsilon = 1e-12);
    assert_abs_diff_eq!(hi[0], 0.5 + half, epsilon = 1e-12);
}

#[test]
fn aggregate_single_curve_has_no_bands() {
    let agg = aggregate_curves(&[curve(&[(5, 0.4), (6, 0.5)])]).unwrap();
    assert_eq!(agg.mean, vec![0.4, 0.5]);
    assert!(agg.bands.is_none());
    assert_eq!(agg.n_curves, 1);
}

#[test]
fn aggregate_rejects_mismatched_grids() {
    assert!(aggregate_curves(&[curve(&[(5, 0.4)]), curve(&[(6, 0.6)])]).is_err());
    assert!(aggregate_curves(&[]).is_err());
}

#[test]
fn curve_sizes_must_increase() {
    assert!(LearningCurve::from_pairs(&[(5, 0.1), (5, 0.2)]).is_err());
    assert!(LearningCurve::from_pairs(&[(6, 0.1), (5, 0.2)]).is_err());
}

#[test]
fn footnote_gains_are_exact() {
    let (active, passive) = footnote_curves();
    let lvm = last_vs_max_gain(&active, &passive).unwrap().unwrap();
    assert_eq!((lvm.active_size, lvm.reference_size), (4000, 6000));
    assert_abs_diff_eq!(lvm.fraction, 1.0 / 3.0, epsilon = 1e-12);
    let fvf = first_vs_final_gain(&active, &passive).unwrap().unwrap();
    assert_eq!((fvf.active_size, fvf.reference_size), (4000, 7000));
    assert_abs_diff_eq!(fvf.fraction, 3.0 / 7.0, epsilon = 1e-12);
}

#[test]
fn gains_absent_without_a_crossing() {
    let (_, passive) = footnote_curves();
    let below = curve(&[(1000, 0.5), (7000, 0.85)]);
    assert_eq!(gain_report(&below, &passive).unwrap(), GainReport::default());
    // equal curves never strictly exceed the reference
    assert_eq!(last_vs_max_gain(&passive, &passive).unwrap(), None);
    let monotone = curve(&[(1000, 0.7), (2000, 0.8), (3000, 0.85)]);
    assert_eq!(gain_report(&monotone, &monotone).unwrap(), GainReport::default());
}

#[test]
fn last_vs_max_uses_latest_upward_crossing() {
    let passive = curve(&[(100, 0.5), (400, 0.8)]);
    let active = curve(&[(100, 0.85), (200, 0.7), (300, 0.9)]);
    let g = last_vs_max_gain(&active, &passive).unwrap().unwrap();
    assert_eq!(g.active_size, 300);
}

#[test]
fn first_vs_final_at_first_point() {
    let passive = curve(&[(100, 0.5), (400, 0.6)]);
    let active = curve(&[(100, 0.65), (200, 0.7)]);
    let g = first_vs_final_gain(&active, &passive).unwrap().unwrap();
    assert_eq!(g.active_size, 100);
    assert_abs_diff_eq!(g.fraction, 0.75, epsilon = 1e-15);
}

#[test]
fn discounted_average_examples() {
    let c = curve(&[(1, 0.0), (2, 1.0)]);
    assert_abs_diff_eq!(discounted_average(&c, 0.5).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    let flat = curve(&[(1, 0.7), (2, 0.7), (3, 0.7)]);
    assert_abs_diff_eq!(discounted_average(&flat, 0.3).unwrap(), 0.7, epsilon = 1e-12);
    assert!(discounted_average(&c, 0.0).is_err());
    assert!(discounted_average(&c, 1.5).is_err());
}

#[test]
fn half_sampling_constant_trainer_has_zero_variance() {
    let ds = logistic_task(200, 3, 1).unwrap();
    let (labeled, holdout) = ds.examples.split_at(100);
    let est = half_sampling_variance(
        |_, _| Ok(fixed_model(0.3, 1.0)),
        labeled,
        holdout,
        Metric::Accuracy,
        5,
        9,
    )
    .unwrap();
    assert_eq!(est.variance, 0.0);
    assert_eq!(est.values.len(), 10);
}

#[test]
fn half_sampling_single_pair_is_two_sample_variance() {
    let ds = logistic_task(400, 3, 2).unwrap();
    let (labeled, holdout) = ds.examples.split_at(200);
    let train = |xs: &[Example], seed: u64| train_logistic(xs, 2, &TrainConfig::default().with_seed(seed));
    let est = half_sampling_variance(train, labeled, holdout, Metric::Accuracy, 1, 3).unwrap();
    let [a, b] = [est.values[0], est.values[1]];
    assert_abs_diff_eq!(est.variance, (a - b) * (a - b) / 2.0, epsilon = 1e-15);
}

#[test]
fn half_sampling_rejects_tiny_or_unsplittable_sets() {
    let ds = logistic_task(20, 2, 3).unwrap();
    let train = |_: &[Example], _: u64| Ok(fixed_model(0.0, 1.0));
    assert!(half_sampling_variance(train, &ds.examples[..3], &ds.examples, Metric::Accuracy, 2, 0).is_err());
    assert!(half_sampling_variance(train, &ds.examples, &ds.examples, Metric::Accuracy, 0, 0).is_err());
    let mut lopsided: Vec<Example> = (0..6).map(|i| point(i, 1.0, 0)).collect();
    lopsided.push(point(7, 1.0, 1));
    assert!(half_sampling_variance(train, &lopsided, &ds.examples, Metric::Accuracy, 2, 0).is_err());
}

fn sentence(id: u64, len: usize, domain: Domain) -> TokenSentence {
    let tokens = (0..len)
        .map(|i| Token {
            word: i as u32,
            category: TokenCategory::Plain,
        })
        .collect();
    TokenSentence::new(id, tokens, vec![false; len], domain).unwrap()
}

#[test]
fn batch_composition_three_to_one() {
    let batch: Vec<TokenSentence> = (0..1000)
        .map(|i| sentence(i, 5 + (i % 3) as usize, if i < 750 { Domain::A } else { Domain::B }))
        .collect();
    let c = batch_composition(&batch).unwrap();
    assert_eq!(c.size, 1000);
    assert_abs_diff_eq!(c.proportion_a, 0.75, epsilon = 1e-15);
    assert_abs_diff_eq!(c.proportion_b, 0.25, epsilon = 1e-15);
}

#[test]
fn batch_composition_degenerate_batches() {
    let c = batch_composition(&[sentence(1, 12, Domain::B)]).unwrap();
    assert_eq!(c.proportion_b, 1.0);
    assert_eq!(c.mean_length_b, Some(12.0));
    assert_eq!(c.mean_length_a, None);
    let c = batch_composition(&[sentence(1, 4, Domain::A), sentence(2, 6, Domain::A)]).unwrap();
    assert_eq!(c.proportion_b, 0.0);
    assert_eq!(c.mean_length_b, None);
    assert_eq!(c.mean_length, 5.0);
    assert!(batch_composition::<TokenSentence>(&[]).is_err());
}

fn arb_curve() -> impl Strategy<Value = Vec<(usize, f64)>> {
    prop::collection::vec((1usize..50, 0.0f64..1.0), 1..12).prop_map(|steps| {
        let mut size = 0;
        steps
            .into_iter()
            .map(|(d, v)| {
                size += d;
                (size, v)
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn gains_invariant_under_monotone_transform(a in arb_curve(), p in arb_curve()) {
        let f = |pts: &[(usize, f64)]| curve(&pts.iter().map(|&(n, v)| (n, v.powi(3) * 0.5 + 0.1)).collect::<Vec<_>>());
        prop_assert_eq!(
            gain_report(&curve(&a), &curve(&p)).unwrap(),
            gain_report(&f(&a), &f(&p)).unwrap()
        );
    }

    #[test]
    fn gains_invariant_under_size_scaling(a in arb_curve(), p in arb_curve(), c in 1usize..20) {
        let s = |pts: &[(usize, f64)]| curve(&pts.iter().map(|&(n, v)| (n * c, v)).collect::<Vec<_>>());
        let base = gain_report(&curve(&a), &curve(&p)).unwrap();
        let scaled = gain_report(&s(&a), &s(&p)).unwrap();
        for (x, y) in [(base.last_vs_max, scaled.last_vs_max), (base.first_vs_final, scaled.first_vs_final)] {
            prop_assert_eq!(x.is_some(), y.is_some());
            if let (Some(x), Some(y)) = (x, y) {
                prop_assert!((x.fraction - y.fraction).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn undiscounted_average_is_the_mean(pts in arb_curve()) {
        let c = curve(&pts);
        let mean = c.values().iter().sum::<f64>() / c.len() as f64;
        prop_assert!((discounted_average(&c, 1.0).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn mean_of_identical_curves_is_exact(pts in arb_curve(), n in 1usize..8) {
        let c = curve(&pts);
        let agg = aggregate_curves(&vec![c.clone(); n]).unwrap();
        prop_assert_eq!(agg.mean, c.values());
    }
}

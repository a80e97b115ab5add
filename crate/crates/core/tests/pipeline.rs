use std::collections::BTreeSet;

use ndarray::Axis;

use engage_eeg::eval::{cv_scores, evaluate_split, training_indices, CvDataset, CvPlan};
use engage_eeg::features::{band_power, fit_transform_split, Band, FeatureConfig, PcaTarget};
use engage_eeg::io::Stage;
use engage_eeg::models::{ClassifierKind, ModelConfig};
use engage_eeg::preprocess::{preprocess_epochs, PreprocessConfig};
use engage_eeg::signal::{Epoch, WindowMode};
use engage_eeg::synth::{generate_dataset, GeneratorSpec};

fn small_spec() -> GeneratorSpec {
    GeneratorSpec { n_ads: 20, epoch_seconds: 31.0, seed: 11, ..GeneratorSpec::default() }
}

fn max_abs_diff(a: &[Epoch], b: &[Epoch]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let s = (&x.stimulus - &y.stimulus).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let b = (&x.baseline - &y.baseline).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            s.max(b)
        })
        .fold(0.0, f64::max)
}

#[test]
fn nan_in_test_rows_cannot_reach_the_fit() {
    let data = generate_dataset(&small_spec()).unwrap();
    let pre = preprocess_epochs(data.epochs, &PreprocessConfig::default(), &[]).unwrap();
    let cv = CvDataset::from_epochs(&pre.epochs, WindowMode::F30, &FeatureConfig::default()).unwrap();
    let folds = cv.folds(&CvPlan::default(), 0).unwrap();
    let test = &folds[0];
    let train = training_indices(&folds, 0);
    let kinds = ClassifierKind::ALL;

    let mut poisoned = cv.raw.clone();
    for &i in test {
        poisoned.row_mut(i).fill(f64::NAN);
    }
    let clean = fit_transform_split(cv.raw.view(), &cv.epoch_ids, &train, test, PcaTarget::default()).unwrap();
    let dirty = fit_transform_split(poisoned.view(), &cv.epoch_ids, &train, test, PcaTarget::default()).unwrap();
    assert_eq!(clean.0, dirty.0, "training features must not depend on test rows");
    assert!(dirty.1.rows.iter().all(|v| v.is_nan()));
    evaluate_split(poisoned.view(), &cv.labels, &train, test, &FeatureConfig::default(), &ModelConfig::default(), &kinds, 1)
        .expect("NaN confined to test rows is tolerated");

    let mut poisoned = cv.raw.clone();
    poisoned.row_mut(train[0]).fill(f64::NAN);
    assert!(evaluate_split(poisoned.view(), &cv.labels, &train, test, &FeatureConfig::default(), &ModelConfig::default(), &kinds, 1)
        .is_err());
}

#[test]
fn blink_free_data_loses_no_epochs() {
    let spec = GeneratorSpec { artifact_rate: 0.0, ..small_spec() };
    let data = generate_dataset(&spec).unwrap();
    assert!(data.truth.blink_counts.values().all(|&c| c == 0));
    let pre = preprocess_epochs(data.epochs, &PreprocessConfig::default(), &[]).unwrap();
    assert!(pre.log.rejected_epochs.is_empty());
    assert_eq!(pre.epochs.len(), 20);
    for e in &pre.epochs {
        let peak = e.stimulus.iter().chain(e.baseline.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak <= 100.0, "{}: peak {peak}", e.id());
    }
}

#[test]
fn planted_spikes_are_exactly_the_rejections() {
    let spec = GeneratorSpec { spike_epochs: 5, n_ads: 30, ..small_spec() };
    let data = generate_dataset(&spec).unwrap();
    assert_eq!(data.truth.spiked_epochs.len(), 5);
    let pre = preprocess_epochs(data.epochs, &PreprocessConfig::default(), &[]).unwrap();
    let rejected: BTreeSet<String> = pre.log.rejected_epochs.iter().map(|r| r.id.clone()).collect();
    let spiked: BTreeSet<String> = data.truth.spiked_epochs.iter().cloned().collect();
    assert_eq!(rejected, spiked);
    assert_eq!(pre.epochs.len(), 25);
}

#[test]
fn preprocessing_twice_changes_nothing() {
    let data = generate_dataset(&small_spec()).unwrap();
    let config = PreprocessConfig::default();
    let once = preprocess_epochs(data.epochs, &config, &[]).unwrap();
    // a resumed run skips everything already applied
    let resumed = preprocess_epochs(once.epochs.clone(), &config, &once.log.applied_stages).unwrap();
    assert!(resumed.log.applied_stages.is_empty());
    assert_eq!(max_abs_diff(&once.epochs, &resumed.epochs), 0.0);
    // re-referencing to an already centred baseline is a no-op
    let rebaselined =
        preprocess_epochs(once.epochs.clone(), &config, &[Stage::NoisyRejection, Stage::Bandpass, Stage::Ica]).unwrap();
    assert!(max_abs_diff(&once.epochs, &rebaselined.epochs) <= 1e-6);
}

#[test]
fn planted_theta_shows_up_in_frontal_band_power() {
    let spec = GeneratorSpec { snr_decay_db_per_30s: 0.0, artifact_rate: 0.0, n_ads: 40, ..small_spec() };
    let data = generate_dataset(&spec).unwrap();
    let theta = [Band { name: "theta".into(), low_hz: 4.0, high_hz: 8.0 }];
    let frontal: Vec<usize> =
        spec.signature.channels.iter().map(|c| spec.channels.index_of(c).expect("signature channel")).collect();
    let (mut high, mut low) = (Vec::new(), Vec::new());
    for e in &data.epochs {
        let p = band_power(e.stimulus.view(), e.sample_rate_hz, &theta).unwrap();
        let mean: f64 = frontal.iter().map(|&c| 10f64.powf(p[c])).sum::<f64>() / frontal.len() as f64;
        if data.truth.labels[&e.ad_id].is_high() { high.push(mean) } else { low.push(mean) }
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(!high.is_empty() && !low.is_empty());
    assert!(avg(&high) > 1.5 * avg(&low), "high {} vs low {}", avg(&high), avg(&low));
}

#[test]
fn repeated_cv_is_deterministic() {
    let data = generate_dataset(&small_spec()).unwrap();
    let pre = preprocess_epochs(data.epochs, &PreprocessConfig::default(), &[]).unwrap();
    let cv = CvDataset::from_epochs(&pre.epochs, WindowMode::L10, &FeatureConfig::default()).unwrap();
    let plan = CvPlan { repetitions: 2, ..CvPlan::default() };
    let run = || cv_scores(&cv, &FeatureConfig::default(), &ModelConfig::default(), &plan, &ClassifierKind::ALL).unwrap();
    let a = run();
    assert_eq!(a, run());
    assert_eq!(a.len(), 3);
    assert!(a.iter().all(|scores| scores.len() == 10 && scores.iter().all(|f| (0.0..=1.0).contains(f))));
    assert_eq!(cv.raw.len_of(Axis(0)), 20);
}

//! Deterministic synthetic EEG with planted engagement labels.
//!
//! Every channel carries independent pink plus white noise. The pink part is
//! 1/f above a knee frequency and flat below it, as EEG spectra flatten
//! towards DC; without the knee the 1 s baseline mean is dominated by
//! sub-hertz drift. Epochs of high-engagement ads add a stimulus-locked theta
//! tone on four fronto-central channels. Its SNR is the tone power over the
//! background power in a band of `snr_bandwidth_hz` centred on the tone
//! frequency. The SNR holds
//! for the first 30 s and then falls linearly by `snr_decay_db_per_30s` per
//! 30 s. Blinks are Gaussian bumps with a frontal spatial pattern.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use ndarray::{s, Array2};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ChannelLayout, Epoch, Label};
use crate::stats::{aggregate_labels, RatingRecord, RatingTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub pink_rms_uv: f64,
    pub white_rms_uv: f64,
    /// Below this frequency the pink spectrum is flat.
    pub pink_knee_hz: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { pink_rms_uv: 8.0, white_rms_uv: 2.0, pink_knee_hz: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignatureSpec {
    pub freq_hz: f64,
    pub channels: Vec<String>,
    /// Standard deviation of a per-epoch random phase offset; 0 keeps the
    /// tone phase-locked to stimulus onset.
    pub phase_jitter_rad: f64,
    /// Length of the full-strength segment at stimulus onset.
    pub full_snr_seconds: f64,
    /// Width of the background band the SNR is measured against.
    pub snr_bandwidth_hz: f64,
}

impl Default for SignatureSpec {
    fn default() -> Self {
        Self {
            freq_hz: 6.0,
            channels: ["F3", "F4", "FC5", "FC6"].map(String::from).to_vec(),
            phase_jitter_rad: 0.0,
            full_snr_seconds: 30.0,
            snr_bandwidth_hz: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlinkSpec {
    pub min_amplitude_uv: f64,
    pub max_amplitude_uv: f64,
    /// Gaussian width (standard deviation) of one blink.
    pub width_seconds: f64,
}

impl Default for BlinkSpec {
    fn default() -> Self {
        Self { min_amplitude_uv: 60.0, max_amplitude_uv: 100.0, width_seconds: 0.08 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n_ads: usize,
    pub n_subjects: usize,
    pub channels: ChannelLayout,
    pub sample_rate_hz: f64,
    pub epoch_seconds: f64,
    pub baseline_seconds: f64,
    pub label_balance: f64,
    pub signal_snr_db: f64,
    pub snr_decay_db_per_30s: f64,
    /// Expected blinks per minute of recording.
    pub artifact_rate: f64,
    pub blink: BlinkSpec,
    pub noise: NoiseModel,
    pub signature: SignatureSpec,
    /// Fraction of epochs removed after generation (rounded to a count).
    pub drop_rate: f64,
    /// Epochs that get a single 500 µV spike, for fault-injection runs.
    pub spike_epochs: usize,
    pub n_annotators: usize,
    /// Chance that a given annotator rates a given ad.
    pub rating_coverage: f64,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            n_ads: 100,
            n_subjects: 1,
            channels: ChannelLayout::default(),
            sample_rate_hz: 128.0,
            epoch_seconds: 60.0,
            baseline_seconds: 1.0,
            label_balance: 0.5,
            signal_snr_db: 6.0,
            snr_decay_db_per_30s: 3.0,
            artifact_rate: 2.0,
            blink: BlinkSpec::default(),
            noise: NoiseModel::default(),
            signature: SignatureSpec::default(),
            drop_rate: 0.0,
            spike_epochs: 0,
            n_annotators: 23,
            rating_coverage: 0.8,
            seed: 42,
        }
    }
}

pub const SPIKE_UV: f64 = 500.0;

const FRONTAL_BLINK_WEIGHTS: [(&str, f64); 8] = [
    ("AF3", 1.0),
    ("AF4", 1.0),
    ("F7", 0.7),
    ("F8", 0.7),
    ("F3", 0.5),
    ("F4", 0.5),
    ("FC5", 0.25),
    ("FC6", 0.25),
];

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n_ads == 0 || self.n_subjects == 0 {
            return bad("n_ads and n_subjects must be positive".into());
        }
        if !(self.sample_rate_hz > 0.0) || !(self.epoch_seconds > 0.0) || !(self.baseline_seconds > 0.0) {
            return bad("sample_rate_hz, epoch_seconds and baseline_seconds must be positive".into());
        }
        if !(self.label_balance > 0.0 && self.label_balance < 1.0) {
            return bad(format!("label_balance must lie in (0, 1), got {}", self.label_balance));
        }
        for (name, v) in [
            ("signal_snr_db", self.signal_snr_db),
            ("snr_decay_db_per_30s", self.snr_decay_db_per_30s),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if !(self.artifact_rate >= 0.0) || !(self.noise.pink_rms_uv >= 0.0) || !(self.noise.white_rms_uv >= 0.0) {
            return bad("artifact_rate and noise levels must be non-negative".into());
        }
        if !(self.noise.pink_knee_hz > 0.0) || !(self.signature.snr_bandwidth_hz > 0.0) {
            return bad("pink_knee_hz and snr_bandwidth_hz must be positive".into());
        }
        if !(self.blink.min_amplitude_uv <= self.blink.max_amplitude_uv) || !(self.blink.width_seconds > 0.0) {
            return bad("blink amplitudes must be ordered and width positive".into());
        }
        if !(self.signature.freq_hz > 0.0 && self.signature.freq_hz < self.sample_rate_hz / 2.0) {
            return bad(format!("signature frequency {} Hz is outside (0, Nyquist)", self.signature.freq_hz));
        }
        for ch in &self.signature.channels {
            if self.channels.index_of(ch).is_none() {
                return bad(format!("signature channel {ch} is not in the layout"));
            }
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return bad(format!("drop_rate must lie in [0, 1), got {}", self.drop_rate));
        }
        if self.spike_epochs > self.surviving_epochs() {
            return bad(format!("spike_epochs {} exceeds the {} surviving epochs", self.spike_epochs, self.surviving_epochs()));
        }
        if self.n_annotators == 0 || !(self.rating_coverage > 0.0 && self.rating_coverage <= 1.0) {
            return bad("n_annotators must be positive and rating_coverage in (0, 1]".into());
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.n_ads * self.n_subjects
    }

    pub fn dropped_epochs(&self) -> usize {
        (self.drop_rate * self.total_epochs() as f64).round() as usize
    }

    pub fn surviving_epochs(&self) -> usize {
        self.total_epochs() - self.dropped_epochs()
    }

    pub fn stimulus_samples(&self) -> usize {
        (self.epoch_seconds * self.sample_rate_hz).round() as usize
    }

    pub fn baseline_samples(&self) -> usize {
        (self.baseline_seconds * self.sample_rate_hz).round() as usize
    }

    pub fn positive_count(&self) -> usize {
        ((self.label_balance * self.n_ads as f64).round() as usize).min(self.n_ads)
    }
}

pub fn ad_id(index: usize) -> String {
    format!("ad{:03}", index + 1)
}

pub fn subject_id(index: usize) -> String {
    format!("s{:02}", index + 1)
}

pub fn annotator_id(index: usize) -> String {
    format!("r{:02}", index + 1)
}

/// SplitMix64 finalizer over `(seed, parts...)`; used to give every epoch its
/// own independent stream.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(seed), |acc, p| mix(acc ^ mix(*p)))
}

const STREAM_LABELS: u64 = 1;
const STREAM_RATINGS: u64 = 2;
const STREAM_DROPS: u64 = 3;
const STREAM_SPIKES: u64 = 4;
const STREAM_EPOCH: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub labels: BTreeMap<String, Label>,
    pub dropped_epochs: Vec<String>,
    pub spiked_epochs: Vec<String>,
    pub blink_counts: BTreeMap<String, usize>,
    /// Tone amplitude during the full-strength segment.
    pub signature_amplitude_uv: f64,
}

#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub epochs: Vec<Epoch>,
    pub ratings: RatingTable,
    pub truth: GroundTruth,
}

/// Unit-variance pink noise: white Gaussian noise shaped by
/// `1/sqrt(max(f, knee))` in the frequency domain, DC removed.
pub fn pink_noise(n: usize, fs: f64, knee_hz: f64, rng: &mut impl Rng) -> Vec<f64> {
    if n < 2 {
        return vec![0.0; n];
    }
    let mut buf: Vec<Complex<f64>> = (0..n).map(|_| Complex::new(StandardNormal.sample(rng), 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    for k in 1..n {
        let f = k.min(n - k) as f64 * fs / n as f64;
        buf[k] /= f.max(knee_hz).sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    x.iter().map(|v| (v - mean) / sd).collect()
}

/// Expected background power (µV²) in the SNR reference band around the
/// tone, for a record of `n` samples.
pub fn background_band_power(spec: &GeneratorSpec, n: usize) -> f64 {
    let fs = spec.sample_rate_hz;
    let bin_width = spec.signature.snr_bandwidth_hz;
    let df = fs / n as f64;
    let (lo, hi) = (spec.signature.freq_hz - bin_width / 2.0, spec.signature.freq_hz + bin_width / 2.0);
    let (mut band, mut total) = (0.0, 0.0);
    for k in 1..=n / 2 {
        let f = k as f64 * df;
        let w = 1.0 / f.max(spec.noise.pink_knee_hz);
        total += w;
        if f >= lo && f < hi {
            band += w;
        }
    }
    let pink = spec.noise.pink_rms_uv.powi(2) * band / total;
    let white = spec.noise.white_rms_uv.powi(2) * bin_width / (fs / 2.0);
    pink + white
}

/// Tone amplitude for a target SNR in dB.
pub fn amplitude_for_snr(band_power: f64, snr_db: f64) -> f64 {
    (2.0 * band_power * 10f64.powf(snr_db / 10.0)).sqrt()
}

struct EpochPlan<'a> {
    spec: &'a GeneratorSpec,
    ad: usize,
    subject: usize,
    label: Label,
    spike: bool,
    band_power: f64,
}

fn generate_epoch(p: &EpochPlan) -> (Epoch, usize) {
    let spec = p.spec;
    let fs = spec.sample_rate_hz;
    let nb = spec.baseline_samples();
    let ns = spec.stimulus_samples();
    let n = nb + ns;
    let channels = spec.channels.count();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[STREAM_EPOCH, p.ad as u64, p.subject as u64]));

    let mut data = Array2::<f64>::zeros((channels, n));
    for mut row in data.rows_mut() {
        let pink = pink_noise(n, fs, spec.noise.pink_knee_hz, &mut rng);
        for (v, pk) in row.iter_mut().zip(&pink) {
            let white: f64 = StandardNormal.sample(&mut rng);
            *v = spec.noise.pink_rms_uv * pk + spec.noise.white_rms_uv * white;
        }
    }

    if p.label.is_high() {
        let phase = if spec.signature.phase_jitter_rad > 0.0 {
            Normal::new(0.0, spec.signature.phase_jitter_rad).expect("positive sd").sample(&mut rng)
        } else {
            0.0
        };
        let idx = spec.channels.indices_of(&spec.signature.channels.iter().map(String::as_str).collect::<Vec<_>>());
        for t in 0..ns {
            let secs = t as f64 / fs;
            let snr = spec.signal_snr_db
                - spec.snr_decay_db_per_30s * (secs - spec.signature.full_snr_seconds).max(0.0) / 30.0;
            let v = amplitude_for_snr(p.band_power, snr) * (2.0 * PI * spec.signature.freq_hz * secs + phase).sin();
            for &ch in &idx {
                data[[ch, nb + t]] += v;
            }
        }
    }

    let mut blinks = 0;
    if spec.artifact_rate > 0.0 {
        let minutes = n as f64 / fs / 60.0;
        blinks = Poisson::new(spec.artifact_rate * minutes).expect("positive rate").sample(&mut rng) as usize;
        let weights: Vec<(usize, f64)> = FRONTAL_BLINK_WEIGHTS
            .iter()
            .filter_map(|(name, w)| spec.channels.index_of(name).map(|i| (i, *w)))
            .collect();
        let width = spec.blink.width_seconds * fs;
        let reach = (5.0 * width).ceil() as isize;
        for _ in 0..blinks {
            let centre = rng.random_range(0..n) as isize;
            let amp = rng.random_range(spec.blink.min_amplitude_uv..=spec.blink.max_amplitude_uv);
            for t in (centre - reach).max(0)..(centre + reach).min(n as isize) {
                let bump = amp * (-0.5 * ((t - centre) as f64 / width).powi(2)).exp();
                for &(ch, w) in &weights {
                    data[[ch, t as usize]] += w * bump;
                }
            }
        }
    }

    if p.spike {
        let ch = rng.random_range(0..channels);
        let t = nb + rng.random_range(0..ns);
        data[[ch, t]] += SPIKE_UV;
    }

    let epoch = Epoch {
        layout: spec.channels.clone(),
        sample_rate_hz: fs,
        baseline: data.slice(s![.., ..nb]).to_owned(),
        stimulus: data.slice(s![.., nb..]).to_owned(),
        subject_id: subject_id(p.subject),
        ad_id: ad_id(p.ad),
        label: Some(p.label),
    };
    (epoch, blinks)
}

/// Planted labels: exactly `positive_count()` high ads, chosen by seed.
pub fn planted_labels(spec: &GeneratorSpec) -> Vec<Label> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[STREAM_LABELS]));
    let mut order: Vec<usize> = (0..spec.n_ads).collect();
    order.shuffle(&mut rng);
    let mut labels = vec![Label::Low; spec.n_ads];
    for &i in &order[..spec.positive_count()] {
        labels[i] = Label::High;
    }
    labels
}

/// Ratings whose grand-mean thresholding reproduces `labels` exactly.
pub fn generate_ratings(spec: &GeneratorSpec, labels: &[Label]) -> Result<RatingTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[STREAM_RATINGS]));
    let noise: Normal<f64> = Normal::new(0.0, 0.9).expect("valid sd");
    let mut records = Vec::new();
    for (a, label) in labels.iter().enumerate() {
        let centre = if label.is_high() { rng.random_range(2.2..3.6) } else { rng.random_range(0.4..1.8) };
        let mut raters: Vec<usize> = (0..spec.n_annotators).filter(|_| rng.random_bool(spec.rating_coverage)).collect();
        if raters.is_empty() {
            raters.push(rng.random_range(0..spec.n_annotators));
        }
        for r in raters {
            let engagement = (centre + noise.sample(&mut rng)).round().clamp(0.0, 4.0) as i8;
            let arousal_centre = 2.0 + 0.4 * (engagement as f64 - 2.0);
            let arousal = (arousal_centre + noise.sample(&mut rng)).round().clamp(0.0, 4.0) as i8;
            let valence = noise.sample(&mut rng).round().clamp(-2.0, 2.0) as i8;
            records.push(RatingRecord {
                annotator_id: annotator_id(r),
                ad_id: ad_id(a),
                engagement,
                valence: Some(valence),
                arousal: Some(arousal),
            });
        }
    }

    // nudge single ratings until thresholding agrees with the plan
    for _ in 0..100_000 {
        let table = RatingTable { records: records.clone() };
        let model = aggregate_labels(&table)?;
        let wrong: Vec<usize> = (0..labels.len()).filter(|&a| model.labels[&ad_id(a)] != labels[a]).collect();
        if wrong.is_empty() {
            return RatingTable::new(records);
        }
        for a in wrong {
            let id = ad_id(a);
            let up = labels[a].is_high();
            let candidates: Vec<usize> = (0..records.len())
                .filter(|&i| records[i].ad_id == id && if up { records[i].engagement < 4 } else { records[i].engagement > 0 })
                .collect();
            if let Some(&i) = candidates.choose(&mut rng) {
                records[i].engagement += if up { 1 } else { -1 };
            }
        }
    }
    Err(Error::InvalidSpec("could not construct ratings matching the planted labels".into()))
}

/// Generates the full dataset. Epochs are produced in parallel, each from
/// its own `(seed, ad, subject)` stream, so the result does not depend on
/// scheduling.
pub fn generate_dataset(spec: &GeneratorSpec) -> Result<GeneratedDataset> {
    spec.validate()?;
    let labels = planted_labels(spec);
    let ratings = generate_ratings(spec, &labels)?;

    let all: Vec<(usize, usize)> = (0..spec.n_subjects)
        .flat_map(|s| (0..spec.n_ads).map(move |a| (s, a)))
        .collect();
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[STREAM_DROPS])));
    let dropped: BTreeSet<usize> = order[..spec.dropped_epochs()].iter().copied().collect();
    let kept: Vec<usize> = (0..all.len()).filter(|i| !dropped.contains(i)).collect();
    let mut spike_order = kept.clone();
    spike_order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[STREAM_SPIKES])));
    let spiked: BTreeSet<usize> = spike_order[..spec.spike_epochs].iter().copied().collect();

    let band_power = background_band_power(spec, spec.baseline_samples() + spec.stimulus_samples());
    let generated: Vec<(Epoch, usize)> = kept
        .par_iter()
        .map(|&i| {
            let (subject, ad) = all[i];
            generate_epoch(&EpochPlan {
                spec,
                ad,
                subject,
                label: labels[ad],
                spike: spiked.contains(&i),
                band_power,
            })
        })
        .collect();

    let id_of = |i: usize| crate::signal::epoch_id(&subject_id(all[i].0), &ad_id(all[i].1));
    let truth = GroundTruth {
        labels: (0..spec.n_ads).map(|a| (ad_id(a), labels[a])).collect(),
        dropped_epochs: dropped.iter().map(|&i| id_of(i)).collect(),
        spiked_epochs: spiked.iter().map(|&i| id_of(i)).collect(),
        blink_counts: generated.iter().map(|(e, b)| (e.id(), *b)).collect(),
        signature_amplitude_uv: amplitude_for_snr(band_power, spec.signal_snr_db),
    };
    Ok(GeneratedDataset {
        epochs: generated.into_iter().map(|(e, _)| e).collect(),
        ratings,
        truth,
    })
}

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ica::IcaModel;
use crate::linalg::correlation;
use crate::signal::ChannelLayout;

/// Channels whose mean tracks ocular activity.
pub const FRONTAL_CHANNELS: [&str; 4] = ["AF3", "AF4", "F7", "F8"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RejectionCriteria {
    pub kurtosis_z_threshold: f64,
    pub frontal_corr_threshold: f64,
}

impl Default for RejectionCriteria {
    fn default() -> Self {
        Self {
            kurtosis_z_threshold: 3.0,
            frontal_corr_threshold: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactRejection {
    pub cleaned: Array2<f64>,
    /// Indices of zeroed components, ascending.
    pub rejected: Vec<usize>,
    /// Set when every component was rejected and only channel means remain.
    pub all_rejected: bool,
    pub kurtosis: Vec<f64>,
    pub kurtosis_z: Vec<f64>,
    pub frontal_corr: Vec<f64>,
}

/// Excess kurtosis `m4 / m2² - 3`; 0 for a constant series.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in x {
        let d2 = (v - mean) * (v - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if m2 == 0.0 {
        0.0
    } else {
        m4 / (m2 * m2) - 3.0
    }
}

/// Population z-scores; all zero when the values do not vary.
pub fn z_scores(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / sd).collect()
}

/// Zeroes components that are outliers in kurtosis across components, or
/// whose time course follows the mean of the frontal channels, and rebuilds
/// the channel data from the rest.
pub fn reject_artifact_components(
    model: &IcaModel,
    data: &Array2<f64>,
    layout: &ChannelLayout,
    criteria: &RejectionCriteria,
) -> ArtifactRejection {
    let sources = model.sources(data);
    let rows: Vec<Vec<f64>> = sources.rows().into_iter().map(|r| r.to_vec()).collect();

    let kurtosis: Vec<f64> = rows.iter().map(|r| excess_kurtosis(r)).collect();
    let kurtosis_z = z_scores(&kurtosis);

    let frontal = layout.indices_of(&FRONTAL_CHANNELS);
    let frontal_corr: Vec<f64> = if frontal.is_empty() {
        vec![0.0; rows.len()]
    } else {
        let n = data.ncols();
        let mut mean = vec![0.0; n];
        for &ch in &frontal {
            for (m, v) in mean.iter_mut().zip(data.row(ch)) {
                *m += v / frontal.len() as f64;
            }
        }
        rows.iter().map(|r| correlation(r, &mean).abs()).collect()
    };

    let rejected: Vec<usize> = (0..rows.len())
        .filter(|&j| {
            kurtosis_z[j] > criteria.kurtosis_z_threshold
                || frontal_corr[j] > criteria.frontal_corr_threshold
        })
        .collect();
    let keep: Vec<bool> = (0..rows.len()).map(|j| !rejected.contains(&j)).collect();
    let all_rejected = !rows.is_empty() && rejected.len() == rows.len();
    if all_rejected {
        log::warn!("every ICA component met a rejection criterion; only channel means remain");
    }

    ArtifactRejection {
        cleaned: model.reconstruct(&sources, &keep),
        rejected,
        all_rejected,
        kurtosis,
        kurtosis_z,
        frontal_corr,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::ica::{fit_ica, IcaParams};
    use ndarray::Axis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, n), || StandardNormal.sample(&mut rng))
    }

    fn blink_waveform(n: usize, fs: f64) -> Vec<f64> {
        let mut out = vec![0.0; n];
        let mut t0 = 1.5;
        while t0 < n as f64 / fs - 1.0 {
            for (i, v) in out.iter_mut().enumerate() {
                let dt = i as f64 / fs - t0;
                *v += 80.0 * (-0.5 * (dt / 0.08).powi(2)).exp();
            }
            t0 += 4.3;
        }
        out
    }

    fn blink_pattern(layout: &ChannelLayout) -> Vec<f64> {
        layout
            .names()
            .iter()
            .map(|n| match n.as_str() {
                "AF3" | "AF4" => 1.0,
                "F7" | "F8" => 0.7,
                "F3" | "F4" => 0.5,
                "FC5" | "FC6" => 0.25,
                _ => 0.05,
            })
            .collect()
    }

    #[test]
    fn kurtosis_of_known_distributions() {
        let g = gaussian(1, 200_000, 1);
        assert!(excess_kurtosis(g.row(0).as_slice().unwrap()).abs() < 0.05);
        // two-point distribution has excess kurtosis -2
        let two: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!((excess_kurtosis(&two) + 2.0).abs() < 1e-12);
        assert_eq!(excess_kurtosis(&[3.0; 10]), 0.0);
    }

    #[test]
    fn gaussian_components_are_kept() {
        let layout = ChannelLayout::default();
        let data = gaussian(14, 20_000, 7) * 10.0;
        let model = fit_ica(&data, &IcaParams { k: 14, seed: 3, max_iter: 50, tol: 1e-4 }).unwrap();
        let out = reject_artifact_components(&model, &data, &layout, &RejectionCriteria::default());
        // oracle: recompute z-scores of component kurtoses independently
        let s = model.sources(&data);
        let k: Vec<f64> = s.rows().into_iter().map(|r| excess_kurtosis(&r.to_vec())).collect();
        let z = z_scores(&k);
        assert!(z.iter().all(|v| *v <= 3.0));
        assert_eq!(out.rejected, Vec::<usize>::new());
        assert!(!out.all_rejected);
        let full = model.reconstruct(&s, &[true; 14]);
        let err = (&out.cleaned - &full).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert_eq!(err, 0.0);
        // full reconstruction recovers the input
        let back = (&full - &data).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(back < 1e-8);
    }

    #[test]
    fn planted_blink_is_rejected_and_removed() {
        let layout = ChannelLayout::default();
        let fs = 128.0;
        let n = 128 * 120;
        let blink = blink_waveform(n, fs);
        let pattern = blink_pattern(&layout);
        let template = Array2::from_shape_fn((14, n), |(c, t)| pattern[c] * blink[t]);
        let data = gaussian(14, n, 17) * 8.0 + &template;

        let model = fit_ica(&data, &IcaParams { k: 14, seed: 5, max_iter: 300, tol: 1e-5 }).unwrap();
        let out = reject_artifact_components(&model, &data, &layout, &RejectionCriteria::default());
        assert!(!out.rejected.is_empty());

        let shares = model.energy_shares(&template);
        let best = (0..shares.len()).max_by(|&a, &b| shares[a].total_cmp(&shares[b])).unwrap();
        assert!(shares[best] >= 0.8, "share {}", shares[best]);
        assert!(out.rejected.contains(&best));

        let af3 = layout.index_of("AF3").unwrap();
        let before = correlation(data.row(af3).as_slice().unwrap(), &blink);
        let after = correlation(&out.cleaned.row(af3).to_vec(), &blink);
        assert!(before > 0.5);
        assert!(after.abs() < 0.3, "after cleaning r = {after}");
    }

    #[test]
    fn rejecting_everything_leaves_channel_means() {
        let layout = ChannelLayout::default();
        let data = gaussian(14, 5000, 2) + 4.0;
        let model = fit_ica(&data, &IcaParams { k: 14, seed: 1, max_iter: 20, tol: 1e-4 }).unwrap();
        let criteria = RejectionCriteria { kurtosis_z_threshold: f64::NEG_INFINITY, frontal_corr_threshold: 0.7 };
        let out = reject_artifact_components(&model, &data, &layout, &criteria);
        assert!(out.all_rejected);
        let means = data.mean_axis(Axis(1)).unwrap();
        for (c, row) in out.cleaned.rows().into_iter().enumerate() {
            assert!(row.iter().all(|v| (v - means[c]).abs() < 1e-9));
        }
    }
}

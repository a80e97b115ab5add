//! Epoch windows to classifier inputs: channel-major vectorization (or
//! Welch band power), then PCA fitted on training rows only.

mod pca;
mod spectral;

pub use pca::{pca_fit, pca_transform, PcaModel, PcaTarget};
pub use spectral::{band_power, default_bands, welch_psd, Band, POWER_FLOOR, SEGMENT_SECONDS};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::segment_window;
use crate::signal::{Epoch, WindowMode};

/// Channel-major flattening: channel 0's samples, then channel 1's, ...
pub fn vectorize(window: ArrayView2<f64>) -> Array1<f64> {
    Array1::from_iter(window.rows().into_iter().flat_map(|r| r.to_vec()))
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: ArrayView1<f64>, channels: usize) -> Result<Array2<f64>> {
    if channels == 0 || v.len() % channels != 0 {
        return Err(Error::DimensionMismatch {
            expected: channels * (v.len() / channels.max(1)),
            actual: v.len(),
        });
    }
    Array2::from_shape_vec((channels, v.len() / channels), v.to_vec())
        .map_err(|e| Error::InvalidData(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    #[default]
    Time,
    Bandpower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub pca: PcaTarget,
    pub features: FeatureKind,
}

/// One row per epoch, before any fitted transform.
pub fn raw_features(epochs: &[Epoch], mode: WindowMode, kind: FeatureKind) -> Result<Array2<f64>> {
    let rows = epochs
        .par_iter()
        .map(|e| {
            let w = segment_window(e, mode)
                .map_err(|err| Error::InvalidData(format!("epoch {}: {err}", e.id())))?;
            match kind {
                FeatureKind::Time => Ok(vectorize(w.view())),
                FeatureKind::Bandpower => band_power(w.view(), e.sample_rate_hz, &default_bands()),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let d = rows.first().map_or(0, |r| r.len());
    let mut out = Array2::zeros((rows.len(), d));
    for (mut dst, src) in out.rows_mut().into_iter().zip(&rows) {
        if src.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: src.len() });
        }
        dst.assign(src);
    }
    Ok(out)
}

/// PCA plus a single global scale that gives the training scores unit total
/// variance. The scale is isotropic, so it changes no geometry; it only makes
/// the fixed `[1e-3, 1e3]` RBF width grid meaningful whatever the signal
/// amplitude units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTransform {
    pub pca: PcaModel,
    pub scale: f64,
}

impl FeatureTransform {
    pub fn fit(train: ArrayView2<f64>, target: PcaTarget) -> Result<Self> {
        let pca = pca_fit(train, target)?;
        let retained = pca.explained_variance.sum();
        let scale = if retained > 0.0 { 1.0 / retained.sqrt() } else { 1.0 };
        Ok(Self { pca, scale })
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(pca_transform(&self.pca, x)? * self.scale)
    }

    pub fn describe(&self) -> String {
        format!(
            "pca(k={}, explained={:.4}) * {:.6e}",
            self.pca.k,
            self.pca.explained_fraction(),
            self.scale
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Array2<f64>,
    pub epoch_ids: Vec<String>,
    pub transform_provenance: String,
}

/// Fits the transform on `train` rows of `raw` and returns the transformed
/// training and test matrices. Test rows never influence the fit.
pub fn fit_transform_split(
    raw: ArrayView2<f64>,
    ids: &[String],
    train: &[usize],
    test: &[usize],
    target: PcaTarget,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let train_x = raw.select(Axis(0), train);
    let transform = FeatureTransform::fit(train_x.view(), target)?;
    let describe = transform.describe();
    let build = |idx: &[usize], x: Array2<f64>| -> Result<FeatureMatrix> {
        Ok(FeatureMatrix {
            rows: transform.apply(x.view())?,
            epoch_ids: idx.iter().map(|&i| ids[i].clone()).collect(),
            transform_provenance: describe.clone(),
        })
    };
    Ok((build(train, train_x.clone())?, build(test, raw.select(Axis(0), test))?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn vectorize_is_channel_major() {
        assert_eq!(vectorize(array![[1.0, 2.0], [3.0, 4.0]].view()).to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vectorize(Array2::zeros((14, 3667)).view()).len(), 51338);
        assert_eq!(vectorize(Array2::zeros((14, 1280)).view()).len(), 17920);
    }

    #[test]
    fn transform_scores_have_unit_total_variance() {
        let x = Array2::from_shape_fn((12, 7), |(i, j)| ((i * 7 + j * 3) % 11) as f64 * 40.0);
        let t = FeatureTransform::fit(x.view(), PcaTarget::ExplainedFraction(0.95)).unwrap();
        let s = t.apply(x.view()).unwrap();
        let total: f64 = s
            .columns()
            .into_iter()
            .map(|c| {
                let m = c.mean().unwrap();
                c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 11.0
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn unvectorize_inverts_vectorize(ch in 1usize..6, n in 1usize..20, seed in 0u64..1000) {
            let w = Array2::from_shape_fn((ch, n), |(c, t)| (seed as f64 + c as f64 * 1.37 + t as f64 * 0.11).sin());
            let back = unvectorize(vectorize(w.view()).view(), ch).unwrap();
            prop_assert_eq!(back, w);
        }

        #[test]
        fn pca_cumulative_fraction_monotone(seed in 0u64..500) {
            use rand::SeedableRng;
            use rand_distr::{Distribution, StandardNormal};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_simple_fn((9, 5), || StandardNormal.sample(&mut rng));
            let m = pca_fit(x.view(), PcaTarget::K(5)).unwrap();
            let mut cum = 0.0;
            for v in m.explained_variance.iter() {
                prop_assert!(*v >= 0.0);
                let next = cum + v / m.total_variance;
                prop_assert!(next >= cum);
                cum = next;
            }
            prop_assert!((cum - 1.0).abs() < 1e-9);
            let s = pca_transform(&m, x.view()).unwrap();
            for c in s.columns() {
                prop_assert!(c.mean().unwrap().abs() <= 1e-9);
            }
        }

        #[test]
        fn band_power_ignores_sign_and_offset(seed in 0u64..200, offset in -50.0f64..50.0) {
            use rand::SeedableRng;
            use rand_distr::{Distribution, StandardNormal};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_simple_fn((2, 512), || StandardNormal.sample(&mut rng));
            let bands = default_bands();
            let p = band_power(x.view(), 128.0, &bands).unwrap();
            let neg = band_power((-&x).view(), 128.0, &bands).unwrap();
            let shifted = band_power((&x + offset).view(), 128.0, &bands).unwrap();
            for i in 0..p.len() {
                prop_assert!((p[i] - neg[i]).abs() <= 1e-6);
                prop_assert!((p[i] - shifted[i]).abs() <= 1e-6);
            }
        }
    }
}

//! FastICA with symmetric decorrelation and the log-cosh contrast
//! (`g = tanh`), on data whitened by an eigendecomposition of the channel
//! covariance.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{row_means, symmetric_decorrelation, symmetric_eigen};

/// Eigenvalues below this fraction of the largest count as rank loss.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcaModel {
    /// `[k × channels]`, maps centered channel data to unit-variance sources.
    pub unmixing: Array2<f64>,
    /// `[channels × k]`, maps sources back to channel space.
    pub mixing: Array2<f64>,
    /// `[k × channels]` whitening transform applied before rotation.
    pub whitening: Array2<f64>,
    /// Per-channel mean removed before whitening.
    pub mean: Array1<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl IcaModel {
    pub fn n_components(&self) -> usize {
        self.unmixing.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.unmixing.ncols()
    }

    /// Source time courses `[k × samples]` of `data`.
    pub fn sources(&self, data: &Array2<f64>) -> Array2<f64> {
        let centered = data - &self.mean.view().insert_axis(Axis(1));
        self.unmixing.dot(&centered)
    }

    /// Channel-space reconstruction from the components flagged in `keep`.
    pub fn reconstruct(&self, sources: &Array2<f64>, keep: &[bool]) -> Array2<f64> {
        let mut mixing = self.mixing.clone();
        for (j, &k) in keep.iter().enumerate() {
            if !k {
                mixing.column_mut(j).fill(0.0);
            }
        }
        mixing.dot(sources) + &self.mean.view().insert_axis(Axis(1))
    }

    /// Share of `template`'s whitened energy that lands in each component.
    /// `template` is a `[channels × samples]` contribution (e.g. a planted
    /// artifact); it is centered per channel first.
    pub fn energy_shares(&self, template: &Array2<f64>) -> Vec<f64> {
        let centered = template - &row_means(template).insert_axis(Axis(1));
        let projected = self.unmixing.dot(&centered);
        let energy: Vec<f64> = projected.rows().into_iter().map(|r| r.dot(&r)).collect();
        let total: f64 = energy.iter().sum();
        if total == 0.0 {
            return vec![0.0; energy.len()];
        }
        energy.iter().map(|e| e / total).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcaParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for IcaParams {
    fn default() -> Self {
        Self {
            k: 14,
            seed: 0,
            max_iter: 200,
            tol: 1e-4,
        }
    }
}

pub fn fit_ica(data: &Array2<f64>, params: &IcaParams) -> Result<IcaModel> {
    let (channels, n) = data.dim();
    let k = params.k;
    if k == 0 || k > channels {
        return Err(Error::InvalidConfig(format!(
            "ICA needs 1 <= k <= channels ({channels}), got k = {k}"
        )));
    }
    if n < 10 * channels {
        return Err(Error::TooFewSamples(format!(
            "ICA needs at least {} samples for {channels} channels, got {n}",
            10 * channels
        )));
    }

    let mean = row_means(data);
    let centered = data - &mean.view().insert_axis(Axis(1));
    let cov = centered.dot(&centered.t()) / n as f64;
    let (values, vectors) = symmetric_eigen(cov.view());
    let largest = values[0].max(0.0);
    let rank = values.iter().filter(|&&v| v > largest * RANK_TOL).count();
    if largest <= 0.0 || rank < k {
        return Err(Error::RankDeficient {
            rank: if largest <= 0.0 { 0 } else { rank },
            requested: k,
        });
    }

    let mut whitening = Array2::zeros((k, channels));
    let mut dewhitening = Array2::zeros((channels, k));
    for i in 0..k {
        let s = values[i].sqrt();
        whitening.row_mut(i).assign(&(&vectors.column(i) / s));
        dewhitening.column_mut(i).assign(&(&vectors.column(i) * s));
    }
    let z = whitening.dot(&centered);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let init = Array2::from_shape_simple_fn((k, k), || StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelation(&init);

    let mut converged = false;
    let mut iterations = 0;
    let mut g = Array2::<f64>::zeros((k, n));
    while iterations < params.max_iter {
        iterations += 1;
        ndarray::linalg::general_mat_mul(1.0, &w, &z, 0.0, &mut g);
        g.mapv_inplace(f64::tanh);
        // E[g'(wz)] with g' = 1 - tanh²
        let g_prime: Array1<f64> = g
            .rows()
            .into_iter()
            .map(|r| 1.0 - r.dot(&r) / n as f64)
            .collect();
        let mut next = g.dot(&z.t()) / n as f64;
        Zip::from(next.rows_mut())
            .and(w.rows())
            .and(&g_prime)
            .for_each(|mut row, w_row, &gp| row.scaled_add(-gp, &w_row));
        let next = symmetric_decorrelation(&next);

        let limit = next
            .rows()
            .into_iter()
            .zip(w.rows())
            .map(|(a, b)| (a.dot(&b).abs() - 1.0).abs())
            .fold(0.0f64, f64::max);
        w = next;
        if limit < params.tol {
            converged = true;
            break;
        }
    }

    Ok(IcaModel {
        unmixing: w.dot(&whitening),
        mixing: dewhitening.dot(&w.t()),
        whitening,
        mean,
        converged,
        iterations,
    })
}

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

/// Eigenvalues at or below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-10;

/// How many components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaTarget {
    ExplainedFraction(f64),
    K(usize),
}

impl Default for PcaTarget {
    fn default() -> Self {
        PcaTarget::ExplainedFraction(0.95)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `[k × d]`, orthonormal rows.
    pub components: Array2<f64>,
    /// Sample variance (n − 1 denominator) along each component, descending.
    pub explained_variance: Array1<f64>,
    /// Sum of all sample variances of the training data.
    pub total_variance: f64,
    pub k: usize,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn explained_fraction(&self) -> f64 {
        self.explained_variance.sum() / self.total_variance
    }

    /// Maps `[m × k]` scores back to the original `[m × d]` space.
    pub fn inverse_transform(&self, scores: &Array2<f64>) -> Array2<f64> {
        scores.dot(&self.components) + &self.mean.view().insert_axis(Axis(0))
    }
}

/// Mean-centered PCA. When `d > n` the eigenproblem is solved on the
/// `n × n` Gram matrix instead of the `d × d` covariance.
///
/// The number of components is capped at `n − 1` and at the numerical rank.
pub fn pca_fit(x: ArrayView2<f64>, target: PcaTarget) -> Result<PcaModel> {
    let (n, d) = x.dim();
    if n < 2 || d == 0 {
        return Err(Error::TooFewSamples(format!("PCA needs n >= 2 and d >= 1, got {n} x {d}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("PCA input contains non-finite values".into()));
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &x - &mean.view().insert_axis(Axis(0));
    let denom = (n - 1) as f64;

    let (values, directions) = if d <= n {
        let cov = centered.t().dot(&centered) / denom;
        symmetric_eigen(cov.view())
    } else {
        let gram = centered.dot(&centered.t()) / denom;
        let (values, u) = symmetric_eigen(gram.view());
        // v_i = Xcᵀ u_i / sqrt((n − 1) λ_i); columns with λ ≈ 0 are dropped below
        let mut v = centered.t().dot(&u);
        for (i, mut col) in v.axis_iter_mut(Axis(1)).enumerate() {
            let scale = (denom * values[i].max(0.0)).sqrt();
            if scale > 0.0 {
                col /= scale;
            }
        }
        (values, v)
    };

    let total_variance: f64 = values.iter().map(|v| v.max(0.0)).sum();
    if !(total_variance > 0.0) {
        return Err(Error::DegenerateData("total variance is zero".into()));
    }
    let rank = values.iter().filter(|&&v| v > values[0] * RANK_TOL).count();
    let available = rank.min(n - 1).min(d);

    let k = match target {
        PcaTarget::K(k) => {
            if k == 0 {
                return Err(Error::InvalidConfig("PCA k must be positive".into()));
            }
            if k > available {
                log::warn!("PCA k = {k} exceeds the {available} available components; using {available}");
            }
            k.min(available)
        }
        PcaTarget::ExplainedFraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "PCA explained_fraction must lie in (0, 1], got {f}"
                )));
            }
            let mut cum = 0.0;
            let mut k = available;
            for (i, v) in values.iter().take(available).enumerate() {
                cum += v;
                if cum / total_variance >= f - 1e-12 {
                    k = i + 1;
                    break;
                }
            }
            k
        }
    };

    let mut components = Array2::zeros((k, d));
    for i in 0..k {
        let col = directions.column(i);
        let pivot = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (j, v)| if v.abs() > bv.abs() { (j, *v) } else { (bi, bv) })
            .0;
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        components.row_mut(i).assign(&(&col * sign));
    }

    Ok(PcaModel {
        mean,
        components,
        explained_variance: values.slice(ndarray::s![..k]).mapv(|v| v.max(0.0)),
        total_variance,
        k,
    })
}

/// Projects centered rows onto the component rows.
pub fn pca_transform(model: &PcaModel, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), actual: x.ncols() });
    }
    let centered = &x - &model.mean.view().insert_axis(Axis(0));
    Ok(centered.dot(&model.components.t()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(&mut rng))
    }

    /// Cyclic Jacobi eigenvalues; independent of the library eigensolver.
    fn jacobi_eigenvalues(mut a: Array2<f64>) -> Vec<f64> {
        let n = a.nrows();
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[[i, j]].powi(2))
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[[p, q]].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[[k, p]], a[[k, q]]);
                        a[[k, p]] = c * akp - s * akq;
                        a[[k, q]] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                        a[[p, k]] = c * apk - s * aqk;
                        a[[q, k]] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    fn sample_cov(x: &Array2<f64>) -> Array2<f64> {
        let (n, d) = x.dim();
        let mut means = vec![0.0; d];
        for j in 0..d {
            means[j] = (0..n).map(|i| x[[i, j]]).sum::<f64>() / n as f64;
        }
        Array2::from_shape_fn((d, d), |(a, b)| {
            (0..n).map(|i| (x[[i, a]] - means[a]) * (x[[i, b]] - means[b])).sum::<f64>() / (n - 1) as f64
        })
    }

    #[test]
    fn line_data_is_one_component() {
        let x = Array2::from_shape_fn((20, 2), |(i, j)| i as f64 * if j == 0 { 1.0 } else { -2.0 } + 3.0);
        let m = pca_fit(x.view(), PcaTarget::ExplainedFraction(0.95)).unwrap();
        assert_eq!(m.k, 1);
        assert!((m.explained_fraction() - 1.0).abs() < 1e-9);
        // largest-magnitude entry is positive
        assert!(m.components[[0, 1]] > 0.0);
    }

    #[test]
    fn explained_variance_matches_jacobi_oracle() {
        for seed in 0..5 {
            let x = random(10, 5, seed);
            let m = pca_fit(x.view(), PcaTarget::K(5)).unwrap();
            let oracle = jacobi_eigenvalues(sample_cov(&x));
            for (a, b) in m.explained_variance.iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn gram_path_matches_oracle_and_is_orthonormal() {
        let x = random(6, 40, 3);
        let m = pca_fit(x.view(), PcaTarget::K(5)).unwrap();
        let oracle = jacobi_eigenvalues(sample_cov(&x));
        for (a, b) in m.explained_variance.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8);
        }
        let g = m.components.dot(&m.components.t());
        for ((i, j), v) in g.indexed_iter() {
            assert!((v - if i == j { 1.0 } else { 0.0 }).abs() <= 1e-8);
        }
        let back = m.inverse_transform(&pca_transform(&m, x.view()).unwrap());
        assert!((&back - &x).iter().all(|v| v.abs() <= 1e-8));
    }

    #[test]
    fn full_rank_reconstruction_and_score_variances() {
        let x = random(30, 6, 9);
        let m = pca_fit(x.view(), PcaTarget::K(6)).unwrap();
        let scores = pca_transform(&m, x.view()).unwrap();
        let back = m.inverse_transform(&scores);
        assert!((&back - &x).iter().all(|v| v.abs() <= 1e-8));
        for j in 0..m.k {
            let col = scores.column(j);
            let mean = col.mean().unwrap();
            assert!(mean.abs() <= 1e-9);
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 29.0;
            assert!((var - m.explained_variance[j]).abs() <= 1e-8);
        }
        let zero = pca_transform(&m, m.mean.view().insert_axis(Axis(0))).unwrap();
        assert!(zero.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn constant_data_is_degenerate() {
        let x = Array2::from_elem((5, 3), 2.0);
        assert!(matches!(pca_fit(x.view(), PcaTarget::default()), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn wrong_width_is_a_mismatch() {
        let m = pca_fit(array![[1.0, 2.0], [3.0, 1.0], [0.0, 0.5]].view(), PcaTarget::K(1)).unwrap();
        let err = pca_transform(&m, array![[1.0, 2.0, 3.0]].view()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, actual: 3 }));
    }

    #[test]
    fn k_is_capped_below_n() {
        let x = random(5, 50, 1);
        let m = pca_fit(x.view(), PcaTarget::ExplainedFraction(1.0)).unwrap();
        assert_eq!(m.k, 4);
        assert!((m.explained_fraction() - 1.0).abs() < 1e-9);
    }
}

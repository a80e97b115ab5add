//! Small dense linear-algebra helpers. Data lives in `ndarray`; symmetric
//! eigendecompositions and Cholesky solves go through `nalgebra`.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2, Axis};

pub(crate) fn to_nalgebra(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending. Eigenvectors
/// are the columns of the returned matrix.
pub(crate) fn symmetric_eigen(a: ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    // symmetrize to shed accumulated rounding asymmetry
    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Solves `a x = b` for symmetric positive definite `a`; `None` if `a` is
/// not numerically positive definite.
pub(crate) fn cholesky_solve(a: ArrayView2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let chol = to_nalgebra(a).cholesky()?;
    let x = chol.solve(&DVector::from_iterator(b.len(), b.iter().copied()));
    if x.iter().all(|v| v.is_finite()) {
        Some(Array1::from_iter(x.iter().copied()))
    } else {
        None
    }
}

/// `(W Wᵀ)^{-1/2} W`, the symmetric decorrelation used by FastICA.
pub(crate) fn symmetric_decorrelation(w: &Array2<f64>) -> Array2<f64> {
    let (values, vectors) = symmetric_eigen(w.dot(&w.t()).view());
    let inv_sqrt = values.mapv(|v| 1.0 / v.max(f64::MIN_POSITIVE).sqrt());
    let scaled = &vectors * &inv_sqrt.insert_axis(Axis(0));
    scaled.dot(&vectors.t()).dot(w)
}

/// Row means of `[rows × cols]` data.
pub(crate) fn row_means(x: &Array2<f64>) -> Array1<f64> {
    x.mean_axis(Axis(1)).unwrap_or_else(|| Array1::zeros(x.nrows()))
}

/// Pearson correlation of two equally long slices; 0 when either is constant.
pub(crate) fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigen_is_sorted_descending() {
        let a = array![[2.0, 1.0, 0.0], [1.0, 3.0, 0.0], [0.0, 0.0, 5.0]];
        let (vals, vecs) = symmetric_eigen(a.view());
        assert!(vals.windows(2).into_iter().all(|w| w[0] >= w[1]));
        assert!((vals[0] - 5.0).abs() < 1e-12);
        for k in 0..3 {
            let v = vecs.column(k);
            let av = a.dot(&v);
            for i in 0..3 {
                assert!((av[i] - vals[k] * v[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn decorrelation_yields_orthogonal_rows() {
        let w = array![[1.0, 0.4, 0.1], [0.2, 1.0, -0.3], [0.5, 0.5, 1.0]];
        let d = symmetric_decorrelation(&w);
        let g = d.dot(&d.t());
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky_solve(a.view(), &array![1.0, 1.0]).is_none());
        let spd = array![[4.0, 1.0], [1.0, 3.0]];
        let x = cholesky_solve(spd.view(), &array![1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-12);
    }
}

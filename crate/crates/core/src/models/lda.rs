use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;
use crate::signal::Label;

/// Fisher discriminant `w = Σ_w⁻¹ (μ₁ − μ₀)` with
/// `Σ_w = (1 − s)·S + s·(tr S / k)·I`, `S` the pooled within-class
/// covariance. The bias puts the boundary at the midpoint of the projected
/// class means, shifted by the log prior ratio.
pub fn lda_weights(x: ArrayView2<f64>, y: &[Label], shrinkage: f64) -> Result<(Array1<f64>, f64)> {
    let (n, k) = x.dim();
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(Error::InvalidConfig(format!("LDA shrinkage must lie in [0, 1], got {shrinkage}")));
    }
    let hi: Vec<usize> = (0..n).filter(|&i| y[i].is_high()).collect();
    let lo: Vec<usize> = (0..n).filter(|&i| !y[i].is_high()).collect();
    if hi.is_empty() || lo.is_empty() {
        return Err(Error::SingleClass);
    }
    if n <= 2 {
        return Err(Error::TooFewSamples(format!("LDA needs more than 2 samples, got {n}")));
    }
    let x1 = x.select(Axis(0), &hi);
    let x0 = x.select(Axis(0), &lo);
    let mu1 = x1.mean_axis(Axis(0)).expect("nonempty");
    let mu0 = x0.mean_axis(Axis(0)).expect("nonempty");
    let c1 = &x1 - &mu1.view().insert_axis(Axis(0));
    let c0 = &x0 - &mu0.view().insert_axis(Axis(0));
    let pooled = (c1.t().dot(&c1) + c0.t().dot(&c0)) / (n - 2) as f64;

    let trace = pooled.diag().sum();
    let sigma = &pooled * (1.0 - shrinkage) + &(Array2::<f64>::eye(k) * (shrinkage * trace / k as f64));
    let diff = &mu1 - &mu0;
    let w = cholesky_solve(sigma.view(), &diff).ok_or(Error::SingularCovariance)?;

    let prior1 = hi.len() as f64 / n as f64;
    let midpoint = 0.5 * (w.dot(&mu1) + w.dot(&mu0));
    let bias = -midpoint + (prior1 / (1.0 - prior1)).ln();
    Ok((w, bias))
}

//! Soft-margin SVM dual solved by SMO with second-order working-set
//! selection (Fan, Chen & Lin 2005) on a precomputed kernel matrix.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match *self {
            Kernel::Linear => a.dot(&b),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    /// `[a.rows × b.rows]` kernel matrix.
    pub fn matrix(&self, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
        let dots = a.dot(&b.t());
        match *self {
            Kernel::Linear => dots,
            Kernel::Rbf { gamma } => {
                let na: Vec<f64> = a.rows().into_iter().map(|r| r.dot(&r)).collect();
                let nb: Vec<f64> = b.rows().into_iter().map(|r| r.dot(&r)).collect();
                Array2::from_shape_fn(dots.dim(), |(i, j)| {
                    (-gamma * (na[i] + nb[j] - 2.0 * dots[[i, j]]).max(0.0)).exp()
                })
            }
        }
    }
}

/// Squared distances between rows, for building RBF kernels at many widths.
pub fn squared_distances(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let dots = a.dot(&b.t());
    let na: Vec<f64> = a.rows().into_iter().map(|r| r.dot(&r)).collect();
    let nb: Vec<f64> = b.rows().into_iter().map(|r| r.dot(&r)).collect();
    Array2::from_shape_fn(dots.dim(), |(i, j)| (na[i] + nb[j] - 2.0 * dots[[i, j]]).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SmoSettings {
    fn default() -> Self {
        Self { tol: 1e-3, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Array1<f64>,
    /// Decision function is `Σ αᵢ yᵢ K(xᵢ, x) − rho`.
    pub rho: f64,
    /// `Σα − ½ αᵀQα`, the maximized dual objective.
    pub dual_objective: f64,
    /// Maximal KKT violation `m(α) − M(α)` at exit.
    pub kkt_violation: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves `max Σα − ½ αᵀQα` s.t. `0 ≤ α ≤ c`, `yᵀα = 0`, with
/// `Q = (y yᵀ) ∘ K`. `y` holds ±1. Ties in working-set selection go to the
/// lowest index.
pub fn smo_solve(k: ArrayView2<f64>, y: &[f64], c: f64, settings: &SmoSettings) -> Result<DualSolution> {
    let n = y.len();
    if k.dim() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, actual: k.nrows() });
    }
    if !(c > 0.0) {
        return Err(Error::InvalidConfig(format!("SVM cost must be positive, got {c}")));
    }
    if !y.iter().any(|v| *v > 0.0) || !y.iter().any(|v| *v < 0.0) {
        return Err(Error::SingleClass);
    }
    let q = |i: usize, j: usize| y[i] * y[j] * k[[i, j]];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let is_up = |a: f64, yi: f64| if yi > 0.0 { a < c } else { a > 0.0 };
    let is_low = |a: f64, yi: f64| if yi > 0.0 { a > 0.0 } else { a < c };

    let mut iterations = 0;
    let mut converged = false;
    let mut gap;
    loop {
        // i: maximal violating index in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if is_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        // j: second-order choice in I_low; also tracks M(α)
        let mut gmin = f64::INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                if !is_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                if v < gmin {
                    gmin = v;
                }
                let b = gmax + y[t] * grad[t];
                if b > 0.0 {
                    let a = k[[i, i]] + k[[t, t]] - 2.0 * k[[i, t]];
                    let a = if a > 0.0 { a } else { TAU };
                    let obj = -(b * b) / a;
                    if obj < best {
                        best = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        gap = gmax - gmin;
        if gap < settings.tol || i_sel.is_none() || j_sel.is_none() {
            converged = true;
            break;
        }
        if iterations >= settings.max_iter {
            break;
        }
        iterations += 1;
        let (i, j) = (i_sel.unwrap(), j_sel.unwrap());
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // bias from free vectors, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { 0.5 * (ub + lb) };

    // Σα − ½αᵀQα = −½ Σ αᵢ (Gᵢ − 1)
    let dual_objective = -0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    if !converged {
        log::warn!("SMO stopped after {iterations} iterations with KKT gap {gap:.3e}");
    }
    Ok(DualSolution {
        alpha: Array1::from(alpha),
        rho,
        dual_objective,
        kkt_violation: gap.max(0.0),
        iterations,
        converged,
    })
}

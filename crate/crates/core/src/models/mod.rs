//! LDA, linear SVM and RBF SVM classifiers with inner-CV grid search over
//! the SVM cost and RBF width.

mod lda;
mod svm;

pub use lda::lda_weights;
pub use svm::{smo_solve, squared_distances, DualSolution, Kernel, SmoSettings};

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{f1_score, stratified_kfold, training_indices};
use crate::signal::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Lda,
    Lsvm,
    Rsvm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [ClassifierKind::Lda, ClassifierKind::Lsvm, ClassifierKind::Rsvm];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Lda => "lda",
            ClassifierKind::Lsvm => "lsvm",
            ClassifierKind::Rsvm => "rsvm",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ClassifierKind::Lda => "LDA",
            ClassifierKind::Lsvm => "LSVM",
            ClassifierKind::Rsvm => "RSVM",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lda" => Ok(ClassifierKind::Lda),
            "lsvm" => Ok(ClassifierKind::Lsvm),
            "rsvm" => Ok(ClassifierKind::Rsvm),
            _ => Err(Error::InvalidConfig(format!(
                "unknown classifier '{s}'; valid options: lda, lsvm, rsvm"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub c: f64,
    /// RBF width; carried but unused by the linear kernel and LDA.
    pub gamma: f64,
    pub shrinkage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Decision {
    Linear {
        weights: Array1<f64>,
        bias: f64,
    },
    Kernel {
        kernel: Kernel,
        support_vectors: Array2<f64>,
        /// `αᵢ yᵢ` per support vector.
        dual_coef: Array1<f64>,
        rho: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmDiagnostics {
    pub dual_objective: f64,
    pub kkt_violation: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ClassifierKind,
    pub params: HyperParams,
    pub decision: Decision,
    pub n_features: usize,
    pub n_train: usize,
    pub seed: u64,
    pub svm: Option<SvmDiagnostics>,
}

fn check_rows(x: ArrayView2<f64>, y: &[Label]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    Ok(())
}

pub fn lda_fit(x: ArrayView2<f64>, y: &[Label], shrinkage: f64) -> Result<TrainedModel> {
    check_rows(x, y)?;
    let (weights, bias) = lda_weights(x, y, shrinkage)?;
    Ok(TrainedModel {
        kind: ClassifierKind::Lda,
        params: HyperParams { c: 1.0, gamma: 1.0, shrinkage },
        decision: Decision::Linear { weights, bias },
        n_features: x.ncols(),
        n_train: x.nrows(),
        seed: 0,
        svm: None,
    })
}

fn signed(y: &[Label]) -> Vec<f64> {
    y.iter().map(|l| l.signed()).collect()
}

pub fn svm_fit(
    x: ArrayView2<f64>,
    y: &[Label],
    kernel: Kernel,
    c: f64,
    settings: &SmoSettings,
) -> Result<TrainedModel> {
    check_rows(x, y)?;
    let ys = signed(y);
    let k = kernel.matrix(x, x);
    let sol = smo_solve(k.view(), &ys, c, settings)?;
    let sv: Vec<usize> = (0..ys.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
    let (kind, gamma) = match kernel {
        Kernel::Linear => (ClassifierKind::Lsvm, 1.0),
        Kernel::Rbf { gamma } => (ClassifierKind::Rsvm, gamma),
    };
    Ok(TrainedModel {
        kind,
        params: HyperParams { c, gamma, shrinkage: 0.0 },
        decision: Decision::Kernel {
            kernel,
            support_vectors: x.select(Axis(0), &sv),
            dual_coef: sv.iter().map(|&i| sol.alpha[i] * ys[i]).collect(),
            rho: sol.rho,
        },
        n_features: x.ncols(),
        n_train: x.nrows(),
        seed: 0,
        svm: Some(SvmDiagnostics {
            dual_objective: sol.dual_objective,
            kkt_violation: sol.kkt_violation,
            iterations: sol.iterations,
            converged: sol.converged,
        }),
    })
}

fn label_of(score: f64) -> Label {
    Label::from_bool(score >= 0.0)
}

/// Raw decision values and their labels; a score of exactly 0 is high.
pub fn predict(model: &TrainedModel, x: ArrayView2<f64>) -> Result<(Vec<Label>, Array1<f64>)> {
    if x.ncols() != model.n_features {
        return Err(Error::DimensionMismatch { expected: model.n_features, actual: x.ncols() });
    }
    let scores = match &model.decision {
        Decision::Linear { weights, bias } => x.dot(weights) + *bias,
        Decision::Kernel { kernel, support_vectors, dual_coef, rho } => {
            kernel.matrix(x, support_vectors.view()).dot(dual_coef) - *rho
        }
    };
    Ok((scores.iter().map(|&s| label_of(s)).collect(), scores))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points_per_axis: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { min: 1e-3, max: 1e3, points_per_axis: 7 }
    }
}

impl GridSpec {
    /// Log-spaced values, rounded to 12 significant digits so decade grids
    /// hit the exact literals `1e-3, 1e-2, ...`.
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.min > 0.0 && self.max >= self.min) || self.points_per_axis == 0 {
            return Err(Error::InvalidConfig(format!(
                "grid needs 0 < min <= max and at least one point, got {self:?}"
            )));
        }
        if self.points_per_axis == 1 {
            return Ok(vec![self.min]);
        }
        let (a, b) = (self.min.log10(), self.max.log10());
        let step = (b - a) / (self.points_per_axis - 1) as f64;
        Ok((0..self.points_per_axis)
            .map(|i| {
                let v = 10f64.powf(a + step * i as f64);
                format!("{v:.11e}").parse().expect("formatted float parses")
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Restricts evaluation to one classifier; all three when absent.
    pub classifier: Option<ClassifierKind>,
    pub grid: GridSpec,
    pub lda_shrinkage: f64,
    pub svm: SmoSettings,
    pub inner_folds: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            classifier: None,
            grid: GridSpec::default(),
            lda_shrinkage: 1e-3,
            svm: SmoSettings::default(),
            inner_folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub c: f64,
    pub gamma: Option<f64>,
    pub mean_f1: f64,
}

/// Every grid point with its inner-CV mean F1, in visiting order
/// (C ascending, then gamma ascending).
pub fn grid_scores(
    x: ArrayView2<f64>,
    y: &[Label],
    kind: ClassifierKind,
    grid: &[f64],
    inner_k: usize,
    seed: u64,
    settings: &SmoSettings,
) -> Result<Vec<GridPoint>> {
    check_rows(x, y)?;
    let high = y.iter().filter(|l| l.is_high()).count();
    if y.len() < inner_k || high < inner_k || y.len() - high < inner_k {
        return Err(Error::TooFewSamples(format!(
            "grid search with {inner_k} inner folds needs {inner_k} samples per class, got {high} high / {} low",
            y.len() - high
        )));
    }
    let gammas: Vec<Option<f64>> = match kind {
        ClassifierKind::Lsvm => vec![None],
        ClassifierKind::Rsvm => grid.iter().map(|&g| Some(g)).collect(),
        ClassifierKind::Lda => {
            return Err(Error::InvalidConfig("LDA has no grid-searched parameters".into()))
        }
    };
    let folds = stratified_kfold(y, inner_k, seed)?;
    let ys = signed(y);
    let mut f1 = vec![vec![0.0; gammas.len()]; grid.len()];
    for (f, test) in folds.iter().enumerate() {
        let train = training_indices(&folds, f);
        let xtr = x.select(Axis(0), &train);
        let xte = x.select(Axis(0), test);
        let ytr: Vec<f64> = train.iter().map(|&i| ys[i]).collect();
        let yte: Vec<Label> = test.iter().map(|&i| y[i]).collect();
        let (dtr, dte) = match kind {
            ClassifierKind::Lsvm => (xtr.dot(&xtr.t()), xte.dot(&xtr.t())),
            _ => (squared_distances(xtr.view(), xtr.view()), squared_distances(xte.view(), xtr.view())),
        };
        for (gi, gamma) in gammas.iter().enumerate() {
            let (ktr, kte) = match gamma {
                None => (dtr.clone(), dte.clone()),
                Some(g) => (dtr.mapv(|d| (-g * d).exp()), dte.mapv(|d| (-g * d).exp())),
            };
            for (ci, &c) in grid.iter().enumerate() {
                let sol = smo_solve(ktr.view(), &ytr, c, settings)?;
                let coef: Array1<f64> = sol.alpha.iter().zip(&ytr).map(|(a, y)| a * y).collect();
                let pred: Vec<Label> = (kte.dot(&coef) - sol.rho).iter().map(|&s| label_of(s)).collect();
                f1[ci][gi] += f1_score(&yte, &pred)? / inner_k as f64;
            }
        }
    }
    let mut out = Vec::with_capacity(grid.len() * gammas.len());
    for (ci, &c) in grid.iter().enumerate() {
        for (gi, gamma) in gammas.iter().enumerate() {
            out.push(GridPoint { c, gamma: *gamma, mean_f1: f1[ci][gi] });
        }
    }
    Ok(out)
}

/// Argmax of inner-CV mean F1; ties go to the smaller C, then smaller gamma.
pub fn grid_search(
    x: ArrayView2<f64>,
    y: &[Label],
    kind: ClassifierKind,
    grid: &[f64],
    inner_k: usize,
    seed: u64,
    settings: &SmoSettings,
) -> Result<HyperParams> {
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let points = grid_scores(x, y, kind, &sorted, inner_k, seed, settings)?;
    let mut best = &points[0];
    for p in &points[1..] {
        if p.mean_f1 > best.mean_f1 {
            best = p;
        }
    }
    Ok(HyperParams { c: best.c, gamma: best.gamma.unwrap_or(1.0), shrinkage: 0.0 })
}

/// Fits one classifier as configured, running the inner grid search for
/// the SVMs.
pub fn fit_classifier(
    kind: ClassifierKind,
    x: ArrayView2<f64>,
    y: &[Label],
    config: &ModelConfig,
    seed: u64,
) -> Result<TrainedModel> {
    let mut model = match kind {
        ClassifierKind::Lda => lda_fit(x, y, config.lda_shrinkage)?,
        ClassifierKind::Lsvm | ClassifierKind::Rsvm => {
            let grid = config.grid.values()?;
            let p = grid_search(x, y, kind, &grid, config.inner_folds, seed, &config.svm)?;
            let kernel = if kind == ClassifierKind::Rsvm { Kernel::Rbf { gamma: p.gamma } } else { Kernel::Linear };
            svm_fit(x, y, kernel, p.c, &config.svm)?
        }
    };
    model.seed = seed;
    Ok(model)
}

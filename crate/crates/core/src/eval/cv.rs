use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{grouped_kfold, stratified_kfold, training_indices, Grouping};
use super::metrics::f1_score;
use crate::error::{Error, Result};
use crate::features::{raw_features, FeatureConfig, FeatureTransform};
use crate::models::{fit_classifier, predict, ClassifierKind, ModelConfig};
use crate::signal::{Epoch, Label, WindowMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvPlan {
    pub repetitions: usize,
    pub folds: usize,
    pub base_seed: u64,
    pub grouping: Grouping,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self { repetitions: 10, folds: 5, base_seed: 42, grouping: Grouping::Epoch }
    }
}

impl CvPlan {
    pub fn runs(&self) -> usize {
        self.repetitions * self.folds
    }

    /// Seed for the outer folds of repetition `r`.
    pub fn fold_seed(&self, r: usize) -> u64 {
        self.base_seed.wrapping_add(r as u64)
    }

    /// Seed for the inner grid search of outer fold `f` in repetition `r`.
    pub fn inner_seed(&self, r: usize, f: usize) -> u64 {
        self.fold_seed(r).wrapping_mul(1000).wrapping_add(f as u64)
    }
}

/// Raw (untransformed) feature rows with their labels and grouping keys.
#[derive(Debug, Clone)]
pub struct CvDataset {
    pub raw: Array2<f64>,
    pub labels: Vec<Label>,
    pub epoch_ids: Vec<String>,
    pub ad_ids: Vec<String>,
    pub subject_ids: Vec<String>,
}

impl CvDataset {
    pub fn from_epochs(epochs: &[Epoch], mode: WindowMode, features: &FeatureConfig) -> Result<Self> {
        let labels = epochs
            .iter()
            .map(|e| e.label.ok_or_else(|| Error::InvalidData(format!("epoch {} has no label", e.id()))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            raw: raw_features(epochs, mode, features.features)?,
            labels,
            epoch_ids: epochs.iter().map(Epoch::id).collect(),
            ad_ids: epochs.iter().map(|e| e.ad_id.clone()).collect(),
            subject_ids: epochs.iter().map(|e| e.subject_id.clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn folds(&self, plan: &CvPlan, repetition: usize) -> Result<Vec<Vec<usize>>> {
        let seed = plan.fold_seed(repetition);
        match plan.grouping {
            Grouping::Epoch => stratified_kfold(&self.labels, plan.folds, seed),
            Grouping::GroupByAd => grouped_kfold(&self.ad_ids, &self.labels, plan.folds, seed),
            Grouping::GroupBySubject => grouped_kfold(&self.subject_ids, &self.labels, plan.folds, seed),
        }
    }
}

/// Fits the feature transform and each classifier on `train` rows only and
/// returns the held-out F1 per classifier. Nothing in `test` rows is read
/// until prediction.
pub fn evaluate_split(
    raw: ArrayView2<f64>,
    labels: &[Label],
    train: &[usize],
    test: &[usize],
    features: &FeatureConfig,
    models: &ModelConfig,
    kinds: &[ClassifierKind],
    seed: u64,
) -> Result<Vec<f64>> {
    let xtr = raw.select(Axis(0), train);
    let transform = FeatureTransform::fit(xtr.view(), features.pca)?;
    let ftr = transform.apply(xtr.view())?;
    let fte = transform.apply(raw.select(Axis(0), test).view())?;
    let ytr: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
    let yte: Vec<Label> = test.iter().map(|&i| labels[i]).collect();
    kinds
        .iter()
        .map(|&kind| {
            let model = fit_classifier(kind, ftr.view(), &ytr, models, seed)?;
            let (pred, _) = predict(&model, fte.view())?;
            f1_score(&yte, &pred)
        })
        .collect()
}

/// Per-run F1 for each classifier in `kinds`, ordered by (repetition, fold).
/// Runs execute in parallel; the PCA of each split is shared by all
/// classifiers.
pub fn cv_scores(
    data: &CvDataset,
    features: &FeatureConfig,
    models: &ModelConfig,
    plan: &CvPlan,
    kinds: &[ClassifierKind],
) -> Result<Vec<Vec<f64>>> {
    if plan.repetitions == 0 || plan.folds < 2 {
        return Err(Error::InvalidConfig(format!(
            "cross-validation needs repetitions >= 1 and folds >= 2, got {} x {}",
            plan.repetitions, plan.folds
        )));
    }
    let splits: Vec<(usize, Vec<Vec<usize>>)> = (0..plan.repetitions)
        .map(|r| Ok((r, data.folds(plan, r)?)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..plan.repetitions)
        .flat_map(|r| (0..plan.folds).map(move |f| (r, f)))
        .collect();
    let per_run: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(r, f)| {
            let folds = &splits[r].1;
            let train = training_indices(folds, f);
            evaluate_split(data.raw.view(), &data.labels, &train, &folds[f], features, models, kinds, plan.inner_seed(r, f))
                .map_err(|e| Error::InvalidData(format!("repetition {r}, fold {f}: {e}")))
        })
        .collect::<Result<_>>()?;
    Ok((0..kinds.len()).map(|k| per_run.iter().map(|run| run[k]).collect()).collect())
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classifier: ClassifierKind,
    pub window: WindowMode,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub per_run: Vec<f64>,
    /// Carried once at the top of the results file rather than per cell.
    #[serde(skip, default)]
    pub config_fingerprint: String,
}

impl EvaluationReport {
    pub fn new(classifier: ClassifierKind, window: WindowMode, per_run: Vec<f64>, fingerprint: &str) -> Self {
        let (f1_mean, f1_std) = mean_std(&per_run);
        Self {
            classifier,
            window,
            f1_mean,
            f1_std,
            per_run,
            config_fingerprint: fingerprint.to_string(),
        }
    }
}

pub fn run_repeated_cv(
    data: &CvDataset,
    window: WindowMode,
    kind: ClassifierKind,
    features: &FeatureConfig,
    models: &ModelConfig,
    plan: &CvPlan,
) -> Result<EvaluationReport> {
    let scores = cv_scores(data, features, models, plan, &[kind])?;
    Ok(EvaluationReport::new(kind, window, scores.into_iter().next().unwrap_or_default(), ""))
}

/// Reports for `kinds × {F30, L30, L10}`, rows by classifier, columns by
/// window.
pub fn experiment_matrix(
    epochs: &[Epoch],
    kinds: &[ClassifierKind],
    features: &FeatureConfig,
    models: &ModelConfig,
    plan: &CvPlan,
    fingerprint: &str,
) -> Result<Vec<EvaluationReport>> {
    let mut by_window = Vec::with_capacity(WindowMode::ALL.len());
    for mode in WindowMode::ALL {
        let data = CvDataset::from_epochs(epochs, mode, features)?;
        let scores = cv_scores(&data, features, models, plan, kinds)
            .map_err(|e| Error::InvalidData(format!("window {mode}: {e}")))?;
        by_window.push(scores);
    }
    let mut out = Vec::with_capacity(kinds.len() * WindowMode::ALL.len());
    for (k, &kind) in kinds.iter().enumerate() {
        for (w, mode) in WindowMode::ALL.into_iter().enumerate() {
            out.push(EvaluationReport::new(kind, mode, by_window[w][k].clone(), fingerprint));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    #[test]
    fn seeds_follow_repetition() {
        let plan = CvPlan { base_seed: 7, ..CvPlan::default() };
        assert_eq!(plan.fold_seed(3), 10);
        assert_eq!(plan.runs(), 50);
    }
}

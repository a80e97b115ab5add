//! Signal conditioning, applied in this order:
//! noisy-epoch screening → band-pass → ICA artifact removal → baseline
//! subtraction. Windowing happens later, at feature extraction.

mod artifacts;
mod epochs;
mod filter;
mod ica;

pub use artifacts::{
    excess_kurtosis, reject_artifact_components, z_scores, ArtifactRejection, RejectionCriteria,
    FRONTAL_CHANNELS,
};
pub use epochs::{
    baseline_subtract, detect_noisy_epoch, noisy_reason, segment_window, NoisyThresholds,
};
pub use filter::{bandpass_filter, design_bandpass, BandpassSpec, Biquad, PAD_SECONDS};
pub use ica::{fit_ica, IcaModel, IcaParams};

use std::collections::BTreeMap;

use ndarray::{s, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Stage;
use crate::linalg::row_means;
use crate::signal::Epoch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcaConfig {
    pub enabled: bool,
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    /// Fit on every `decim`-th sample; cleaning always uses all samples.
    pub decim: usize,
    pub kurtosis_z_threshold: f64,
    pub frontal_corr_threshold: f64,
}

impl Default for IcaConfig {
    fn default() -> Self {
        let params = IcaParams::default();
        let criteria = RejectionCriteria::default();
        Self {
            enabled: true,
            k: params.k,
            seed: params.seed,
            max_iter: params.max_iter,
            tol: params.tol,
            decim: 1,
            kurtosis_z_threshold: criteria.kurtosis_z_threshold,
            frontal_corr_threshold: criteria.frontal_corr_threshold,
        }
    }
}

impl IcaConfig {
    pub fn params(&self) -> IcaParams {
        IcaParams {
            k: self.k,
            seed: self.seed,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }

    pub fn criteria(&self) -> RejectionCriteria {
        RejectionCriteria {
            kurtosis_z_threshold: self.kurtosis_z_threshold,
            frontal_corr_threshold: self.frontal_corr_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub bandpass: BandpassSpec,
    pub ica: IcaConfig,
    pub noisy: NoisyThresholds,
}

impl PreprocessConfig {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        self.bandpass.validate(sample_rate_hz)?;
        if self.ica.enabled && (self.ica.k == 0 || self.ica.decim == 0 || self.ica.max_iter == 0) {
            return Err(Error::InvalidConfig(
                "ica.k, ica.decim and ica.max_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedEpoch {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectIcaLog {
    pub subject_id: String,
    pub n_epochs: usize,
    pub rejected_components: Vec<usize>,
    pub all_rejected: bool,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PreprocessLog {
    pub rejected_epochs: Vec<RejectedEpoch>,
    pub ica: Vec<SubjectIcaLog>,
    /// Stages that were already applied to the input and were skipped.
    pub skipped_stages: Vec<Stage>,
    pub applied_stages: Vec<Stage>,
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub epochs: Vec<Epoch>,
    pub log: PreprocessLog,
}

/// Runs every stage not listed in `already_applied`. ICA is fitted per
/// subject on the concatenation of that subject's surviving epochs.
///
/// The baseline stage references both windows to the baseline mean, so a
/// second pass over the output is a no-op.
pub fn preprocess_epochs(
    epochs: Vec<Epoch>,
    config: &PreprocessConfig,
    already_applied: &[Stage],
) -> Result<Preprocessed> {
    let mut log = PreprocessLog::default();
    let run = |stage: Stage, log: &mut PreprocessLog| {
        if already_applied.contains(&stage) {
            log.skipped_stages.push(stage);
            false
        } else {
            log.applied_stages.push(stage);
            true
        }
    };
    if let Some(first) = epochs.first() {
        config.validate(first.sample_rate_hz)?;
    }

    let mut epochs = epochs;
    if run(Stage::NoisyRejection, &mut log) {
        let reasons: Vec<Option<String>> =
            epochs.par_iter().map(|e| noisy_reason(e, &config.noisy)).collect();
        let mut kept = Vec::with_capacity(epochs.len());
        for (e, reason) in epochs.into_iter().zip(reasons) {
            match reason {
                Some(reason) => log.rejected_epochs.push(RejectedEpoch { id: e.id(), reason }),
                None => kept.push(e),
            }
        }
        epochs = kept;
    }

    if run(Stage::Bandpass, &mut log) {
        epochs = epochs
            .par_iter()
            .map(|e| {
                let filtered = bandpass_filter(&e.concatenated(), &config.bandpass, e.sample_rate_hz)
                    .map_err(|err| stage_error("bandpass", e, err))?;
                Ok(e.with_concatenated(&filtered))
            })
            .collect::<Result<Vec<_>>>()?;
    }

    if config.ica.enabled && run(Stage::Ica, &mut log) {
        let (cleaned, subject_logs) = ica_clean_by_subject(epochs, &config.ica)?;
        epochs = cleaned;
        log.ica = subject_logs;
    }

    if run(Stage::Baseline, &mut log) {
        epochs = epochs
            .par_iter()
            .map(|e| {
                let mut out = baseline_subtract(e).map_err(|err| stage_error("baseline", e, err))?;
                let means = row_means(&out.baseline).insert_axis(Axis(1));
                out.baseline -= &means;
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
    }

    Ok(Preprocessed { epochs, log })
}

fn stage_error(stage: &str, epoch: &Epoch, err: Error) -> Error {
    Error::InvalidData(format!("{stage} failed on epoch {}: {err}", epoch.id()))
}

fn ica_clean_by_subject(
    epochs: Vec<Epoch>,
    config: &IcaConfig,
) -> Result<(Vec<Epoch>, Vec<SubjectIcaLog>)> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, e) in epochs.iter().enumerate() {
        groups.entry(e.subject_id.clone()).or_default().push(i);
    }
    let groups: Vec<(String, Vec<usize>)> = groups.into_iter().collect();

    let results = groups
        .par_iter()
        .map(|(subject, idx)| {
            let segments: Vec<_> = idx.iter().map(|&i| epochs[i].concatenated()).collect();
            let views: Vec<_> = segments.iter().map(|m| m.view()).collect();
            let joined = ndarray::concatenate(Axis(1), &views)
                .map_err(|e| Error::InvalidData(format!("subject {subject}: {e}")))?;
            let fit_data = if config.decim > 1 {
                joined.slice(s![.., ..;config.decim]).to_owned()
            } else {
                joined.clone()
            };
            let model = fit_ica(&fit_data, &config.params()).map_err(|e| {
                Error::InvalidData(format!("ICA failed for subject {subject}: {e}"))
            })?;
            let layout = &epochs[idx[0]].layout;
            let outcome = reject_artifact_components(&model, &joined, layout, &config.criteria());

            let mut offset = 0;
            let mut cleaned = Vec::with_capacity(idx.len());
            for (&i, seg) in idx.iter().zip(&segments) {
                let part = outcome.cleaned.slice(s![.., offset..offset + seg.ncols()]).to_owned();
                offset += seg.ncols();
                cleaned.push((i, epochs[i].with_concatenated(&part)));
            }
            let entry = SubjectIcaLog {
                subject_id: subject.clone(),
                n_epochs: idx.len(),
                rejected_components: outcome.rejected,
                all_rejected: outcome.all_rejected,
                converged: model.converged,
                iterations: model.iterations,
            };
            Ok((cleaned, entry))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut slots: Vec<Option<Epoch>> = vec![None; epochs.len()];
    let mut logs = Vec::with_capacity(results.len());
    for (cleaned, entry) in results {
        for (i, e) in cleaned {
            slots[i] = Some(e);
        }
        logs.push(entry);
    }
    Ok((slots.into_iter().map(|e| e.expect("every epoch belongs to a subject")).collect(), logs))
}

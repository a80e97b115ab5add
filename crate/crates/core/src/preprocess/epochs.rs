use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::row_means;
use crate::signal::{Epoch, WindowMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoisyThresholds {
    pub amp_threshold_uv: f64,
    pub flatline_threshold_uv: f64,
}

impl Default for NoisyThresholds {
    fn default() -> Self {
        Self {
            amp_threshold_uv: 300.0,
            flatline_threshold_uv: 0.01,
        }
    }
}

/// Subtracts each channel's baseline mean from its stimulus samples. The
/// baseline window itself is left untouched.
pub fn baseline_subtract(epoch: &Epoch) -> Result<Epoch> {
    if epoch.baseline_samples() == 0 {
        return Err(Error::EmptyBaseline);
    }
    let means = row_means(&epoch.baseline);
    Ok(Epoch {
        stimulus: &epoch.stimulus - &means.insert_axis(Axis(1)),
        ..epoch.clone()
    })
}

/// Why an epoch counts as noisy, if it does.
pub fn noisy_reason(epoch: &Epoch, thresholds: &NoisyThresholds) -> Option<String> {
    for (ch, row) in epoch.stimulus.rows().into_iter().enumerate() {
        let (lo, hi) = row
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let p2p = hi - lo;
        let name = &epoch.layout.names()[ch.min(epoch.layout.count() - 1)];
        if !p2p.is_finite() || p2p > thresholds.amp_threshold_uv {
            return Some(format!("{name}: peak-to-peak {p2p:.3} uV exceeds {}", thresholds.amp_threshold_uv));
        }
        if p2p < thresholds.flatline_threshold_uv {
            return Some(format!("{name}: peak-to-peak {p2p:.3} uV below flatline {}", thresholds.flatline_threshold_uv));
        }
    }
    None
}

/// True iff some channel's stimulus peak-to-peak is above the amplitude
/// threshold or below the flatline threshold.
pub fn detect_noisy_epoch(epoch: &Epoch, thresholds: &NoisyThresholds) -> bool {
    noisy_reason(epoch, thresholds).is_some()
}

/// The `[channels × mode.sample_count()]` slice of the stimulus period.
pub fn segment_window(epoch: &Epoch, mode: WindowMode) -> Result<Array2<f64>> {
    let needed = mode.sample_count();
    let available = epoch.stimulus_samples();
    if available < needed {
        return Err(Error::TooShort { needed, available });
    }
    let start = if mode.from_start() { 0 } else { available - needed };
    Ok(epoch.stimulus.slice(s![.., start..start + needed]).to_owned())
}

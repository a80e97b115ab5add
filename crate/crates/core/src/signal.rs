//! Domain types shared by every stage: channel layouts, continuous
//! recordings, per-ad epochs, binary engagement labels and the temporal
//! window modes used for feature extraction.
//!
//! All matrices are `[channels × samples]` in microvolts, rows in layout
//! order.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 14 electrodes of the consumer headset, in canonical order.
pub const DEFAULT_CHANNELS: [&str; 14] = [
    "AF3", "F7", "F3", "FC5", "T7", "P7", "O1", "O2", "P8", "T8", "FC6", "F4", "F8", "AF4",
];

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 128.0;

/// Ordered, unique channel names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ChannelLayout {
    names: Vec<String>,
}

impl ChannelLayout {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::InvalidData("channel layout is empty".into()));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(Error::InvalidData("empty channel name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidData(format!("duplicate channel name {name}")));
            }
        }
        Ok(Self { names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn count(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Indices of whichever of `names` are present, in the order given.
    pub fn indices_of(&self, names: &[&str]) -> Vec<usize> {
        names.iter().filter_map(|n| self.index_of(n)).collect()
    }
}

impl Default for ChannelLayout {
    fn default() -> Self {
        Self {
            names: DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl TryFrom<Vec<String>> for ChannelLayout {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        ChannelLayout::new(names)
    }
}

impl From<ChannelLayout> for Vec<String> {
    fn from(layout: ChannelLayout) -> Self {
        layout.names
    }
}

/// Binary engagement label: high = 1, low = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Low,
    High,
}

impl Label {
    pub fn from_bool(high: bool) -> Self {
        if high {
            Label::High
        } else {
            Label::Low
        }
    }

    pub fn is_high(self) -> bool {
        self == Label::High
    }

    /// `+1.0` for high, `-1.0` for low.
    pub fn signed(self) -> f64 {
        if self.is_high() {
            1.0
        } else {
            -1.0
        }
    }
}

impl From<Label> for u8 {
    fn from(label: Label) -> u8 {
        label.is_high() as u8
    }
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::Low),
            1 => Ok(Label::High),
            other => Err(Error::InvalidData(format!("label must be 0 or 1, got {other}"))),
        }
    }
}

/// A continuous multi-channel recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub layout: ChannelLayout,
    pub sample_rate_hz: f64,
    pub data: Array2<f64>,
    pub subject_id: String,
}

impl Recording {
    pub fn new(
        layout: ChannelLayout,
        sample_rate_hz: f64,
        data: Array2<f64>,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        if data.nrows() != layout.count() {
            return Err(Error::DimensionMismatch {
                expected: layout.count(),
                actual: data.nrows(),
            });
        }
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::InvalidData(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            let (ch, idx) = (bad / data.ncols(), bad % data.ncols());
            return Err(Error::InvalidData(format!(
                "recording contains non-finite value at ({ch},{idx})"
            )));
        }
        Ok(Self {
            layout,
            sample_rate_hz,
            data,
            subject_id: subject_id.into(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    /// Cut one ad-viewing epoch starting at `onset` (stimulus sample index),
    /// with a baseline of `round(baseline_seconds × rate)` samples before it.
    pub fn cut_epoch(
        &self,
        onset: usize,
        stimulus_samples: usize,
        baseline_seconds: f64,
        ad_id: impl Into<String>,
    ) -> Result<Epoch> {
        let b = (baseline_seconds * self.sample_rate_hz).round() as usize;
        if onset < b {
            return Err(Error::TooShort {
                needed: b,
                available: onset,
            });
        }
        let end = onset + stimulus_samples;
        if end > self.n_samples() {
            return Err(Error::TooShort {
                needed: end,
                available: self.n_samples(),
            });
        }
        Ok(Epoch {
            layout: self.layout.clone(),
            sample_rate_hz: self.sample_rate_hz,
            baseline: self.data.slice(s![.., onset - b..onset]).to_owned(),
            stimulus: self.data.slice(s![.., onset..end]).to_owned(),
            subject_id: self.subject_id.clone(),
            ad_id: ad_id.into(),
            label: None,
        })
    }
}

/// One subject viewing one ad: a 1 s pre-stimulus baseline plus the
/// stimulus period.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub layout: ChannelLayout,
    pub sample_rate_hz: f64,
    pub baseline: Array2<f64>,
    pub stimulus: Array2<f64>,
    pub subject_id: String,
    pub ad_id: String,
    pub label: Option<Label>,
}

impl Epoch {
    /// Identifier used for file names and manifests.
    pub fn id(&self) -> String {
        epoch_id(&self.subject_id, &self.ad_id)
    }

    pub fn baseline_samples(&self) -> usize {
        self.baseline.ncols()
    }

    pub fn stimulus_samples(&self) -> usize {
        self.stimulus.ncols()
    }

    /// Baseline followed by stimulus as one continuous segment.
    pub fn concatenated(&self) -> Array2<f64> {
        ndarray::concatenate(ndarray::Axis(1), &[self.baseline.view(), self.stimulus.view()])
            .expect("baseline and stimulus share a row count")
    }

    /// Inverse of [`Epoch::concatenated`]: replaces both windows from a
    /// segment of the same total length.
    pub fn with_concatenated(&self, data: &Array2<f64>) -> Epoch {
        let b = self.baseline_samples();
        Epoch {
            baseline: data.slice(s![.., ..b]).to_owned(),
            stimulus: data.slice(s![.., b..]).to_owned(),
            ..self.clone()
        }
    }
}

pub fn epoch_id(subject_id: &str, ad_id: &str) -> String {
    format!("{subject_id}_{ad_id}")
}

/// Every invariant violation of `epoch`; empty when well formed.
pub fn validate_epoch(epoch: &Epoch) -> Vec<String> {
    let mut violations = Vec::new();
    let channels = epoch.layout.count();

    if !(epoch.sample_rate_hz > 0.0) || !epoch.sample_rate_hz.is_finite() {
        violations.push(format!(
            "sample_rate_hz must be positive, got {}",
            epoch.sample_rate_hz
        ));
    }
    for (field, m) in [("baseline", &epoch.baseline), ("stimulus", &epoch.stimulus)] {
        if m.nrows() != channels {
            violations.push(format!(
                "{field} row count mismatch: {} rows for {channels}-channel layout",
                m.nrows()
            ));
        }
        if let Some((idx, _)) = m.indexed_iter().find(|(_, v)| !v.is_finite()) {
            violations.push(format!(
                "{field} contains non-finite value at ({},{})",
                idx.0, idx.1
            ));
        }
    }
    if epoch.sample_rate_hz > 0.0 {
        let expected = (epoch.sample_rate_hz).round() as usize;
        let b = epoch.baseline_samples();
        if b.abs_diff(expected) > 1 {
            violations.push(format!(
                "baseline has {b} samples, expected about {expected} (1 s)"
            ));
        }
    }
    if epoch.subject_id.is_empty() {
        violations.push("subject_id is empty".into());
    }
    if epoch.ad_id.is_empty() {
        violations.push("ad_id is empty".into());
    }
    violations
}

/// Temporal window of the stimulus period fed to feature extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WindowMode {
    /// First 3667 samples.
    F30,
    /// Last 3667 samples.
    L30,
    /// Last 1280 samples.
    L10,
}

impl WindowMode {
    pub const ALL: [WindowMode; 3] = [WindowMode::F30, WindowMode::L30, WindowMode::L10];

    pub fn sample_count(self) -> usize {
        match self {
            WindowMode::F30 | WindowMode::L30 => 3667,
            WindowMode::L10 => 1280,
        }
    }

    pub fn from_start(self) -> bool {
        matches!(self, WindowMode::F30)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WindowMode::F30 => "F30",
            WindowMode::L30 => "L30",
            WindowMode::L10 => "L10",
        }
    }
}

impl fmt::Display for WindowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WindowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F30" => Ok(WindowMode::F30),
            "L30" => Ok(WindowMode::L30),
            "L10" => Ok(WindowMode::L10),
            other => Err(Error::InvalidConfig(format!(
                "unknown window {other:?}; valid options: F30, L30, L10"
            ))),
        }
    }
}

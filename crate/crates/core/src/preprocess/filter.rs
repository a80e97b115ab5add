//! Butterworth band-pass as a cascade of second-order sections, applied
//! forward and backward for zero phase.
//!
//! The band-pass is a high-pass of the given order at `low_hz` followed by a
//! low-pass of the same order at `high_hz`, both designed by the bilinear
//! transform with frequency prewarping. Each pass starts from steady-state
//! section states scaled by the first sample, and the signal is extended by
//! odd reflection (up to 3 s per side) which is discarded afterwards.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reflection length on each side, in seconds.
pub const PAD_SECONDS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandpassSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub zero_phase: bool,
}

impl Default for BandpassSpec {
    fn default() -> Self {
        Self {
            low_hz: 0.1,
            high_hz: 45.0,
            order: 4,
            zero_phase: true,
        }
    }
}

impl BandpassSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        let nyquist = sample_rate_hz / 2.0;
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz && self.high_hz < nyquist) {
            return Err(Error::InvalidBand(format!(
                "need 0 < low ({}) < high ({}) < Nyquist ({nyquist})",
                self.low_hz, self.high_hz
            )));
        }
        if self.order == 0 {
            return Err(Error::InvalidBand("filter order must be positive".into()));
        }
        Ok(())
    }
}

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Transposed direct-form-II state for a constant input `u` in steady state.
    fn steady_state(&self, u: f64) -> [f64; 2] {
        let y = self.dc_gain() * u;
        let z2 = self.b[2] * u - self.a[1] * y;
        let z1 = self.b[1] * u - self.a[0] * y + z2;
        [z1, z2]
    }

    /// Frequency response magnitude at `freq_hz`.
    pub fn gain(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let num = (self.b[0] + self.b[1] * c1 + self.b[2] * c2, -self.b[1] * s1 - self.b[2] * s2);
        let den = (1.0 + self.a[0] * c1 + self.a[1] * c2, -self.a[0] * s1 - self.a[1] * s2);
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Low,
    High,
}

/// Butterworth sections of `order` at cutoff `fc` (bilinear, prewarped).
fn butterworth(order: usize, fc: f64, fs: f64, kind: Kind) -> Vec<Biquad> {
    let k = (std::f64::consts::PI * fc / fs).tan();
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for m in 0..order / 2 {
        let theta = std::f64::consts::PI * (2 * m + 1) as f64 / (2 * order) as f64;
        let q = 1.0 / (2.0 * theta.sin());
        let norm = 1.0 / (1.0 + k / q + k * k);
        let a = [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm];
        let b = match kind {
            Kind::Low => {
                let b0 = k * k * norm;
                [b0, 2.0 * b0, b0]
            }
            Kind::High => [norm, -2.0 * norm, norm],
        };
        sections.push(Biquad { b, a });
    }
    if order % 2 == 1 {
        let norm = 1.0 / (1.0 + k);
        let a = [(k - 1.0) * norm, 0.0];
        let b = match kind {
            Kind::Low => [k * norm, k * norm, 0.0],
            Kind::High => [norm, -norm, 0.0],
        };
        sections.push(Biquad { b, a });
    }
    sections
}

/// Sections of the band-pass described by `spec`.
pub fn design_bandpass(spec: &BandpassSpec, sample_rate_hz: f64) -> Result<Vec<Biquad>> {
    spec.validate(sample_rate_hz)?;
    let mut sos = butterworth(spec.order, spec.low_hz, sample_rate_hz, Kind::High);
    sos.extend(butterworth(spec.order, spec.high_hz, sample_rate_hz, Kind::Low));
    Ok(sos)
}

/// Runs the cascade over `x` in place, starting from steady state for `x[0]`.
fn run_cascade(sos: &[Biquad], x: &mut [f64]) {
    let Some(&first) = x.first() else { return };
    let mut level = first;
    for s in sos {
        let [mut z1, mut z2] = s.steady_state(level);
        level *= s.dc_gain();
        for v in x.iter_mut() {
            let input = *v;
            let y = s.b[0] * input + z1;
            z1 = s.b[1] * input - s.a[0] * y + z2;
            z2 = s.b[2] * input - s.a[1] * y;
            *v = y;
        }
    }
}

fn filter_channel(sos: &[Biquad], x: ArrayView1<f64>, pad: usize, zero_phase: bool) -> Array1<f64> {
    let n = x.len();
    // odd reflection about each end point
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend(x.iter().copied());
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    run_cascade(sos, &mut ext);
    if zero_phase {
        ext.reverse();
        run_cascade(sos, &mut ext);
        ext.reverse();
    }
    Array1::from(ext[pad..pad + n].to_vec())
}

/// Band-pass filters every row of `signal` (`[channels × samples]`).
pub fn bandpass_filter(
    signal: &Array2<f64>,
    spec: &BandpassSpec,
    sample_rate_hz: f64,
) -> Result<Array2<f64>> {
    let sos = design_bandpass(spec, sample_rate_hz)?;
    let n = signal.ncols();
    let needed = 3 * spec.order + 1;
    if n < needed {
        return Err(Error::TooShort {
            needed,
            available: n,
        });
    }
    let pad = ((PAD_SECONDS * sample_rate_hz).round() as usize).min(n - 1);
    let mut out = Array2::zeros(signal.raw_dim());
    for (row_in, mut row_out) in signal.rows().into_iter().zip(out.rows_mut()) {
        row_out.assign(&filter_channel(&sos, row_in, pad, spec.zero_phase));
    }
    Ok(out)
}

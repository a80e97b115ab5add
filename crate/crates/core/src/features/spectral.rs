//! Welch band power: 2 s Hann segments, 50% overlap, per-segment mean
//! removal, one-sided density scaling.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const POWER_FLOOR: f64 = 1e-12;
pub const SEGMENT_SECONDS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    pub low_hz: f64,
    pub high_hz: f64,
}

impl Band {
    pub fn new(name: &str, low_hz: f64, high_hz: f64) -> Self {
        Self { name: name.into(), low_hz, high_hz }
    }
}

pub fn default_bands() -> Vec<Band> {
    vec![
        Band::new("theta", 4.0, 8.0),
        Band::new("alpha", 8.0, 13.0),
        Band::new("beta", 13.0, 30.0),
        Band::new("gamma", 30.0, 45.0),
    ]
}

/// One-sided Welch PSD of a single series. Returns `(frequencies, psd)`.
pub fn welch_psd(x: ArrayView1<f64>, sample_rate_hz: f64) -> Result<(Array1<f64>, Array1<f64>)> {
    let nperseg = (SEGMENT_SECONDS * sample_rate_hz).round() as usize;
    if x.len() < nperseg || nperseg < 2 {
        return Err(Error::TooShort { needed: nperseg.max(2), available: x.len() });
    }
    let step = nperseg / 2;
    let window: Vec<f64> = (0..nperseg)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / nperseg as f64).cos())
        .collect();
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(nperseg);
    let n_freq = nperseg / 2 + 1;
    let mut psd = Array1::<f64>::zeros(n_freq);
    let mut buf = vec![Complex::new(0.0, 0.0); nperseg];
    let mut segments = 0;
    let mut start = 0;
    while start + nperseg <= x.len() {
        let seg = x.slice(ndarray::s![start..start + nperseg]);
        let mean = seg.sum() / nperseg as f64;
        for (b, (v, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in psd.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let scale = 1.0 / (sample_rate_hz * wss * segments as f64);
    psd.mapv_inplace(|p| p * scale);
    let last = n_freq - 1;
    for (i, p) in psd.iter_mut().enumerate() {
        if i != 0 && !(nperseg % 2 == 0 && i == last) {
            *p *= 2.0;
        }
    }
    let freqs = Array1::from_shape_fn(n_freq, |i| i as f64 * sample_rate_hz / nperseg as f64);
    Ok((freqs, psd))
}

/// `log10` of the mean Welch PSD over `[low, high)` for each band, laid out
/// channel-major: all bands of channel 0, then channel 1, ...
pub fn band_power(window: ArrayView2<f64>, sample_rate_hz: f64, bands: &[Band]) -> Result<Array1<f64>> {
    let nyquist = sample_rate_hz / 2.0;
    for b in bands {
        if !(b.low_hz >= 0.0 && b.low_hz < b.high_hz) {
            return Err(Error::InvalidBand(format!("{}: {}–{} Hz", b.name, b.low_hz, b.high_hz)));
        }
        if b.high_hz > nyquist {
            return Err(Error::BandOutOfRange {
                name: b.name.clone(),
                low_hz: b.low_hz,
                high_hz: b.high_hz,
                nyquist_hz: nyquist,
            });
        }
    }
    let mut out = Vec::with_capacity(window.nrows() * bands.len());
    for row in window.rows() {
        let (freqs, psd) = welch_psd(row, sample_rate_hz)?;
        for b in bands {
            let (sum, count) = freqs
                .iter()
                .zip(&psd)
                .filter(|(f, _)| **f >= b.low_hz && **f < b.high_hz)
                .fold((0.0, 0usize), |(s, c), (_, p)| (s + p, c + 1));
            let mean = if count == 0 { 0.0 } else { sum / count as f64 };
            out.push(mean.max(POWER_FLOOR).log10());
        }
    }
    Ok(Array1::from(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Plain DFT periodogram at one frequency; independent of the FFT path.
    fn dft_power(x: &[f64], fs: f64, f: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let ph = 2.0 * std::f64::consts::PI * f * i as f64 / fs;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        (re * re + im * im) / x.len() as f64
    }

    #[test]
    fn ten_hz_sine_lands_in_alpha() {
        let fs = 128.0;
        let x = Array2::from_shape_fn((1, 1280), |(_, i)| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / fs).sin());
        let p = band_power(x.view(), fs, &default_bands()).unwrap();
        let alpha = p[1];
        for (i, v) in p.iter().enumerate() {
            if i != 1 {
                assert!(10.0 * (alpha - v) >= 10.0, "band {i}: alpha {alpha} vs {v}");
            }
        }
        // the oracle agrees on where the energy is
        let row = x.row(0).to_vec();
        assert!(dft_power(&row, fs, 10.0) > 1e3 * dft_power(&row, fs, 6.0));
    }

    #[test]
    fn parseval_total_power() {
        // integral of the PSD equals the variance for white noise
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Array1<f64> = (0..128 * 60).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (f, psd) = welch_psd(x.view(), 128.0).unwrap();
        let df = f[1] - f[0];
        let total: f64 = psd.sum() * df;
        assert!((total - 1.0).abs() < 0.05, "{total}");
    }

    #[test]
    fn white_noise_equal_width_bands_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Array2::from_shape_simple_fn((1, 128 * 60), || StandardNormal.sample(&mut rng));
        let bands = [Band::new("a", 10.0, 20.0), Band::new("b", 30.0, 40.0)];
        let p = band_power(x.view(), 128.0, &bands).unwrap();
        let ratio = 10f64.powf(p[0] - p[1]);
        assert!((ratio - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn zero_signal_hits_floor() {
        let x = Array2::zeros((3, 512));
        let p = band_power(x.view(), 128.0, &default_bands()).unwrap();
        assert_eq!(p.len(), 12);
        assert!(p.iter().all(|v| *v == -12.0));
    }

    #[test]
    fn band_above_nyquist_is_rejected() {
        let x = Array2::zeros((1, 512));
        let err = band_power(x.view(), 128.0, &[Band::new("hi", 50.0, 70.0)]).unwrap_err();
        assert!(matches!(err, Error::BandOutOfRange { .. }));
    }

    #[test]
    fn short_window_is_rejected() {
        let x = Array2::zeros((1, 100));
        assert!(matches!(band_power(x.view(), 128.0, &default_bands()), Err(Error::TooShort { .. })));
    }
}

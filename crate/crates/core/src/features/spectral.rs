//! Welch power spectral density and spectral entropy.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WelchSpec {
    /// Segment length; the whole signal is used when it is shorter.
    pub segment_len: usize,
    pub overlap_fraction: f64,
}

impl Default for WelchSpec {
    fn default() -> Self {
        WelchSpec {
            segment_len: 64,
            overlap_fraction: 0.5,
        }
    }
}

/// One-sided Welch PSD with a rectangular taper and per-segment mean
/// removal. Returns `(frequencies, density)`.
pub fn welch_psd(x: &[f64], sample_rate_hz: f64, spec: &WelchSpec) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let nperseg = spec.segment_len.min(n).max(1);
    let noverlap = ((nperseg as f64 * spec.overlap_fraction).floor() as usize).min(nperseg - 1);
    let step = nperseg - noverlap;
    let nseg = (n - nperseg) / step + 1;
    let nout = nperseg / 2 + 1;
    let fft = FftPlanner::new().plan_fft_forward(nperseg);
    let scale = 1.0 / (sample_rate_hz * nperseg as f64);
    let mut psd = vec![0.0; nout];
    let mut buf = vec![Complex::new(0.0, 0.0); nperseg];
    for s in 0..nseg {
        let seg = &x[s * step..s * step + nperseg];
        let m = seg.iter().sum::<f64>() / nperseg as f64;
        for (b, v) in buf.iter_mut().zip(seg) {
            *b = Complex::new(v - m, 0.0);
        }
        fft.process(&mut buf);
        for (k, p) in psd.iter_mut().enumerate() {
            let mut v = buf[k].norm_sqr() * scale;
            let nyquist = nperseg % 2 == 0 && k == nout - 1;
            if k > 0 && !nyquist {
                v *= 2.0;
            }
            *p += v;
        }
    }
    for p in &mut psd {
        *p /= nseg as f64;
    }
    let freqs = (0..nout)
        .map(|k| k as f64 * sample_rate_hz / nperseg as f64)
        .collect();
    (freqs, psd)
}

/// `−Σ P log2 P` of a PSD normalised to unit sum; 0 when the PSD carries no
/// power.
pub fn entropy_of_psd(psd: &[f64]) -> f64 {
    let total: f64 = psd.iter().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    -psd
        .iter()
        .map(|p| p / total)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

/// Entropy in bits of the normalised Welch spectrum; 0 for a constant
/// channel.
pub fn spectral_entropy(x: &[f64], sample_rate_hz: f64, spec: &WelchSpec) -> f64 {
    if x.len() < 2 || x.iter().all(|&v| v == x[0]) {
        return 0.0;
    }
    entropy_of_psd(&welch_psd(x, sample_rate_hz, spec).1)
}

//! Butterworth low/high-pass filters as cascaded second-order sections.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    LowPass,
    HighPass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ButterworthSpec {
    pub order: usize,
    pub cutoff_hz: f64,
    pub kind: FilterKind,
    pub sample_rate_hz: f64,
}

impl ButterworthSpec {
    pub fn low_pass(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        ButterworthSpec {
            order,
            cutoff_hz,
            kind: FilterKind::LowPass,
            sample_rate_hz,
        }
    }

    pub fn high_pass(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        ButterworthSpec {
            order,
            cutoff_hz,
            kind: FilterKind::HighPass,
            sample_rate_hz,
        }
    }
}

/// One biquad, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Transposed direct form II state for a unit step held forever.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[2] * g;
        let z1 = self.b[1] - self.a[1] * g + z2;
        [z1, z2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Bilinear-transform design with the cutoff pre-warped, so the digital
    /// response is exactly −3 dB at `cutoff_hz`.
    pub fn design(spec: &ButterworthSpec) -> Result<Sos> {
        let nyq = spec.sample_rate_hz / 2.0;
        if !(spec.sample_rate_hz > 0.0) {
            return Err(Error::FilterDesign("sample rate must be positive".into()));
        }
        if !(spec.cutoff_hz > 0.0 && spec.cutoff_hz < nyq) {
            return Err(Error::FilterDesign(format!(
                "cutoff {} Hz outside (0, {nyq}) Hz",
                spec.cutoff_hz
            )));
        }
        if spec.order == 0 || spec.order % 2 != 0 {
            return Err(Error::FilterDesign(format!(
                "order must be even and positive, got {}",
                spec.order
            )));
        }
        let n = spec.order;
        let k = (PI * spec.cutoff_hz / spec.sample_rate_hz).tan();
        let k2 = k * k;
        let sections = (0..n / 2)
            .map(|i| {
                let q = 2.0 * (PI * (2 * i + 1) as f64 / (2 * n) as f64).sin();
                let norm = 1.0 / (1.0 + q * k + k2);
                let a = [1.0, 2.0 * (k2 - 1.0) * norm, (1.0 - q * k + k2) * norm];
                let b = match spec.kind {
                    FilterKind::LowPass => {
                        let b0 = k2 * norm;
                        [b0, 2.0 * b0, b0]
                    }
                    FilterKind::HighPass => [norm, -2.0 * norm, norm],
                };
                Biquad { b, a }
            })
            .collect();
        Ok(Sos { sections })
    }

    /// Complex gain `|H(e^{jω})|` at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate_hz;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        self.sections
            .iter()
            .map(|s| {
                let nr = s.b[0] + s.b[1] * c1 + s.b[2] * c2;
                let ni = -(s.b[1] * s1 + s.b[2] * s2);
                let dr = s.a[0] + s.a[1] * c1 + s.a[2] * c2;
                let di = -(s.a[1] * s1 + s.a[2] * s2);
                ((nr * nr + ni * ni) / (dr * dr + di * di)).sqrt()
            })
            .product()
    }

    /// Steady-state initial conditions for a unit-valued input.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let z = s.step_state();
                let out = [z[0] * scale, z[1] * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    fn run(&self, x: &mut [f64], state: &mut [[f64; 2]]) {
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            let [b0, b1, b2] = s.b;
            let [_, a1, a2] = s.a;
            let (mut z1, mut z2) = (z[0], z[1]);
            for v in x.iter_mut() {
                let xi = *v;
                let yi = b0 * xi + z1;
                z1 = b1 * xi - a1 * yi + z2;
                z2 = b2 * xi - a2 * yi;
                *v = yi;
            }
            *z = [z1, z2];
        }
    }

    /// Causal single pass from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let mut state = vec![[0.0; 2]; self.sections.len()];
        self.run(&mut y, &mut state);
        y
    }

    /// Samples until the impulse response has decayed below 1e-9 of its
    /// peak.
    pub fn settle_length(&self) -> usize {
        const LIMIT: usize = 1 << 16;
        let mut h = vec![0.0; LIMIT];
        h[0] = 1.0;
        let mut state = vec![[0.0; 2]; self.sections.len()];
        self.run(&mut h, &mut state);
        let peak = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        h.iter()
            .rposition(|v| v.abs() > 1e-9 * peak)
            .map_or(1, |i| i + 1)
    }

    /// Zero-phase forward-backward filtering. The input is extended at both
    /// ends by odd reflection (3 × settle length, capped at `len − 1`) and
    /// each pass starts from the steady state of its first sample. The
    /// forward-backward and backward-forward results are averaged, which
    /// makes the output exactly reversal-symmetric even when the padding is
    /// shorter than the settle length.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * self.settle_length()).min(n - 1);
        self.filtfilt_padded(x, pad)
    }

    pub fn filtfilt_padded(&self, x: &[f64], pad: usize) -> Vec<f64> {
        let n = x.len();
        let pad = pad.min(n.saturating_sub(1));
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let mut fb = ext.clone();
        self.two_pass(&mut fb);
        let mut bf = ext;
        bf.reverse();
        self.two_pass(&mut bf);
        bf.reverse();
        (pad..pad + n).map(|i| 0.5 * (fb[i] + bf[i])).collect()
    }

    /// Filter, reverse, filter, reverse; each pass from the steady state of
    /// its first sample.
    fn two_pass(&self, x: &mut [f64]) {
        let zi = self.step_states();
        for _ in 0..2 {
            let v = x[0];
            let mut state: Vec<[f64; 2]> = zi.iter().map(|z| [z[0] * v, z[1] * v]).collect();
            self.run(x, &mut state);
            x.reverse();
        }
    }
}

/// Design and apply a zero-phase Butterworth filter.
pub fn butterworth_filter(series: &[f64], spec: &ButterworthSpec) -> Result<Vec<f64>> {
    Ok(Sos::design(spec)?.filtfilt(series))
}

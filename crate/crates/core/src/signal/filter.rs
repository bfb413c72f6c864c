//! Causal Butterworth band-pass built from a high-pass and a low-pass
//! cascade of second-order sections (bilinear transform, prewarped edges).

use std::f64::consts::PI;

use super::{AudioFrameSeries, PipelineConfig, PipelineError};

/// One direct-form-II-transposed section. First-order sections keep
/// `b2 = a2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn lowpass(fc: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b0: (1.0 - cos) / 2.0 / a0,
            b1: (1.0 - cos) / a0,
            b2: (1.0 - cos) / 2.0 / a0,
            a1: -2.0 * cos / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    fn highpass(fc: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b0: (1.0 + cos) / 2.0 / a0,
            b1: -(1.0 + cos) / a0,
            b2: (1.0 + cos) / 2.0 / a0,
            a1: -2.0 * cos / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    fn lowpass_first_order(fc: f64, fs: f64) -> Self {
        let k = (PI * fc / fs).tan();
        Self {
            b0: k / (1.0 + k),
            b1: k / (1.0 + k),
            b2: 0.0,
            a1: (k - 1.0) / (k + 1.0),
            a2: 0.0,
        }
    }

    fn highpass_first_order(fc: f64, fs: f64) -> Self {
        let k = (PI * fc / fs).tan();
        Self {
            b0: 1.0 / (1.0 + k),
            b1: -1.0 / (1.0 + k),
            b2: 0.0,
            a1: (k - 1.0) / (k + 1.0),
            a2: 0.0,
        }
    }

    /// Complex response at normalized angular frequency `w` (rad/sample),
    /// returned as `(re, im)`.
    fn response(&self, w: f64) -> (f64, f64) {
        // z^-1 = e^{-jw}
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (
            self.b0 + self.b1 * c1 + self.b2 * c2,
            self.b1 * s1 + self.b2 * s2,
        );
        let den = (
            1.0 + self.a1 * c1 + self.a2 * c2,
            self.a1 * s1 + self.a2 * s2,
        );
        let d = den.0 * den.0 + den.1 * den.1;
        (
            (num.0 * den.0 + num.1 * den.1) / d,
            (num.1 * den.0 - num.0 * den.1) / d,
        )
    }
}

/// Butterworth section Qs for an order-`n` prototype; an odd order adds a
/// first-order section, signalled by the returned flag.
fn butterworth_qs(order: usize) -> (Vec<f64>, bool) {
    let qs = (1..=order / 2)
        .map(|k| 1.0 / (2.0 * ((2 * k - 1) as f64 * PI / (2 * order) as f64).sin()))
        .collect();
    (qs, order % 2 == 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandPass {
    sections: Vec<Biquad>,
    sample_rate: f64,
}

impl BandPass {
    pub fn design(cfg: &PipelineConfig, sample_rate: u32) -> Result<Self, PipelineError> {
        cfg.validate_band(sample_rate)?;
        let fs = f64::from(sample_rate);
        let (qs, odd) = butterworth_qs(cfg.filter_order);
        let mut sections = Vec::with_capacity(2 * (qs.len() + 1));
        for &q in &qs {
            sections.push(Biquad::highpass(cfg.band_lo_hz, fs, q));
        }
        if odd {
            sections.push(Biquad::highpass_first_order(cfg.band_lo_hz, fs));
        }
        for &q in &qs {
            sections.push(Biquad::lowpass(cfg.band_hi_hz, fs, q));
        }
        if odd {
            sections.push(Biquad::lowpass_first_order(cfg.band_hi_hz, fs));
        }
        Ok(Self {
            sections,
            sample_rate: fs,
        })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Magnitude of the cascade's transfer function at `freq_hz`, evaluated
    /// from the section coefficients.
    pub fn magnitude_at(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate;
        self.sections
            .iter()
            .map(|s| {
                let (re, im) = s.response(w);
                (re * re + im * im).sqrt()
            })
            .product()
    }

    /// Filters `input` from a zero initial state.
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut out = input.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for x in out.iter_mut() {
                let y = s.b0 * *x + z1;
                z1 = s.b1 * *x - s.a1 * y + z2;
                z2 = s.b2 * *x - s.a2 * y;
                *x = y;
            }
        }
        out
    }
}

/// Band-limits raw frames to the configured speech band. Output has the same
/// length and timing as the input; amplitudes are clamped back into [-1, 1].
pub fn bandpass_filter(
    frames: &AudioFrameSeries,
    cfg: &PipelineConfig,
) -> Result<AudioFrameSeries, PipelineError> {
    frames.validate()?;
    let filter = BandPass::design(cfg, frames.sample_rate)?;
    let amplitudes = filter
        .apply(&frames.amplitudes)
        .into_iter()
        .map(|a| a.clamp(-1.0, 1.0))
        .collect();
    Ok(AudioFrameSeries {
        amplitudes,
        ..frames.clone()
    })
}

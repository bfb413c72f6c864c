//! Speech detection from microphone volume.
//!
//! Raw frames (phone path) go through [`bandpass_filter`] and
//! [`compute_volume`]; pre-averaged badge volumes enter directly at
//! [`rolling_median`]. [`detect_speaking`] turns a smoothed volume series into
//! speaking events.

mod detect;
mod filter;
mod median;
mod volume;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use detect::{coefficient_of_variation, detect_speaking, detect_with_period};
pub use filter::{bandpass_filter, BandPass, Biquad};
pub use median::rolling_median;
pub use volume::compute_volume;

/// Default microphone sampling rate of the hardware badge.
pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 8000;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid input: {0}")]
    Input(String),
}

/// A block of raw, normalized microphone samples for one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioFrameSeries {
    pub participant_id: String,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    /// Timestamp of the first sample, ms since the Unix epoch.
    pub start_ts: i64,
    pub amplitudes: Vec<f64>,
}

fn default_sample_rate() -> u32 {
    DEFAULT_SAMPLE_RATE_HZ
}

impl AudioFrameSeries {
    pub fn new(
        participant_id: impl Into<String>,
        sample_rate: u32,
        start_ts: i64,
        amplitudes: Vec<f64>,
    ) -> Self {
        Self {
            participant_id: participant_id.into(),
            sample_rate,
            start_ts,
            amplitudes,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.sample_rate == 0 {
            return Err(PipelineError::Input("sample_rate must be positive".into()));
        }
        if let Some(a) = self.amplitudes.iter().find(|a| !(-1.0..=1.0).contains(*a)) {
            return Err(PipelineError::Input(format!(
                "amplitude {a} outside [-1, 1]"
            )));
        }
        Ok(())
    }

    pub fn duration_ms(&self) -> f64 {
        self.amplitudes.len() as f64 * 1000.0 / f64::from(self.sample_rate)
    }
}

/// One averaged volume reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeSample {
    pub participant_id: String,
    pub ts: i64,
    pub value: f64,
}

impl VolumeSample {
    pub fn new(participant_id: impl Into<String>, ts: i64, value: f64) -> Self {
        Self {
            participant_id: participant_id.into(),
            ts,
            value,
        }
    }
}

/// A detected speech interval, `[start_ts, end_ts)` in ms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpeakingEvent {
    pub participant_id: String,
    pub start_ts: i64,
    pub end_ts: i64,
}

impl SpeakingEvent {
    pub fn new(participant_id: impl Into<String>, start_ts: i64, end_ts: i64) -> Self {
        Self {
            participant_id: participant_id.into(),
            start_ts,
            end_ts,
        }
    }

    pub fn duration_ms(&self) -> i64 {
        self.end_ts - self.start_ts
    }
}

/// Statistic used to collapse a period of samples into one volume value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeStat {
    #[default]
    MeanAbs,
    Rms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    /// Butterworth order of each skirt (high-pass and low-pass sections).
    pub filter_order: usize,
    pub median_window: usize,
    pub speak_threshold: f64,
    pub min_event_ms: i64,
    pub max_gap_ms: i64,
    pub modulation_cv_min: f64,
    pub volume_stat: VolumeStat,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            band_lo_hz: 85.0,
            band_hi_hz: 3800.0,
            filter_order: 6,
            median_window: 5,
            speak_threshold: 0.05,
            min_event_ms: 500,
            max_gap_ms: 300,
            modulation_cv_min: 0.1,
            volume_stat: VolumeStat::MeanAbs,
        }
    }
}

impl PipelineConfig {
    /// Checks everything except the band edges, which depend on the sample rate.
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.median_window == 0 || self.median_window.is_multiple_of(2) {
            return Err(PipelineError::Config(format!(
                "median_window must be odd and >= 1, got {}",
                self.median_window
            )));
        }
        if !(self.speak_threshold > 0.0 && self.speak_threshold < 1.0) {
            return Err(PipelineError::Config(format!(
                "speak_threshold must be in (0, 1), got {}",
                self.speak_threshold
            )));
        }
        if self.min_event_ms <= 0 {
            return Err(PipelineError::Config(
                "min_event_ms must be positive".into(),
            ));
        }
        if self.max_gap_ms < 0 {
            return Err(PipelineError::Config("max_gap_ms must be >= 0".into()));
        }
        if self.modulation_cv_min.is_nan() || self.modulation_cv_min < 0.0 {
            return Err(PipelineError::Config(
                "modulation_cv_min must be >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn validate_band(&self, sample_rate: u32) -> Result<(), PipelineError> {
        let nyquist = f64::from(sample_rate) / 2.0;
        if !(self.band_lo_hz > 0.0
            && self.band_lo_hz < self.band_hi_hz
            && self.band_hi_hz < nyquist)
        {
            return Err(PipelineError::Config(format!(
                "band edges must satisfy 0 < lo < hi < {nyquist} Hz, got {}..{}",
                self.band_lo_hz, self.band_hi_hz
            )));
        }
        if self.filter_order == 0 {
            return Err(PipelineError::Config("filter_order must be >= 1".into()));
        }
        Ok(())
    }
}

/// Runs smoothing and detection on an already-averaged volume series.
pub fn events_from_volumes(
    series: &[VolumeSample],
    cfg: &PipelineConfig,
) -> Result<Vec<SpeakingEvent>, PipelineError> {
    cfg.validate()?;
    if series.is_empty() {
        return Ok(Vec::new());
    }
    let window = cfg.median_window.min(largest_odd_at_most(series.len()));
    let smoothed = rolling_median(series, window)?;
    Ok(detect_speaking(&smoothed, cfg))
}

/// Like [`events_from_volumes`] for a single participant's series whose
/// sample period is known, so uneven spacing across chunk joins does not
/// change the period used for event ends.
pub fn events_with_period(
    series: &[VolumeSample],
    period_ms: i64,
    cfg: &PipelineConfig,
) -> Result<Vec<SpeakingEvent>, PipelineError> {
    cfg.validate()?;
    if series.is_empty() {
        return Ok(Vec::new());
    }
    let window = cfg.median_window.min(largest_odd_at_most(series.len()));
    Ok(detect_with_period(
        &rolling_median(series, window)?,
        period_ms,
        cfg,
    ))
}

/// Full chain for raw audio: filter, average over `period_ms`, smooth, detect.
pub fn process_frames(
    frames: &AudioFrameSeries,
    period_ms: u32,
    cfg: &PipelineConfig,
) -> Result<(Vec<VolumeSample>, Vec<SpeakingEvent>), PipelineError> {
    let filtered = bandpass_filter(frames, cfg)?;
    let volumes = compute_volume(&filtered, period_ms, cfg.volume_stat)?;
    let events = events_from_volumes(&volumes, cfg)?;
    Ok((volumes, events))
}

fn largest_odd_at_most(n: usize) -> usize {
    if n % 2 == 1 {
        n
    } else {
        n - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_for_8khz() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        cfg.validate_band(8000).unwrap();
    }

    #[test]
    fn band_at_nyquist_is_rejected() {
        let cfg = PipelineConfig {
            band_hi_hz: 4000.0,
            ..Default::default()
        };
        assert!(matches!(
            cfg.validate_band(8000),
            Err(PipelineError::Config(_))
        ));
    }

    #[test]
    fn even_median_window_is_rejected() {
        let cfg = PipelineConfig {
            median_window: 4,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn out_of_range_amplitude_is_rejected() {
        let frames = AudioFrameSeries::new("a", 8000, 0, vec![0.0, 1.5]);
        assert!(frames.validate().is_err());
    }

    #[test]
    fn short_series_shrinks_median_window() {
        let series: Vec<_> = (0..4)
            .map(|i| VolumeSample::new("a", i * 250, 0.5))
            .collect();
        let events = events_from_volumes(
            &series,
            &PipelineConfig {
                modulation_cv_min: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(events, vec![SpeakingEvent::new("a", 0, 1000)]);
    }
}

use std::collections::BTreeMap;

use super::{PipelineConfig, SpeakingEvent, VolumeSample};

/// Population standard deviation over mean. Zero for an empty or all-zero slice.
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

struct Run {
    start: i64,
    end: i64,
    first: usize,
    last: usize,
}

/// Thresholds a smoothed volume series into speaking events.
///
/// Each sample covers `[ts, ts + period)`, with the period taken as the
/// smallest positive spacing in the participant's series. Samples at or above
/// `speak_threshold` are joined into runs whenever the silence between them is
/// at most `max_gap_ms`; runs shorter than `min_event_ms`, or whose volume
/// coefficient of variation is below `modulation_cv_min`, are dropped.
///
/// Series with several participants are processed per participant. A
/// participant with fewer than two samples yields no events.
pub fn detect_speaking(series: &[VolumeSample], cfg: &PipelineConfig) -> Vec<SpeakingEvent> {
    let mut by_participant: BTreeMap<&str, Vec<&VolumeSample>> = BTreeMap::new();
    for s in series {
        by_participant
            .entry(s.participant_id.as_str())
            .or_default()
            .push(s);
    }

    let mut events = Vec::new();
    for (participant, samples) in by_participant {
        let Some(period) = samples
            .windows(2)
            .map(|w| w[1].ts - w[0].ts)
            .filter(|d| *d > 0)
            .min()
        else {
            continue;
        };
        events.extend(detect_runs(participant, &samples, period, cfg));
    }
    events.sort_by(|a, b| (a.start_ts, &a.participant_id).cmp(&(b.start_ts, &b.participant_id)));
    events
}

/// Detection for one participant's time-ordered samples with a known period.
pub fn detect_with_period(
    samples: &[VolumeSample],
    period_ms: i64,
    cfg: &PipelineConfig,
) -> Vec<SpeakingEvent> {
    let Some(first) = samples.first() else {
        return Vec::new();
    };
    let refs: Vec<&VolumeSample> = samples.iter().collect();
    detect_runs(&first.participant_id, &refs, period_ms, cfg)
}

fn detect_runs(
    participant: &str,
    samples: &[&VolumeSample],
    period: i64,
    cfg: &PipelineConfig,
) -> Vec<SpeakingEvent> {
    let mut runs: Vec<Run> = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        if s.value < cfg.speak_threshold {
            continue;
        }
        match runs.last_mut() {
            Some(run) if s.ts - run.end <= cfg.max_gap_ms => {
                run.end = run.end.max(s.ts + period);
                run.last = i;
            }
            _ => runs.push(Run {
                start: s.ts,
                end: s.ts + period,
                first: i,
                last: i,
            }),
        }
    }
    runs.into_iter()
        .filter(|run| run.end - run.start >= cfg.min_event_ms)
        .filter(|run| {
            let values: Vec<f64> = samples[run.first..=run.last]
                .iter()
                .map(|s| s.value)
                .collect();
            coefficient_of_variation(&values) >= cfg.modulation_cv_min
        })
        .map(|run| SpeakingEvent::new(participant, run.start, run.end))
        .collect()
}

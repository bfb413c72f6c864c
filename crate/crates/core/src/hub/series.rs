//! Per-participant volume series with incremental event detection.
//!
//! Events are detected on the suffix of the series that can still change.
//! An event becomes final once every sample that could extend it has a
//! final smoothed value: the smoothed value at index `i` is final when `i`
//! is at least half a median window from the end, and a later sample can
//! only merge into an event if it starts within `max_gap_ms` of its end.
//! Final events are persisted; the rest are recomputed on each ingest.

use crate::signal::{
    detect_with_period, rolling_median, PipelineConfig, SpeakingEvent, VolumeSample,
};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParticipantSeries {
    pub participant_id: String,
    pub ts: Vec<i64>,
    pub values: Vec<f64>,
    pub period_ms: i64,
    /// End of the newest persisted event; detection restarts here.
    pub finalized_end: Option<i64>,
    pub tail: Vec<SpeakingEvent>,
}

/// What an ingest would change, computed without mutating the series.
#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub finalized: Vec<SpeakingEvent>,
    pub tail: Vec<SpeakingEvent>,
    /// New samples older than the restart point; stored but not re-detected.
    pub late_samples: usize,
}

fn largest_odd_at_most(n: usize) -> usize {
    if n % 2 == 1 {
        n
    } else {
        n.saturating_sub(1)
    }
}

impl ParticipantSeries {
    pub fn new(participant_id: impl Into<String>, period_ms: i64) -> Self {
        Self {
            participant_id: participant_id.into(),
            period_ms,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    fn restart_index(&self) -> usize {
        self.finalized_end
            .map_or(0, |f| self.ts.partition_point(|&t| t < f))
    }

    /// `new` must be sorted by timestamp.
    pub fn plan(&self, new: &[(i64, f64)], cfg: &PipelineConfig) -> Update {
        let n_total = self.len() + new.len();
        let window = cfg.median_window.min(largest_odd_at_most(n_total)).max(1);
        let h = window / 2;
        let r = self.restart_index();
        let start = r.saturating_sub(h);
        let floor_ts = self.finalized_end.unwrap_or(i64::MIN);
        let late_samples = new.iter().filter(|(t, _)| *t < floor_ts).count();
        // Samples older than the context start stay out of the recompute.
        let context_ts = self.ts.get(start).copied().unwrap_or(i64::MIN);

        let old = self.ts[start..]
            .iter()
            .copied()
            .zip(self.values[start..].iter().copied());
        let fresh = new.iter().copied().filter(|(t, _)| *t >= context_ts);
        let merged = merge_sorted(old, fresh);
        let restart_at = merged.partition_point(|(t, _)| *t < floor_ts);
        // Index in `merged` of the newest sample whose smoothing is final.
        let cutoff = merged.len().checked_sub(h + 1).map(|i| merged[i].0);

        let mut finalized = Vec::new();
        let mut tail = Vec::new();
        if !merged.is_empty() {
            let series: Vec<VolumeSample> = merged
                .iter()
                .map(|&(t, v)| VolumeSample::new(self.participant_id.clone(), t, v))
                .collect();
            let w = window.min(largest_odd_at_most(series.len())).max(1);
            let smoothed = rolling_median(&series, w).expect("window fits the series");
            let events = detect_with_period(
                &smoothed[restart_at.min(smoothed.len())..],
                self.period_ms,
                cfg,
            );
            let mut open = false;
            for e in events {
                let is_final = !open && cutoff.is_some_and(|c| e.end_ts + cfg.max_gap_ms < c);
                if is_final {
                    finalized.push(e);
                } else {
                    open = true;
                    tail.push(e);
                }
            }
        }
        Update {
            finalized,
            tail,
            late_samples,
        }
    }

    pub fn apply(&mut self, new: &[(i64, f64)], update: Update) {
        if self
            .ts
            .last()
            .is_none_or(|&last| new.first().is_none_or(|&(t, _)| t >= last))
        {
            for &(t, v) in new {
                self.ts.push(t);
                self.values.push(v);
            }
        } else {
            let old = self.ts.iter().copied().zip(self.values.iter().copied());
            let merged = merge_sorted(old, new.iter().copied());
            (self.ts, self.values) = merged.into_iter().unzip();
        }
        if let Some(last) = update.finalized.last() {
            self.finalized_end = Some(last.end_ts);
        }
        self.tail = update.tail;
    }

    pub fn samples_in(&self, from: i64, to: i64) -> impl Iterator<Item = VolumeSample> + '_ {
        let lo = self.ts.partition_point(|&t| t < from);
        let hi = self.ts.partition_point(|&t| t < to);
        (lo..hi).map(move |i| {
            VolumeSample::new(self.participant_id.clone(), self.ts[i], self.values[i])
        })
    }
}

fn merge_sorted(
    a: impl Iterator<Item = (i64, f64)>,
    b: impl Iterator<Item = (i64, f64)>,
) -> Vec<(i64, f64)> {
    let mut out: Vec<(i64, f64)> = a.collect();
    let split = out.len();
    out.extend(b);
    if out[..split]
        .last()
        .zip(out.get(split))
        .is_some_and(|(x, y)| y.0 < x.0)
    {
        out.sort_by_key(|p| p.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::events_with_period;

    fn burst(start: i64, n: usize) -> Vec<(i64, f64)> {
        (0..n)
            .map(|i| (start + i as i64 * 250, if i % 2 == 0 { 0.3 } else { 0.6 }))
            .collect()
    }

    fn quiet(start: i64, n: usize) -> Vec<(i64, f64)> {
        (0..n).map(|i| (start + i as i64 * 250, 0.01)).collect()
    }

    fn stream() -> Vec<(i64, f64)> {
        let mut s = quiet(0, 8);
        s.extend(burst(2000, 12));
        s.extend(quiet(5000, 10));
        s.extend(burst(7500, 20));
        s.extend(quiet(12_500, 4));
        s.extend(burst(13_500, 8));
        s.extend(quiet(15_500, 12));
        s
    }

    #[test]
    fn incremental_matches_one_pass() {
        let cfg = PipelineConfig::default();
        let all = stream();
        let direct = events_with_period(
            &all.iter()
                .map(|&(t, v)| VolumeSample::new("p", t, v))
                .collect::<Vec<_>>(),
            250,
            &cfg,
        )
        .unwrap();
        for step in [1, 3, 7, 40, all.len()] {
            let mut s = ParticipantSeries::new("p", 250);
            let mut stored = Vec::new();
            for batch in all.chunks(step) {
                let up = s.plan(batch, &cfg);
                assert_eq!(up.late_samples, 0);
                stored.extend(up.finalized.clone());
                s.apply(batch, up);
            }
            stored.extend(s.tail.clone());
            assert_eq!(stored, direct, "batch size {step}");
        }
        assert_eq!(direct.len(), 3);
    }

    #[test]
    fn open_event_is_not_finalized() {
        let cfg = PipelineConfig::default();
        let mut s = ParticipantSeries::new("p", 250);
        let data = burst(0, 12);
        let up = s.plan(&data, &cfg);
        assert!(up.finalized.is_empty());
        assert_eq!(up.tail.len(), 1);
        s.apply(&data, up);
        let more = quiet(3000, 8);
        let up = s.plan(&more, &cfg);
        assert_eq!(up.finalized.len(), 1);
    }

    #[test]
    fn late_samples_are_counted() {
        let cfg = PipelineConfig::default();
        let mut s = ParticipantSeries::new("p", 250);
        let data = stream();
        let up = s.plan(&data, &cfg);
        s.apply(&data, up);
        assert!(s.finalized_end.is_some());
        let up = s.plan(&[(10, 0.5)], &cfg);
        assert_eq!(up.late_samples, 1);
        s.apply(&[(10, 0.5)], up);
        assert_eq!(s.ts[1], 10);
    }
}

//! Conversation statistics over speaking events: turns, response patterns,
//! turn-taking rate, overlap, speaking-time inequality, and the Meeting
//! Mediator state derived from them.
//!
//! Every function takes the participant list explicitly so that silent
//! participants still show up (with zeros) and output order is the caller's
//! order. Events of participants not in the list are ignored.

mod inequality;
mod mediator;
mod overlap;
mod turns;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::SpeakingEvent;

pub use inequality::{gini, inequality, normalized_entropy_inequality, Inequality};
pub use mediator::{mediator_state, node_positions, MediatorState};
pub use overlap::{overlap_pct, speaking_ms};
pub use turns::{
    response_matrix, turn_taking_frequency, turns, turns_per_participant, Turn, TurnMatrix,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("invalid time window {start_ts}..{end_ts}")]
    InvalidWindow { start_ts: i64, end_ts: i64 },
    #[error("at least {required} participants required, got {got}")]
    TooFewParticipants { required: usize, got: usize },
    #[error("invalid value: {0}")]
    InvalidValue(String),
}

/// Half-open interval `[start_ts, end_ts)` in ms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start_ts: i64,
    pub end_ts: i64,
}

impl TimeWindow {
    pub fn new(start_ts: i64, end_ts: i64) -> Result<Self, MetricsError> {
        if start_ts >= end_ts {
            return Err(MetricsError::InvalidWindow { start_ts, end_ts });
        }
        Ok(Self { start_ts, end_ts })
    }

    pub fn duration_ms(&self) -> i64 {
        self.end_ts - self.start_ts
    }

    pub fn minutes(&self) -> f64 {
        self.duration_ms() as f64 / 60_000.0
    }

    pub fn intersects(&self, start_ts: i64, end_ts: i64) -> bool {
        start_ts < self.end_ts && end_ts > self.start_ts
    }

    pub fn contains(&self, ts: i64) -> bool {
        ts >= self.start_ts && ts < self.end_ts
    }

    /// Clips `[start_ts, end_ts)` to the window; `None` if nothing remains.
    pub fn clip(&self, start_ts: i64, end_ts: i64) -> Option<(i64, i64)> {
        let (s, e) = (start_ts.max(self.start_ts), end_ts.min(self.end_ts));
        (s < e).then_some((s, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Events of one participant separated by at most this much silence form one turn.
    pub turn_gap_ms: i64,
    pub response_window_ms: i64,
    pub inequality: Inequality,
    /// Group turn rate (turns/min) at which the mediator ball is fully saturated.
    pub rate_max: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            turn_gap_ms: 1000,
            response_window_ms: 3000,
            inequality: Inequality::Gini,
            rate_max: 20.0,
        }
    }
}

/// Aggregate statistics for one window.
///
/// `gini` carries whichever inequality measure the config selects (Gini by
/// default); both lie in [0, 1] with 0 meaning perfectly equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub window: TimeWindow,
    pub speaking_ms: IndexMap<String, i64>,
    pub turns: IndexMap<String, u32>,
    pub turn_rate_per_min: f64,
    pub overlap_pct: f64,
    pub gini: f64,
    pub dominant: Option<String>,
}

impl WindowStats {
    pub fn participants(&self) -> impl Iterator<Item = &str> {
        self.turns.keys().map(String::as_str)
    }
}

pub fn window_stats(
    events: &[SpeakingEvent],
    participants: &[String],
    window: TimeWindow,
    cfg: &MetricsConfig,
) -> WindowStats {
    let speaking = speaking_ms(events, participants, window);
    let turns = turns_per_participant(events, participants, window, cfg.turn_gap_ms);
    let total_turns: u32 = turns.values().sum();
    let values: Vec<f64> = speaking.values().map(|&v| v as f64).collect();
    let gini = if values.is_empty() {
        0.0
    } else {
        inequality(&values, cfg.inequality).unwrap_or(0.0)
    };

    WindowStats {
        window,
        turn_rate_per_min: f64::from(total_turns) / window.minutes(),
        overlap_pct: overlap_pct(&known_events(events, participants), window),
        gini,
        dominant: dominant(&speaking),
        speaking_ms: speaking,
        turns,
    }
}

/// Unique argmax of speaking time; `None` on ties or when nobody spoke.
fn dominant(speaking: &IndexMap<String, i64>) -> Option<String> {
    let max = *speaking.values().max()?;
    if max == 0 {
        return None;
    }
    let mut leaders = speaking.iter().filter(|(_, &v)| v == max);
    let (first, _) = leaders.next()?;
    leaders.next().is_none().then(|| first.clone())
}

pub(crate) fn known_events(
    events: &[SpeakingEvent],
    participants: &[String],
) -> Vec<SpeakingEvent> {
    events
        .iter()
        .filter(|e| participants.contains(&e.participant_id))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn window_validation() {
        assert!(TimeWindow::new(5, 5).is_err());
        let w = TimeWindow::new(0, 100).unwrap();
        assert_eq!(w.clip(-10, 50), Some((0, 50)));
        assert_eq!(w.clip(100, 150), None);
        assert!(!w.intersects(100, 200));
    }

    #[test]
    fn empty_events_give_zero_stats() {
        let w = TimeWindow::new(0, 60_000).unwrap();
        let s = window_stats(&[], &ids(&["a", "b"]), w, &MetricsConfig::default());
        assert_eq!(
            s.speaking_ms.values().copied().collect::<Vec<_>>(),
            vec![0, 0]
        );
        assert_eq!(s.turns.values().copied().collect::<Vec<_>>(), vec![0, 0]);
        assert_eq!(s.turn_rate_per_min, 0.0);
        assert_eq!(s.overlap_pct, 0.0);
        assert_eq!(s.gini, 0.0);
        assert_eq!(s.dominant, None);
    }

    #[test]
    fn dominant_tie_is_none() {
        let w = TimeWindow::new(0, 10_000).unwrap();
        let ev = vec![
            SpeakingEvent::new("a", 0, 1000),
            SpeakingEvent::new("b", 2000, 3000),
        ];
        assert_eq!(
            window_stats(&ev, &ids(&["a", "b"]), w, &MetricsConfig::default()).dominant,
            None
        );
        let ev = vec![
            SpeakingEvent::new("a", 0, 1000),
            SpeakingEvent::new("b", 2000, 3001),
        ];
        assert_eq!(
            window_stats(&ev, &ids(&["a", "b"]), w, &MetricsConfig::default())
                .dominant
                .as_deref(),
            Some("b")
        );
    }

    #[test]
    fn unknown_participants_ignored() {
        let w = TimeWindow::new(0, 10_000).unwrap();
        let ev = vec![
            SpeakingEvent::new("a", 0, 1000),
            SpeakingEvent::new("zz", 500, 3000),
        ];
        let s = window_stats(&ev, &ids(&["a"]), w, &MetricsConfig::default());
        assert_eq!(s.overlap_pct, 0.0);
        assert_eq!(s.turns.len(), 1);
    }

    #[test]
    fn stats_serialize_with_expected_fields() {
        let w = TimeWindow::new(0, 60_000).unwrap();
        let s = window_stats(&[], &ids(&["a", "b"]), w, &MetricsConfig::default());
        let v = serde_json::to_value(&s).unwrap();
        for key in [
            "window",
            "speaking_ms",
            "turns",
            "turn_rate_per_min",
            "overlap_pct",
            "gini",
            "dominant",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["window"]["start_ts"], 0);
    }
}

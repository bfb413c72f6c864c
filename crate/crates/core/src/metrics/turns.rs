use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::TimeWindow;
use crate::signal::SpeakingEvent;

/// A gap-merged cluster of one participant's events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub participant_id: String,
    pub start_ts: i64,
    pub end_ts: i64,
}

/// Turns of the listed participants that intersect `window`, sorted by start.
///
/// Clustering runs over all of a participant's events, so a turn that
/// straddles a window edge is counted once with its full extent.
pub fn turns(
    events: &[SpeakingEvent],
    participants: &[String],
    window: TimeWindow,
    turn_gap_ms: i64,
) -> Vec<Turn> {
    let mut by_participant: BTreeMap<&str, Vec<(i64, i64)>> = BTreeMap::new();
    for e in events
        .iter()
        .filter(|e| participants.contains(&e.participant_id))
    {
        by_participant
            .entry(&e.participant_id)
            .or_default()
            .push((e.start_ts, e.end_ts));
    }
    let mut out = Vec::new();
    for (participant, mut spans) in by_participant {
        spans.sort_unstable();
        let mut clusters: Vec<(i64, i64)> = Vec::new();
        for (s, e) in spans {
            match clusters.last_mut() {
                Some(c) if s - c.1 <= turn_gap_ms => c.1 = c.1.max(e),
                _ => clusters.push((s, e)),
            }
        }
        out.extend(
            clusters
                .into_iter()
                .filter(|&(s, e)| window.intersects(s, e))
                .map(|(s, e)| Turn {
                    participant_id: participant.to_string(),
                    start_ts: s,
                    end_ts: e,
                }),
        );
    }
    out.sort_by(|a, b| (a.start_ts, &a.participant_id).cmp(&(b.start_ts, &b.participant_id)));
    out
}

pub fn turns_per_participant(
    events: &[SpeakingEvent],
    participants: &[String],
    window: TimeWindow,
    turn_gap_ms: i64,
) -> IndexMap<String, u32> {
    let mut counts: IndexMap<String, u32> = participants.iter().map(|p| (p.clone(), 0)).collect();
    for t in turns(events, participants, window, turn_gap_ms) {
        *counts.entry(t.participant_id).or_default() += 1;
    }
    counts
}

/// Group turns per minute of window.
pub fn turn_taking_frequency(
    events: &[SpeakingEvent],
    participants: &[String],
    window: TimeWindow,
    turn_gap_ms: i64,
) -> f64 {
    turns(events, participants, window, turn_gap_ms).len() as f64 / window.minutes()
}

/// `counts[i][j]`: how often participant `j` started a turn within
/// `(end, end + response_window_ms]` of a turn by participant `i` ending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnMatrix {
    pub participants: Vec<String>,
    pub counts: Vec<Vec<u32>>,
}

impl TurnMatrix {
    pub fn get(&self, from: &str, to: &str) -> Option<u32> {
        let i = self.participants.iter().position(|p| p == from)?;
        let j = self.participants.iter().position(|p| p == to)?;
        Some(self.counts[i][j])
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().flatten().sum()
    }
}

pub fn response_matrix(
    events: &[SpeakingEvent],
    participants: &[String],
    window: TimeWindow,
    turn_gap_ms: i64,
    response_window_ms: i64,
) -> TurnMatrix {
    let n = participants.len();
    let index: IndexMap<&str, usize> = participants
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();
    let mut counts = vec![vec![0u32; n]; n];

    let turns = turns(events, participants, window, turn_gap_ms);
    let mut by_start: Vec<(i64, usize)> = turns
        .iter()
        .map(|t| (t.start_ts, index[t.participant_id.as_str()]))
        .collect();
    by_start.sort_unstable();

    for t in &turns {
        let from = index[t.participant_id.as_str()];
        let lo = by_start.partition_point(|&(s, _)| s <= t.end_ts);
        let hi = by_start.partition_point(|&(s, _)| s <= t.end_ts + response_window_ms);
        for &(_, to) in &by_start[lo..hi] {
            counts[from][to] += 1;
        }
    }
    TurnMatrix {
        participants: participants.to_vec(),
        counts,
    }
}

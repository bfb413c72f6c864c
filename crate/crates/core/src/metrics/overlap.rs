use indexmap::IndexMap;

use super::TimeWindow;
use crate::signal::SpeakingEvent;

/// Union of one participant's intervals, clipped to the window.
fn clipped_union<'a>(
    spans: impl Iterator<Item = &'a SpeakingEvent>,
    window: TimeWindow,
) -> Vec<(i64, i64)> {
    let mut clipped: Vec<(i64, i64)> = spans
        .filter_map(|e| window.clip(e.start_ts, e.end_ts))
        .collect();
    clipped.sort_unstable();
    let mut merged: Vec<(i64, i64)> = Vec::with_capacity(clipped.len());
    for (s, e) in clipped {
        match merged.last_mut() {
            Some(m) if s <= m.1 => m.1 = m.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
}

/// Total speech per listed participant inside the window, in ms.
pub fn speaking_ms(
    events: &[SpeakingEvent],
    participants: &[String],
    window: TimeWindow,
) -> IndexMap<String, i64> {
    participants
        .iter()
        .map(|p| {
            let total = clipped_union(events.iter().filter(|e| &e.participant_id == p), window)
                .iter()
                .map(|(s, e)| e - s)
                .sum();
            (p.clone(), total)
        })
        .collect()
}

/// Percentage of speech time (timeline time with at least one speaker) during
/// which two or more participants speak at once. 0 when nobody speaks.
pub fn overlap_pct(events: &[SpeakingEvent], window: TimeWindow) -> f64 {
    let mut participants: Vec<&str> = events.iter().map(|e| e.participant_id.as_str()).collect();
    participants.sort_unstable();
    participants.dedup();

    let mut deltas: Vec<(i64, i32)> = Vec::new();
    for p in participants {
        for (s, e) in clipped_union(events.iter().filter(|e| e.participant_id == p), window) {
            deltas.push((s, 1));
            deltas.push((e, -1));
        }
    }
    deltas.sort_unstable();

    let (mut any, mut multi) = (0i64, 0i64);
    let mut active = 0i32;
    let mut i = 0;
    while i < deltas.len() {
        let t = deltas[i].0;
        while i < deltas.len() && deltas[i].0 == t {
            active += deltas[i].1;
            i += 1;
        }
        if let Some(&(next, _)) = deltas.get(i) {
            let span = next - t;
            if active >= 1 {
                any += span;
            }
            if active >= 2 {
                multi += span;
            }
        }
    }
    if any == 0 {
        0.0
    } else {
        100.0 * multi as f64 / any as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: i64, e: i64) -> TimeWindow {
        TimeWindow::new(s, e).unwrap()
    }

    #[test]
    fn disjoint_speech_has_no_overlap() {
        let ev = vec![
            SpeakingEvent::new("a", 0, 1000),
            SpeakingEvent::new("b", 1000, 2000),
        ];
        assert_eq!(overlap_pct(&ev, w(0, 5000)), 0.0);
    }

    #[test]
    fn identical_intervals_fully_overlap() {
        let ev = vec![
            SpeakingEvent::new("a", 100, 900),
            SpeakingEvent::new("b", 100, 900),
        ];
        assert_eq!(overlap_pct(&ev, w(0, 5000)), 100.0);
    }

    #[test]
    fn overlap_is_clipped_to_window() {
        let ev = vec![
            SpeakingEvent::new("a", 0, 2000),
            SpeakingEvent::new("b", 1000, 3000),
        ];
        // Whole: 1000 of 3000. Window [1500, 2500): all overlap until 2000, then b alone.
        assert!((overlap_pct(&ev, w(0, 5000)) - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(overlap_pct(&ev, w(1500, 2500)), 50.0);
    }

    #[test]
    fn nobody_speaking_is_zero() {
        assert_eq!(overlap_pct(&[], w(0, 10)), 0.0);
    }

    #[test]
    fn speaking_time_clips() {
        let ev = vec![
            SpeakingEvent::new("a", -500, 500),
            SpeakingEvent::new("a", 800, 1200),
        ];
        let s = speaking_ms(&ev, &["a".to_string(), "b".to_string()], w(0, 1000));
        assert_eq!(s["a"], 700);
        assert_eq!(s["b"], 0);
    }
}

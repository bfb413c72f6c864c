//! Independent oracles and shared fixtures for the integration suites.
#![allow(dead_code)]

use std::path::PathBuf;

use openbadge::hub::IngestBatch;
use openbadge::metrics::TimeWindow;
use openbadge::proximity::PathLossParams;
use openbadge::registry::GroupRegistry;
use openbadge::signal::{events_with_period, PipelineConfig, SpeakingEvent, VolumeSample};
use openbadge::sim::{
    simulate, BadgeConfig, BadgeTrace, ConversationScript, ScriptParticipant, SimOutput,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FIXTURE_START: i64 = 1_700_000_000_000;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn meeting_script() -> ConversationScript {
    ConversationScript::from_json_file(&fixture_path("three_person_meeting.json")).unwrap()
}

/// The scripted intervals of the meeting fixture as exact events.
pub fn meeting_events() -> Vec<SpeakingEvent> {
    let script = meeting_script();
    let mut out: Vec<SpeakingEvent> = script
        .participants
        .iter()
        .flat_map(|p| {
            p.speech_intervals.iter().map(|&(s, e)| {
                SpeakingEvent::new(p.id.clone(), FIXTURE_START + s, FIXTURE_START + e)
            })
        })
        .collect();
    out.sort_by(|a, b| (a.start_ts, &a.participant_id).cmp(&(b.start_ts, &b.participant_id)));
    out
}

pub fn meeting_window() -> TimeWindow {
    TimeWindow::new(FIXTURE_START, FIXTURE_START + 600_000).unwrap()
}

pub fn ids(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Hand-computed statistics of the meeting fixture over its full 10 minutes.
pub mod expected {
    pub const SPEAKING_MS: [(&str, i64); 3] = [("A", 235_500), ("B", 213_000), ("C", 158_500)];
    pub const TURNS: [(&str, u32); 3] = [("A", 4), ("B", 3), ("C", 3)];
    pub const TURN_RATE_PER_MIN: f64 = 1.0;
    /// 15 s of two-speaker time over 592 s of speech.
    pub const OVERLAP_PCT: f64 = 100.0 * 15_000.0 / 592_000.0;
    /// (2*1 - 4)*158500 + 0*213000 + 2*235500 over 3 * 607000.
    pub const GINI: f64 = 154_000.0 / 1_821_000.0;
    /// Rows A, B, C: who starts within 3 s after whom.
    pub const RESPONSES: [[u32; 3]; 3] = [[0, 2, 1], [2, 0, 1], [1, 0, 0]];
    pub const BALL: [f64; 2] = [0.1, 0.0];
    pub const INTENSITY: f64 = 0.05;
}

// ---- signal oracles ----

/// Median of a sorted copy of each shrunken centered window.
pub fn median_oracle(values: &[f64], window: usize) -> Vec<f64> {
    let n = values.len();
    let half = window / 2;
    (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let mut w = values[i - h..=i + h].to_vec();
            w.sort_by(|a, b| a.partial_cmp(b).unwrap());
            w[w.len() / 2]
        })
        .collect()
}

/// Enumerates maximal runs of marked samples directly from the index list.
pub fn detect_oracle(samples: &[VolumeSample], cfg: &PipelineConfig) -> Vec<SpeakingEvent> {
    let mut events = Vec::new();
    let mut pids: Vec<&str> = samples.iter().map(|s| s.participant_id.as_str()).collect();
    pids.sort();
    pids.dedup();
    for pid in pids {
        let mine: Vec<&VolumeSample> = samples.iter().filter(|s| s.participant_id == pid).collect();
        let mut period = i64::MAX;
        for i in 1..mine.len() {
            let d = mine[i].ts - mine[i - 1].ts;
            if d > 0 && d < period {
                period = d;
            }
        }
        if period == i64::MAX {
            continue;
        }
        let marked: Vec<usize> = (0..mine.len())
            .filter(|&i| mine[i].value >= cfg.speak_threshold)
            .collect();
        let joins = |a: usize, b: usize| mine[b].ts - (mine[a].ts + period) <= cfg.max_gap_ms;
        let mut k = 0;
        while k < marked.len() {
            let mut j = k;
            while j + 1 < marked.len() && joins(marked[j], marked[j + 1]) {
                j += 1;
            }
            let (first, last) = (marked[k], marked[j]);
            let start = mine[first].ts;
            let end = mine[marked[k..=j]
                .iter()
                .copied()
                .max_by_key(|&i| mine[i].ts)
                .unwrap()]
            .ts + period;
            let vals: Vec<f64> = mine[first..=last].iter().map(|s| s.value).collect();
            if end - start >= cfg.min_event_ms && cv_oracle(&vals) >= cfg.modulation_cv_min {
                events.push(SpeakingEvent::new(pid, start, end));
            }
            k = j + 1;
        }
    }
    events.sort_by(|a, b| (a.start_ts, &a.participant_id).cmp(&(b.start_ts, &b.participant_id)));
    events
}

pub fn cv_oracle(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return 0.0;
    }
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt() / mean
}

/// Volume series of alternating quiet stretches and modulated bursts, with
/// the occasional steady tone and isolated spike.
pub fn random_volume_series(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<VolumeSample> {
    let period: i64 = if rng.random_bool(0.5) { 10 } else { 250 };
    let len = rng.random_range(1..=max_len);
    let mut values = Vec::with_capacity(len);
    while values.len() < len {
        let seg = rng.random_range(1..=80usize);
        match rng.random_range(0..5) {
            0 | 1 => values.extend((0..seg).map(|_| rng.random_range(0.0..0.04))),
            2 => {
                let base = rng.random_range(0.06..0.8);
                values.extend((0..seg).map(|_| (base * rng.random_range(0.5..1.5f64)).min(1.0)));
            }
            3 => values.extend(std::iter::repeat_n(rng.random_range(0.05..0.5), seg)),
            _ => values.push(rng.random_range(0.0..1.0)),
        }
    }
    values.truncate(len);
    let start = rng.random_range(0..1_000_000i64);
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| VolumeSample::new("p", start + i as i64 * period, v))
        .collect()
}

// ---- metrics oracles ----

/// Random events for up to `max_p` participants inside roughly `span_ms`.
pub fn random_events(
    rng: &mut ChaCha8Rng,
    max_events: usize,
    max_p: usize,
    span_ms: i64,
) -> (Vec<String>, Vec<SpeakingEvent>) {
    let n_p = rng.random_range(1..=max_p);
    let participants: Vec<String> = (0..n_p).map(|i| format!("p{i}")).collect();
    let n_e = rng.random_range(0..=max_events);
    let events = (0..n_e)
        .map(|_| {
            let p = &participants[rng.random_range(0..n_p)];
            let start = rng.random_range(-span_ms / 10..span_ms);
            let len = rng.random_range(1..span_ms / 8);
            SpeakingEvent::new(p.clone(), start, start + len)
        })
        .collect();
    (participants, events)
}

/// Per-ms sweep: share of speech milliseconds with two or more speakers.
pub fn overlap_oracle(events: &[SpeakingEvent], participants: &[String], w: TimeWindow) -> f64 {
    let len = (w.end_ts - w.start_ts) as usize;
    let mut counts = vec![0u8; len];
    for p in participants {
        let mut mine = vec![false; len];
        for e in events.iter().filter(|e| &e.participant_id == p) {
            let s = e.start_ts.clamp(w.start_ts, w.end_ts) - w.start_ts;
            let t = e.end_ts.clamp(w.start_ts, w.end_ts) - w.start_ts;
            for m in &mut mine[s as usize..t as usize] {
                *m = true;
            }
        }
        for (c, m) in counts.iter_mut().zip(mine) {
            *c += u8::from(m);
        }
    }
    let any = counts.iter().filter(|c| **c >= 1).count();
    let multi = counts.iter().filter(|c| **c >= 2).count();
    if any == 0 {
        0.0
    } else {
        100.0 * multi as f64 / any as f64
    }
}

/// Mean absolute pairwise difference over twice the mean.
pub fn gini_oracle(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for a in x {
        for b in x {
            s += (a - b).abs();
        }
    }
    s / (2.0 * n * n * mean)
}

/// Turns by repeatedly absorbing any event within the gap of a cluster until
/// nothing changes, then keeping clusters that touch the window.
pub fn turns_oracle(events: &[SpeakingEvent], p: &str, w: TimeWindow, gap: i64) -> Vec<(i64, i64)> {
    let mut clusters: Vec<(i64, i64)> = events
        .iter()
        .filter(|e| e.participant_id == p)
        .map(|e| (e.start_ts, e.end_ts))
        .collect();
    loop {
        let mut merged = false;
        'outer: for i in 0..clusters.len() {
            for j in 0..clusters.len() {
                if i == j {
                    continue;
                }
                let (a, b) = (clusters[i], clusters[j]);
                // b starts no later than gap after a ends, and not before a starts
                if b.0 >= a.0 && b.0 - a.1 <= gap {
                    clusters[i] = (a.0, a.1.max(b.1));
                    clusters.remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    let mut out: Vec<(i64, i64)> = clusters
        .into_iter()
        .filter(|&(s, e)| s < w.end_ts && e > w.start_ts)
        .collect();
    out.sort();
    out
}

pub fn response_oracle(
    events: &[SpeakingEvent],
    participants: &[String],
    w: TimeWindow,
    gap: i64,
    rw: i64,
) -> Vec<Vec<u32>> {
    let turns: Vec<Vec<(i64, i64)>> = participants
        .iter()
        .map(|p| turns_oracle(events, p, w, gap))
        .collect();
    let n = participants.len();
    let mut m = vec![vec![0u32; n]; n];
    for i in 0..n {
        for &(_, end) in &turns[i] {
            for j in 0..n {
                m[i][j] += turns[j]
                    .iter()
                    .filter(|&&(s, _)| s > end && s <= end + rw)
                    .count() as u32;
            }
        }
    }
    m
}

// ---- simulation helpers ----

pub fn meeting_sim() -> SimOutput {
    simulate(
        &meeting_script(),
        &[
            BadgeConfig::hardware(),
            BadgeConfig::hardware(),
            BadgeConfig::hardware(),
        ],
    )
    .unwrap()
}

/// The simulated meeting as one ingest batch per minute: the k-th chunk of
/// every badge plus the scans taken during that minute.
pub fn meeting_batches() -> (GroupRegistry, Vec<IngestBatch>) {
    let out = meeting_sim();
    let minutes = out.badges.iter().map(|b| b.chunks.len()).max().unwrap_or(0);
    let batches = (0..minutes)
        .map(|k| {
            let lo = FIXTURE_START + k as i64 * 60_000;
            IngestBatch {
                chunks: out
                    .badges
                    .iter()
                    .filter_map(|b| b.chunks.get(k).cloned())
                    .collect(),
                scans: out
                    .badges
                    .iter()
                    .flat_map(|b| {
                        b.scans
                            .iter()
                            .filter(|s| (lo..lo + 60_000).contains(&s.ts))
                            .cloned()
                    })
                    .collect(),
                clock_offset_ms: 0,
            }
        })
        .collect();
    (out.registry, batches)
}

/// Volume samples of one badge trace, keyed by its participant.
pub fn trace_samples(trace: &BadgeTrace) -> Vec<VolumeSample> {
    trace
        .chunks
        .iter()
        .flat_map(|c| {
            c.values.iter().enumerate().map(move |(i, v)| {
                VolumeSample::new(
                    trace.participant_id.clone(),
                    c.start_ts + i as i64 * i64::from(c.period_ms),
                    *v,
                )
            })
        })
        .collect()
}

pub fn trace_events(trace: &BadgeTrace, cfg: &PipelineConfig) -> Vec<SpeakingEvent> {
    let period = trace.chunks.first().map_or(250, |c| i64::from(c.period_ms));
    let samples = trace_samples(trace);
    if samples.is_empty() {
        return Vec::new();
    }
    events_with_period(&samples, period, cfg).unwrap()
}

/// Scripts the pipeline is expected to recover: speakers at least 2.5 m
/// apart, speech louder than 0.2, turns of 2 s or more separated by 2 s or
/// more of own silence.
pub fn random_script(rng: &mut ChaCha8Rng, duration_ms: i64) -> ConversationScript {
    let n = rng.random_range(2..=4usize);
    let participants = (0..n)
        .map(|i| {
            let angle = std::f64::consts::TAU * i as f64 / n as f64;
            let mut intervals = Vec::new();
            let mut t = rng.random_range(0..4000i64);
            loop {
                let len = rng.random_range(2000..20_000i64);
                if t + len > duration_ms {
                    break;
                }
                intervals.push((t, t + len));
                t += len + rng.random_range(2000..30_000i64);
            }
            ScriptParticipant {
                id: format!("p{i}"),
                position_xy_m: [2.5 * angle.cos(), 2.5 * angle.sin()],
                base_volume: rng.random_range(0.2..0.8),
                speech_intervals: intervals,
                badge_id: None,
                beacon_id: None,
                display_name: None,
            }
        })
        .collect();
    ConversationScript {
        duration_ms,
        participants,
        noise_floor: 0.02,
        rng_seed: rng.random(),
        start_ts: FIXTURE_START,
        group_id: "g1".into(),
        path_loss: PathLossParams::default(),
        rssi_noise_db: 4.0,
        bleed_at_1m: 0.1,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

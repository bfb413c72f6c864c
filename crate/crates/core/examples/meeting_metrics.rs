//! Group metrics for the bundled three-person meeting: speaking time, turns,
//! overlap, inequality, who responds to whom, and the mediator view.
//!
//! Run with `cargo run --example meeting_metrics`.

use std::path::Path;

use openbadge::metrics::{
    mediator_state, response_matrix, window_stats, Inequality, MetricsConfig, TimeWindow,
};
use openbadge::signal::SpeakingEvent;
use openbadge::sim::ConversationScript;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/three_person_meeting.json");
    let script = ConversationScript::from_json_file(&path).expect("fixture");
    let ids: Vec<String> = script.participants.iter().map(|p| p.id.clone()).collect();
    let events: Vec<SpeakingEvent> = script
        .participants
        .iter()
        .flat_map(|p| {
            p.speech_intervals.iter().map(|&(s, e)| {
                SpeakingEvent::new(p.id.clone(), script.start_ts + s, script.start_ts + e)
            })
        })
        .collect();
    let window = TimeWindow::new(script.start_ts, script.end_ts()).unwrap();

    let cfg = MetricsConfig::default();
    let stats = window_stats(&events, &ids, window, &cfg);
    println!("{}", serde_json::to_string_pretty(&stats).unwrap());

    let entropy = MetricsConfig {
        inequality: Inequality::NormalizedEntropy,
        ..cfg.clone()
    };
    println!(
        "entropy-based inequality: {:.4}",
        window_stats(&events, &ids, window, &entropy).gini
    );

    let m = response_matrix(
        &events,
        &ids,
        window,
        cfg.turn_gap_ms,
        cfg.response_window_ms,
    );
    println!("responses (row speaks, column follows within 3 s):");
    for (from, row) in m.participants.iter().zip(&m.counts) {
        println!("  {from}: {row:?}");
    }

    let med = mediator_state(&stats, cfg.rate_max).unwrap();
    println!("mediator: {}", serde_json::to_string(&med).unwrap());
}

//! Simulating badges for a scripted meeting and recovering who spoke when.
//! Hardware badges sample every 250 ms, phones every 50 ms.
//!
//! Run with `cargo run --example simulate_meeting`.

use std::path::Path;

use openbadge::metrics::{speaking_ms, TimeWindow};
use openbadge::signal::{events_with_period, PipelineConfig, SpeakingEvent, VolumeSample};
use openbadge::sim::{simulate, BadgeConfig, ConversationScript};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/three_person_meeting.json");
    let script = ConversationScript::from_json_file(&path).expect("fixture");
    let ids: Vec<String> = script.participants.iter().map(|p| p.id.clone()).collect();
    let window = TimeWindow::new(script.start_ts, script.end_ts()).unwrap();
    let cfg = PipelineConfig::default();

    for (name, config) in [
        ("hardware", BadgeConfig::hardware()),
        ("phone", BadgeConfig::phone()),
    ] {
        let out = simulate(&script, &vec![config; ids.len()]).expect("simulation");
        let mut events: Vec<SpeakingEvent> = Vec::new();
        for badge in &out.badges {
            let samples: Vec<VolumeSample> = badge
                .chunks
                .iter()
                .flat_map(|c| {
                    c.values.iter().enumerate().map(move |(i, v)| {
                        VolumeSample::new(
                            &badge.participant_id,
                            c.start_ts + i as i64 * i64::from(c.period_ms),
                            *v,
                        )
                    })
                })
                .collect();
            let period = i64::from(badge.config.volume_period_ms);
            events.extend(events_with_period(&samples, period, &cfg).expect("valid series"));
        }
        let recovered = speaking_ms(&events, &ids, window);
        println!(
            "{name}: {} chunks per badge, {} events",
            out.badges[0].chunks.len(),
            events.len()
        );
        for p in &script.participants {
            let got = recovered[&p.id];
            let want = p.speaking_ms();
            let err = 100.0 * (got - want).abs() as f64 / want as f64;
            println!(
                "  {}: scripted {want} ms, detected {got} ms ({err:.2}% off)",
                p.id
            );
        }
    }
}

//! A hub pulling badges whose clocks are off by up to two seconds. Each pull
//! measures the offset, stores chunks on hub time, acknowledges, and nudges
//! the badge clock back into line.
//!
//! Run with `cargo run --example hub_pull_sync`.

use std::path::Path;
use std::sync::Arc;

use openbadge::hub::{
    Clock, Hub, HubConfig, InProcessLink, IngestBatch, ManualClock, PullScheduler, Puller,
};
use openbadge::metrics::TimeWindow;
use openbadge::sim::{simulate, BadgeConfig, ConversationScript, SimulatedBadge};
use parking_lot::Mutex;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/three_person_meeting.json");
    let script = ConversationScript::from_json_file(&path).expect("fixture");
    let configs: Vec<BadgeConfig> = [1800, -1200, 650]
        .into_iter()
        .map(|offset| BadgeConfig::hardware().with_clock(offset, 20.0))
        .collect();
    let out = simulate(&script, &configs).expect("simulation");

    let dir = tempfile::tempdir().unwrap();
    let hub = Arc::new(Hub::open(HubConfig::with_data_dir(dir.path())).unwrap());
    hub.register(out.registry.clone()).unwrap();
    // Scans travel separately from the volume pulls.
    let scans = out.badges.iter().flat_map(|b| b.scans.clone()).collect();
    hub.ingest(
        &IngestBatch {
            scans,
            ..Default::default()
        },
        None,
    )
    .unwrap();

    let clock = ManualClock::new(script.start_ts);
    let mut sched = PullScheduler::new(Puller::new(hub.clone(), Arc::new(clock.clone())), 60_000);
    for t in &out.badges {
        let badge = Arc::new(Mutex::new(SimulatedBadge::from_trace(t, &script)));
        sched.add(
            t.badge_id.clone(),
            Box::new(InProcessLink::new(badge, clock.clone(), 20)),
        );
    }

    while clock.now_ms() <= script.end_ts() + 60_000 {
        for (name, res) in sched.tick(clock.now_ms()) {
            match res {
                Ok(o) if o.chunks_received > 0 => println!(
                    "t+{:>3}s {name}: offset {:+} ms, stored {}, cursor {}",
                    (clock.now_ms() - script.start_ts) / 1000,
                    o.offset_ms,
                    o.report.chunks_stored,
                    o.cursor.last_acked_seq
                ),
                Ok(_) => {}
                Err(e) => println!("{name}: {e}"),
            }
        }
        clock.advance(60_000);
    }

    let window = TimeWindow::new(script.start_ts, script.end_ts()).unwrap();
    let stats = hub.stats(&script.group_id, window).unwrap();
    for p in &script.participants {
        println!(
            "{}: scripted {} ms, hub {} ms",
            p.id,
            p.speaking_ms(),
            stats.speaking_ms[&p.id]
        );
    }
}

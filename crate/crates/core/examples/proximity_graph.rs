//! Estimating who sits near whom from BLE scans with the log-distance model.
//!
//! Run with `cargo run --example proximity_graph`.

use std::path::Path;

use openbadge::metrics::TimeWindow;
use openbadge::proximity::{
    build_graph, estimate_distance, partition_by_group, resolve_participants, PathLossParams,
};
use openbadge::sim::{simulate, BadgeConfig, ConversationScript};

fn main() {
    let params = PathLossParams::default();
    println!("reference curve:");
    for rssi in [-59.0, -65.0, -71.0, -79.0] {
        println!("  {rssi} dBm -> {:.2} m", estimate_distance(rssi, &params));
    }

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/three_person_meeting.json");
    let script = ConversationScript::from_json_file(&path).expect("fixture");
    let configs = vec![BadgeConfig::hardware(); script.participants.len()];
    let out = simulate(&script, &configs).expect("simulation");
    let scans: Vec<_> = out.badges.iter().flat_map(|b| b.scans.clone()).collect();

    let (kept, report) = partition_by_group(&scans, &out.registry);
    let in_group: Vec<_> = kept.into_iter().map(|(_, o)| o.clone()).collect();
    println!("{} scans kept, filter report {report:?}", in_group.len());
    let window = TimeWindow::new(script.start_ts, script.end_ts()).unwrap();
    let graph = build_graph(
        &resolve_participants(&in_group, &out.registry),
        window,
        &params,
        3,
    );

    for e in &graph.edges {
        let pa = script.participants.iter().find(|p| p.id == e.a).unwrap();
        let pb = script.participants.iter().find(|p| p.id == e.b).unwrap();
        let truth = ((pa.position_xy_m[0] - pb.position_xy_m[0]).powi(2)
            + (pa.position_xy_m[1] - pb.position_xy_m[1]).powi(2))
        .sqrt();
        println!(
            "{}-{}: median {:.1} dBm over {} scans, estimated {:.2} m, actual {:.2} m",
            e.a, e.b, e.median_rssi, e.observations, e.est_distance_m, truth
        );
    }
}

mod common;

use common::rng;
use openbadge::metrics::TimeWindow;
use openbadge::proximity::{
    build_graph, estimate_distance, filter_to_group, partition_by_group, resolve_participants,
    PathLossParams, ProximityObservation,
};
use openbadge::registry::{GroupEntry, GroupRegistry, ParticipantEntry};
use openbadge::sim::rssi_from_distance;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn member(p: &str) -> ParticipantEntry {
    ParticipantEntry {
        participant_id: p.into(),
        badge_id: format!("badge-{p}"),
        beacon_id: format!("beacon-{p}"),
        display_name: String::new(),
    }
}

fn registry() -> GroupRegistry {
    let mut r = GroupRegistry::default();
    r.groups.insert(
        "g1".into(),
        GroupEntry {
            participants: vec![member("a"), member("b"), member("c")],
        },
    );
    r.groups.insert(
        "g2".into(),
        GroupEntry {
            participants: vec![member("x"), member("y")],
        },
    );
    r
}

fn obs(s: &str, b: &str, rssi: i32, ts: i64) -> ProximityObservation {
    ProximityObservation {
        scanner_id: s.into(),
        beacon_id: b.into(),
        rssi_dbm: rssi,
        ts,
    }
}

#[test]
fn reference_distances() {
    let p = PathLossParams::default();
    assert!((estimate_distance(-59.0, &p) - 1.0).abs() < 1e-12);
    assert!((estimate_distance(-79.0, &p) - 10.0).abs() < 1e-12);
    assert!((estimate_distance(-69.0, &p) - 10f64.sqrt()).abs() < 1e-12);
    assert!(PathLossParams { exponent: 0.5, ..p }.validate().is_err());
}

#[test]
fn path_loss_round_trips_on_a_grid() {
    for n in [1.5, 2.0, 2.7, 4.0] {
        let p = PathLossParams {
            exponent: n,
            ..Default::default()
        };
        for k in 1..=200 {
            let d = k as f64 * 0.05;
            let back = estimate_distance(rssi_from_distance(d, &p, 0.0).unwrap(), &p);
            assert!((back - d).abs() / d < 1e-9, "n={n} d={d}");
        }
    }
    assert!(rssi_from_distance(0.0, &PathLossParams::default(), 0.0).is_err());
}

#[test]
fn scans_outside_the_group_are_dropped() {
    let reg = registry();
    let all = vec![
        obs("badge-a", "beacon-b", -60, 1),
        obs("badge-a", "beacon-x", -60, 2),
        obs("badge-z", "beacon-a", -60, 3),
        obs("badge-a", "beacon-a", -60, 4),
        obs("badge-x", "beacon-y", -70, 5),
    ];
    let (kept, report) = partition_by_group(&all, &reg);
    assert_eq!(
        kept.iter()
            .map(|(g, o)| (g.as_str(), o.ts))
            .collect::<Vec<_>>(),
        vec![("g1", 1), ("g2", 5)]
    );
    assert_eq!(
        (report.kept, report.unknown_ids, report.cross_group),
        (2, 1, 2)
    );
    let resolved = resolve_participants(&filter_to_group(&all, &reg), &reg);
    assert_eq!(resolved[0].scanner_id, "a");
    assert_eq!(resolved[0].beacon_id, "b");
}

#[test]
fn graph_pools_directions_and_respects_min_obs() {
    let w = TimeWindow::new(0, 100).unwrap();
    let o = vec![
        obs("a", "b", -60, 1),
        obs("b", "a", -70, 2),
        obs("a", "c", -65, 3),
        obs("a", "b", -80, 200),
    ];
    let g = build_graph(&o, w, &PathLossParams::default(), 2);
    assert_eq!(g.nodes, vec!["a", "b", "c"]);
    assert_eq!(g.edges.len(), 1);
    assert_eq!((g.edges[0].a.as_str(), g.edges[0].b.as_str()), ("a", "b"));
    assert_eq!(g.edges[0].median_rssi, -65.0);
    assert_eq!(g.edges[0].observations, 2);
}

#[test]
fn simulated_triangle_recovers_side_length() {
    // Three badges 3 m apart, 60 noisy scans per direction.
    let p = PathLossParams::default();
    let mut r = rng(9);
    let mut o = Vec::new();
    for (s, b) in [
        ("a", "b"),
        ("b", "a"),
        ("a", "c"),
        ("c", "a"),
        ("b", "c"),
        ("c", "b"),
    ] {
        for t in 0..60 {
            let noise: f64 = r.random_range(-4.0..4.0);
            let rssi = rssi_from_distance(3.0, &p, noise).unwrap().round() as i32;
            o.push(obs(s, b, rssi, t * 1000));
        }
    }
    let g = build_graph(&o, TimeWindow::new(0, 60_000).unwrap(), &p, 2);
    assert_eq!(g.edges.len(), 3);
    for e in &g.edges {
        assert!((e.est_distance_m - 3.0).abs() < 0.5, "{e:?}");
    }
}

proptest! {
    #[test]
    fn distance_is_monotone_decreasing_in_rssi(a in -120.0f64..0.0, b in -120.0f64..0.0, n in 1.0f64..6.0) {
        let p = PathLossParams { exponent: n, ..Default::default() };
        prop_assume!(a < b);
        prop_assert!(estimate_distance(a, &p) > estimate_distance(b, &p));
    }

    #[test]
    fn path_loss_round_trip(d in 0.01f64..100.0, n in 1.0f64..6.0, r1 in -100.0f64..-20.0) {
        let p = PathLossParams { exponent: n, rssi_at_1m: r1 };
        let back = estimate_distance(rssi_from_distance(d, &p, 0.0).unwrap(), &p);
        prop_assert!((back - d).abs() / d < 1e-9);
    }

    #[test]
    fn graph_is_symmetric_and_order_free(seed in any::<u64>()) {
        let mut r = rng(seed);
        let ids = ["a", "b", "c", "d"];
        let mut o: Vec<ProximityObservation> = (0..r.random_range(0..60))
            .map(|_| {
                let s = ids[r.random_range(0..4)];
                let b = ids[r.random_range(0..4)];
                obs(s, b, r.random_range(-100..-30), r.random_range(0..1000))
            })
            .collect();
        let w = TimeWindow::new(0, 1000).unwrap();
        let p = PathLossParams::default();
        let g = build_graph(&o, w, &p, 2);
        let swapped: Vec<ProximityObservation> = o
            .iter()
            .map(|x| ProximityObservation { scanner_id: x.beacon_id.clone(), beacon_id: x.scanner_id.clone(), ..x.clone() })
            .collect();
        prop_assert_eq!(&build_graph(&swapped, w, &p, 2).edges, &g.edges);
        o.shuffle(&mut r);
        prop_assert_eq!(&build_graph(&o, w, &p, 2), &g);
        for e in &g.edges {
            prop_assert!(e.a < e.b);
            prop_assert!(e.observations >= 2);
        }
    }

    #[test]
    fn filtering_keeps_only_same_group_pairs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let reg = registry();
        let people = ["a", "b", "c", "x", "y", "z"];
        let o: Vec<ProximityObservation> = (0..40)
            .map(|t| {
                let s = people[r.random_range(0..6)];
                let b = people[r.random_range(0..6)];
                obs(&format!("badge-{s}"), &format!("beacon-{b}"), -60, t)
            })
            .collect();
        let (kept, report) = partition_by_group(&o, &reg);
        prop_assert_eq!(report.kept + report.unknown_ids + report.cross_group, o.len());
        for (g, x) in kept {
            let s = reg.by_badge(&x.scanner_id).unwrap();
            let b = reg.by_beacon(&x.beacon_id).unwrap();
            prop_assert_eq!(s.group_id, g.as_str());
            prop_assert_eq!(b.group_id, g.as_str());
            prop_assert_ne!(s.participant.participant_id.as_str(), b.participant.participant_id.as_str());
        }
    }
}

//! BLE proximity: RSSI to distance, group filtering, and the per-window
//! proximity graph.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::TimeWindow;
use crate::registry::GroupRegistry;

#[derive(Debug, Error, PartialEq)]
pub enum ProximityError {
    #[error("invalid path-loss parameters: {0}")]
    Params(String),
    #[error("invalid observation: {0}")]
    Observation(String),
}

/// One RSSI reading of `beacon_id` taken by `scanner_id`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProximityObservation {
    pub scanner_id: String,
    pub beacon_id: String,
    pub rssi_dbm: i32,
    pub ts: i64,
}

impl ProximityObservation {
    pub fn validate(&self) -> Result<(), ProximityError> {
        if !(-120..=0).contains(&self.rssi_dbm) {
            return Err(ProximityError::Observation(format!(
                "rssi {} dBm outside [-120, 0]",
                self.rssi_dbm
            )));
        }
        if self.scanner_id == self.beacon_id {
            return Err(ProximityError::Observation(format!(
                "{} observed itself",
                self.scanner_id
            )));
        }
        Ok(())
    }
}

/// Log-distance path loss model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathLossParams {
    pub rssi_at_1m: f64,
    pub exponent: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            rssi_at_1m: -59.0,
            exponent: 2.0,
        }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<(), ProximityError> {
        if !(1.0..=6.0).contains(&self.exponent) {
            return Err(ProximityError::Params(format!(
                "exponent {} outside [1, 6]",
                self.exponent
            )));
        }
        if !(-100.0..=-20.0).contains(&self.rssi_at_1m) {
            return Err(ProximityError::Params(format!(
                "rssi_at_1m {} outside [-100, -20]",
                self.rssi_at_1m
            )));
        }
        Ok(())
    }
}

/// Distance in meters for a received signal strength:
/// `10^((rssi_at_1m - rssi) / (10 n))`.
pub fn estimate_distance(rssi_dbm: f64, params: &PathLossParams) -> f64 {
    10f64.powf((params.rssi_at_1m - rssi_dbm) / (10.0 * params.exponent))
}

/// Outcome of checking scans against the registry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanFilterReport {
    pub kept: usize,
    pub unknown_ids: usize,
    pub cross_group: usize,
}

/// Keeps scans whose scanner badge and beacon are registered in the same
/// group; returns them paired with that group id.
pub fn partition_by_group<'a>(
    observations: &'a [ProximityObservation],
    registry: &GroupRegistry,
) -> (Vec<(String, &'a ProximityObservation)>, ScanFilterReport) {
    let mut report = ScanFilterReport::default();
    let mut kept = Vec::new();
    for obs in observations {
        match (
            registry.by_badge(&obs.scanner_id),
            registry.by_beacon(&obs.beacon_id),
        ) {
            (Some(scanner), Some(beacon)) => {
                if scanner.group_id == beacon.group_id
                    && scanner.participant.participant_id != beacon.participant.participant_id
                {
                    kept.push((scanner.group_id.to_string(), obs));
                } else {
                    report.cross_group += 1;
                }
            }
            _ => report.unknown_ids += 1,
        }
    }
    report.kept = kept.len();
    (kept, report)
}

pub fn filter_to_group(
    observations: &[ProximityObservation],
    registry: &GroupRegistry,
) -> Vec<ProximityObservation> {
    partition_by_group(observations, registry)
        .0
        .into_iter()
        .map(|(_, o)| o.clone())
        .collect()
}

/// Rewrites device ids to participant ids. Observations that do not resolve
/// are dropped.
pub fn resolve_participants(
    observations: &[ProximityObservation],
    registry: &GroupRegistry,
) -> Vec<ProximityObservation> {
    observations
        .iter()
        .filter_map(|o| {
            let scanner = registry.by_badge(&o.scanner_id)?;
            let beacon = registry.by_beacon(&o.beacon_id)?;
            Some(ProximityObservation {
                scanner_id: scanner.participant.participant_id.clone(),
                beacon_id: beacon.participant.participant_id.clone(),
                ..o.clone()
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityEdge {
    pub a: String,
    pub b: String,
    pub median_rssi: f64,
    pub est_distance_m: f64,
    pub observations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityGraph {
    pub window: TimeWindow,
    pub nodes: Vec<String>,
    pub edges: Vec<ProximityEdge>,
}

fn median(values: &mut [i32]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        f64::from(values[n / 2])
    } else {
        (f64::from(values[n / 2 - 1]) + f64::from(values[n / 2])) / 2.0
    }
}

/// Pools both scan directions of every unordered pair seen inside the window
/// and emits an edge once a pair has at least `min_obs` readings.
///
/// Ids are used as given; call [`resolve_participants`] first to key the
/// graph by participant.
pub fn build_graph(
    observations: &[ProximityObservation],
    window: TimeWindow,
    params: &PathLossParams,
    min_obs: usize,
) -> ProximityGraph {
    let mut pairs: BTreeMap<(&str, &str), Vec<i32>> = BTreeMap::new();
    let mut nodes: Vec<String> = Vec::new();
    for o in observations
        .iter()
        .filter(|o| window.contains(o.ts) && o.scanner_id != o.beacon_id)
    {
        let key = if o.scanner_id <= o.beacon_id {
            (o.scanner_id.as_str(), o.beacon_id.as_str())
        } else {
            (o.beacon_id.as_str(), o.scanner_id.as_str())
        };
        pairs.entry(key).or_default().push(o.rssi_dbm);
        nodes.push(o.scanner_id.clone());
        nodes.push(o.beacon_id.clone());
    }
    nodes.sort();
    nodes.dedup();

    let edges = pairs
        .into_iter()
        .filter(|(_, r)| r.len() >= min_obs.max(1))
        .map(|((a, b), mut rssi)| {
            let median_rssi = median(&mut rssi);
            ProximityEdge {
                a: a.to_string(),
                b: b.to_string(),
                median_rssi,
                est_distance_m: estimate_distance(median_rssi, params),
                observations: rssi.len(),
            }
        })
        .collect();
    ProximityGraph {
        window,
        nodes,
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::{GroupEntry, ParticipantEntry};

    fn obs(s: &str, b: &str, rssi: i32, ts: i64) -> ProximityObservation {
        ProximityObservation {
            scanner_id: s.into(),
            beacon_id: b.into(),
            rssi_dbm: rssi,
            ts,
        }
    }

    fn registry() -> GroupRegistry {
        let p = |id: &str| ParticipantEntry {
            participant_id: id.into(),
            badge_id: format!("phone-{id}"),
            beacon_id: format!("bcn-{id}"),
            display_name: String::new(),
        };
        let mut reg = GroupRegistry::default();
        reg.groups.insert(
            "g1".into(),
            GroupEntry {
                participants: vec![p("a"), p("b")],
            },
        );
        reg.groups.insert(
            "g2".into(),
            GroupEntry {
                participants: vec![p("c"), p("d")],
            },
        );
        reg
    }

    #[test]
    fn reference_distance_is_one_meter() {
        let p = PathLossParams::default();
        assert_eq!(estimate_distance(-59.0, &p), 1.0);
        assert!((estimate_distance(-79.0, &p) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(PathLossParams {
            rssi_at_1m: -59.0,
            exponent: 0.5
        }
        .validate()
        .is_err());
        assert!(PathLossParams {
            rssi_at_1m: -10.0,
            exponent: 2.0
        }
        .validate()
        .is_err());
        PathLossParams::default().validate().unwrap();
    }

    #[test]
    fn observation_validation() {
        assert!(obs("a", "b", 5, 0).validate().is_err());
        assert!(obs("a", "a", -50, 0).validate().is_err());
        obs("a", "b", -50, 0).validate().unwrap();
    }

    #[test]
    fn empty_registry_keeps_nothing() {
        assert!(filter_to_group(
            &[obs("phone-a", "bcn-b", -60, 0)],
            &GroupRegistry::default()
        )
        .is_empty());
    }

    #[test]
    fn mixed_groups_filtered() {
        let scans = vec![
            obs("phone-a", "bcn-b", -60, 0),
            obs("phone-b", "bcn-a", -61, 0),
            obs("phone-c", "bcn-d", -62, 0),
            obs("phone-d", "bcn-c", -63, 0),
            obs("phone-a", "bcn-c", -64, 0),
            obs("phone-x", "bcn-a", -65, 0),
        ];
        let kept = filter_to_group(&scans, &registry());
        assert_eq!(kept, scans[..4].to_vec());
        let (_, report) = partition_by_group(&scans, &registry());
        assert_eq!(
            report,
            ScanFilterReport {
                kept: 4,
                unknown_ids: 1,
                cross_group: 1
            }
        );
    }

    #[test]
    fn empty_graph() {
        let g = build_graph(
            &[],
            TimeWindow::new(0, 1).unwrap(),
            &PathLossParams::default(),
            2,
        );
        assert!(g.nodes.is_empty() && g.edges.is_empty());
    }

    #[test]
    fn median_edge_and_pooling() {
        let w = TimeWindow::new(0, 1000).unwrap();
        let scans = vec![
            obs("a", "b", -60, 10),
            obs("a", "b", -80, 20),
            obs("b", "a", -70, 30),
            obs("a", "b", -10, 5000),
        ];
        let g = build_graph(&scans, w, &PathLossParams::default(), 2);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].median_rssi, -70.0);
        assert_eq!(g.edges[0].observations, 3);
        assert_eq!(
            build_graph(&scans, w, &PathLossParams::default(), 4)
                .edges
                .len(),
            0
        );
    }

    #[test]
    fn resolve_maps_devices_to_participants() {
        let r = resolve_participants(
            &[obs("phone-a", "bcn-b", -60, 0), obs("zz", "bcn-b", -60, 0)],
            &registry(),
        );
        assert_eq!(r, vec![obs("a", "b", -60, 0)]);
    }
}

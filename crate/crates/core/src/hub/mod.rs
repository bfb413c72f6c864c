//! Base station: registry, durable store, badge sync and the query surface
//! behind the REST API.

mod clock;
mod config;
mod series;
pub mod server;
mod store;
mod sync;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{
    mediator_state, response_matrix, window_stats, MediatorState, MetricsError, TimeWindow,
    TurnMatrix, WindowStats,
};
use crate::proximity::{
    build_graph, partition_by_group, resolve_participants, ProximityGraph, ProximityObservation,
};
use crate::registry::{GroupRegistry, RegistryError};
use crate::signal::{SpeakingEvent, VolumeSample};
use crate::sim::SampleChunk;

pub use clock::{Clock, ManualClock, SystemClock};
pub use config::{ConfigError, HubConfig, DATA_DIR_ENV};
pub use series::{ParticipantSeries, Update};
pub use store::{Entry, Segment, SegmentKind};
pub use sync::{
    serve_badge, BadgeLink, InProcessLink, LinkError, PullCursor, PullOutcome, PullScheduler,
    Puller, SyncError, TcpLink, TimeSyncResult,
};

#[derive(Debug, Error)]
pub enum HubError {
    #[error("unknown group {0:?}")]
    UnknownGroup(String),
    #[error("invalid range: {0}")]
    BadRange(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("store: {0}")]
    Io(#[from] io::Error),
}

/// Volume chunk as persisted: resolved to a participant and shifted to hub time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredChunk {
    pub badge_id: String,
    pub seq: u64,
    pub participant_id: String,
    pub period_ms: u32,
    pub start_ts: i64,
    /// Correction added to the badge's timestamps.
    pub clock_offset_ms: i64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestBatch {
    #[serde(default)]
    pub chunks: Vec<SampleChunk>,
    #[serde(default)]
    pub scans: Vec<ProximityObservation>,
    /// Added to every timestamp in the batch (hub minus badge clock).
    #[serde(default)]
    pub clock_offset_ms: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub chunks_stored: usize,
    pub chunks_duplicate: usize,
    pub chunks_unknown: usize,
    pub chunks_invalid: usize,
    pub scans_stored: usize,
    pub scans_duplicate: usize,
    pub scans_unknown: usize,
    pub scans_cross_group: usize,
    pub scans_invalid: usize,
    pub malformed: usize,
    pub events_finalized: usize,
    pub late_samples: usize,
}

impl IngestReport {
    pub fn add(&mut self, o: &IngestReport) {
        self.chunks_stored += o.chunks_stored;
        self.chunks_duplicate += o.chunks_duplicate;
        self.chunks_unknown += o.chunks_unknown;
        self.chunks_invalid += o.chunks_invalid;
        self.scans_stored += o.scans_stored;
        self.scans_duplicate += o.scans_duplicate;
        self.scans_unknown += o.scans_unknown;
        self.scans_cross_group += o.scans_cross_group;
        self.scans_invalid += o.scans_invalid;
        self.malformed += o.malformed;
        self.events_finalized += o.events_finalized;
        self.late_samples += o.late_samples;
    }
}

/// `from`/`to`/`window_ms` as given on a query string.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeQuery {
    pub from: Option<i64>,
    pub to: Option<i64>,
    pub window_ms: Option<i64>,
}

impl RangeQuery {
    pub fn new(from: i64, to: i64) -> Self {
        Self {
            from: Some(from),
            to: Some(to),
            window_ms: None,
        }
    }

    /// `to` defaults to `now`, `from` to `to - window_ms`.
    pub fn resolve(&self, now_ms: i64, default_window_ms: i64) -> Result<TimeWindow, HubError> {
        let window_ms = self.window_ms.unwrap_or(default_window_ms);
        if window_ms <= 0 {
            return Err(HubError::BadRange(format!(
                "window_ms must be positive, got {window_ms}"
            )));
        }
        let to = self.to.unwrap_or(now_ms);
        let from = self.from.unwrap_or(to.saturating_sub(window_ms));
        TimeWindow::new(from, to)
            .map_err(|_| HubError::BadRange(format!("from {from} must be before to {to}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group_id: String,
    pub participants: Vec<crate::registry::ParticipantEntry>,
    pub volume_chunks: usize,
    pub events: usize,
    pub scans: usize,
}

/// Everything `analyze` reports for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub group_id: String,
    pub stats: WindowStats,
    pub turn_matrix: TurnMatrix,
    pub proximity: ProximityGraph,
}

/// Records read back from a group's segments: chunks, events, scans.
type Replayed = (
    Vec<StoredChunk>,
    Vec<SpeakingEvent>,
    Vec<ProximityObservation>,
);

struct GroupSegments {
    volumes: Segment<StoredChunk>,
    events: Segment<SpeakingEvent>,
    scans: Segment<ProximityObservation>,
}

#[derive(Debug, Default)]
struct GroupData {
    series: IndexMap<String, ParticipantSeries>,
    events: Vec<SpeakingEvent>,
    scans: Vec<ProximityObservation>,
    chunks: usize,
}

impl GroupData {
    fn all_events(&self) -> Vec<SpeakingEvent> {
        let mut out = self.events.clone();
        out.extend(self.series.values().flat_map(|s| s.tail.iter().cloned()));
        out.sort_by(|a, b| (a.start_ts, &a.participant_id).cmp(&(b.start_ts, &b.participant_id)));
        out
    }
}

#[derive(Default)]
struct State {
    registry: GroupRegistry,
    groups: HashMap<String, GroupData>,
    seen_chunks: HashSet<(String, u64)>,
    seen_scans: HashSet<ProximityObservation>,
    cursors: BTreeMap<String, PullCursor>,
}

/// The hub's store and query engine. Ingest is serialized by an internal
/// writer lock; readers only ever see batches that have been synced to disk.
pub struct Hub {
    dir: PathBuf,
    cfg: HubConfig,
    writer: Mutex<HashMap<String, GroupSegments>>,
    state: RwLock<State>,
}

const REGISTRY_FILE: &str = "registry.json";
const CURSORS_FILE: &str = "cursors.json";

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        use std::io::Write;
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

fn read_json<T: serde::de::DeserializeOwned + Default>(path: &Path) -> io::Result<T> {
    match std::fs::read_to_string(path) {
        Ok(s) => serde_json::from_str(&s).map_err(|e| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}: {e}", path.display()),
            )
        }),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(T::default()),
        Err(e) => Err(e),
    }
}

impl Hub {
    /// Opens the store under `cfg.data_dir`, replaying every segment.
    pub fn open(cfg: HubConfig) -> Result<Self, HubError> {
        let dir = cfg.data_dir.clone();
        std::fs::create_dir_all(dir.join("groups"))?;
        let registry: GroupRegistry = read_json(&dir.join(REGISTRY_FILE))?;
        registry.validate()?;
        let cursors: BTreeMap<String, PullCursor> = read_json(&dir.join(CURSORS_FILE))?;
        let hub = Self {
            dir,
            cfg,
            writer: Mutex::new(HashMap::new()),
            state: RwLock::new(State {
                registry,
                cursors,
                ..Default::default()
            }),
        };
        let mut group_ids: Vec<String> = std::fs::read_dir(hub.dir.join("groups"))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        group_ids.sort();
        for gid in group_ids {
            hub.replay_group(&gid)?;
        }
        Ok(hub)
    }

    pub fn config(&self) -> &HubConfig {
        &self.cfg
    }

    pub fn data_dir(&self) -> &Path {
        &self.dir
    }

    fn group_dir(&self, gid: &str) -> PathBuf {
        self.dir.join("groups").join(gid)
    }

    fn open_segments(&self, gid: &str) -> io::Result<(GroupSegments, Replayed)> {
        let d = self.group_dir(gid);
        std::fs::create_dir_all(&d)?;
        let (volumes, chunks) = Segment::open(&d.join(SegmentKind::Volumes.file_name()))?;
        let (events, evs) = Segment::open(&d.join(SegmentKind::Events.file_name()))?;
        let (scans, sc) = Segment::open(&d.join(SegmentKind::Scans.file_name()))?;
        Ok((
            GroupSegments {
                volumes,
                events,
                scans,
            },
            (chunks, evs, sc),
        ))
    }

    fn replay_group(&self, gid: &str) -> Result<(), HubError> {
        let (mut segs, (chunks, events, scans)) = self.open_segments(gid)?;
        let mut data = GroupData {
            chunks: chunks.len(),
            ..Default::default()
        };
        let mut st = self.state.write();
        for c in &chunks {
            st.seen_chunks.insert((c.badge_id.clone(), c.seq));
            let s = data
                .series
                .entry(c.participant_id.clone())
                .or_insert_with(|| {
                    ParticipantSeries::new(&c.participant_id, i64::from(c.period_ms))
                });
            for (k, v) in c.values.iter().enumerate() {
                s.ts.push(c.start_ts + k as i64 * i64::from(c.period_ms));
                s.values.push(*v);
            }
        }
        for s in data.series.values_mut() {
            let mut pairs: Vec<(i64, f64)> =
                s.ts.iter().copied().zip(s.values.iter().copied()).collect();
            pairs.sort_by_key(|p| p.0);
            (s.ts, s.values) = pairs.into_iter().unzip();
            s.finalized_end = events
                .iter()
                .filter(|e| e.participant_id == s.participant_id)
                .map(|e| e.end_ts)
                .max();
        }
        data.events = events;
        // Finish anything a crash left between the volume and event appends.
        let mut caught_up = Vec::new();
        for s in data.series.values_mut() {
            let up = s.plan(&[], &self.cfg.pipeline);
            caught_up.extend(up.finalized.iter().cloned());
            s.apply(&[], up);
        }
        segs.events.append(&caught_up)?;
        data.events.extend(caught_up);
        st.seen_scans.extend(scans.iter().cloned());
        data.scans = scans;
        st.groups.insert(gid.to_string(), data);
        self.writer.lock().insert(gid.to_string(), segs);
        Ok(())
    }

    pub fn registry(&self) -> GroupRegistry {
        self.state.read().registry.clone()
    }

    /// Adds or replaces groups and persists the merged registry.
    pub fn register(&self, update: GroupRegistry) -> Result<GroupRegistry, HubError> {
        let _w = self.writer.lock();
        let mut next = self.state.read().registry.clone();
        next.merge(update)?;
        write_atomic(
            &self.dir.join(REGISTRY_FILE),
            serde_json::to_string_pretty(&next)
                .expect("registry serializes")
                .as_bytes(),
        )?;
        self.state.write().registry = next.clone();
        Ok(next)
    }

    pub fn cursor(&self, badge_id: &str) -> PullCursor {
        self.state
            .read()
            .cursors
            .get(badge_id)
            .cloned()
            .unwrap_or_else(|| PullCursor::new(badge_id))
    }

    /// Moves a badge's cursor forward; never backward.
    pub fn advance_cursor(&self, badge_id: &str, seq: u64) -> Result<PullCursor, HubError> {
        self.set_cursor(badge_id, |c| c.last_acked_seq.max(seq))
    }

    /// Rewinds a cursor after a badge reports it has never written that far.
    pub fn reset_cursor(&self, badge_id: &str, seq: u64) -> Result<PullCursor, HubError> {
        self.set_cursor(badge_id, |_| seq)
    }

    fn set_cursor(
        &self,
        badge_id: &str,
        f: impl Fn(&PullCursor) -> u64,
    ) -> Result<PullCursor, HubError> {
        let _w = self.writer.lock();
        let mut cursors = self.state.read().cursors.clone();
        let c = cursors
            .entry(badge_id.to_string())
            .or_insert_with(|| PullCursor::new(badge_id));
        c.last_acked_seq = f(c);
        let out = c.clone();
        write_atomic(
            &self.dir.join(CURSORS_FILE),
            serde_json::to_string_pretty(&cursors)
                .expect("cursors serialize")
                .as_bytes(),
        )?;
        self.state.write().cursors = cursors;
        Ok(out)
    }

    /// Stores a batch. Records for unregistered devices, duplicates and
    /// invalid records are counted and skipped; the rest of the batch lands.
    /// With `only_group`, records belonging to any other group are rejected.
    pub fn ingest(
        &self,
        batch: &IngestBatch,
        only_group: Option<&str>,
    ) -> Result<IngestReport, HubError> {
        let mut writer = self.writer.lock();
        let mut report = IngestReport::default();
        let mut new_chunks: BTreeMap<String, Vec<StoredChunk>> = BTreeMap::new();
        let mut new_scans: BTreeMap<String, Vec<ProximityObservation>> = BTreeMap::new();
        let mut samples: BTreeMap<(String, String), Vec<(i64, f64)>> = BTreeMap::new();
        let mut plans: BTreeMap<(String, String), Update> = BTreeMap::new();
        let mut new_series: BTreeMap<(String, String), i64> = BTreeMap::new();

        {
            let st = self.state.read();
            let mut batch_seen: HashSet<(String, u64)> = HashSet::new();
            for c in &batch.chunks {
                if c.validate().is_err() {
                    report.chunks_invalid += 1;
                    continue;
                }
                let Some(member) = st
                    .registry
                    .by_badge(&c.badge_id)
                    .filter(|m| only_group.is_none_or(|g| g == m.group_id))
                else {
                    report.chunks_unknown += 1;
                    continue;
                };
                let key = (c.badge_id.clone(), c.seq);
                if st.seen_chunks.contains(&key) || !batch_seen.insert(key) {
                    report.chunks_duplicate += 1;
                    continue;
                }
                let gid = member.group_id.to_string();
                let pid = member.participant.participant_id.clone();
                let period = i64::from(c.period_ms);
                let existing = st
                    .groups
                    .get(&gid)
                    .and_then(|g| g.series.get(&pid))
                    .map(|s| s.period_ms);
                let series_key = (gid.clone(), pid.clone());
                let expected = existing.or_else(|| new_series.get(&series_key).copied());
                if expected.is_some_and(|p| p != period) {
                    report.chunks_invalid += 1;
                    continue;
                }
                new_series.entry(series_key.clone()).or_insert(period);
                let start_ts = c.start_ts + batch.clock_offset_ms;
                let out = samples.entry(series_key).or_default();
                out.extend(
                    c.values
                        .iter()
                        .enumerate()
                        .map(|(k, v)| (start_ts + k as i64 * period, *v)),
                );
                new_chunks.entry(gid).or_default().push(StoredChunk {
                    badge_id: c.badge_id.clone(),
                    seq: c.seq,
                    participant_id: pid,
                    period_ms: c.period_ms,
                    start_ts,
                    clock_offset_ms: batch.clock_offset_ms,
                    values: c.values.clone(),
                });
                report.chunks_stored += 1;
            }

            let mut valid_scans = Vec::new();
            for s in &batch.scans {
                if s.validate().is_err() {
                    report.scans_invalid += 1;
                } else {
                    valid_scans.push(ProximityObservation {
                        ts: s.ts + batch.clock_offset_ms,
                        ..s.clone()
                    });
                }
            }
            let (kept, filter) = partition_by_group(&valid_scans, &st.registry);
            report.scans_unknown += filter.unknown_ids;
            report.scans_cross_group += filter.cross_group;
            let mut batch_scans = HashSet::new();
            for (gid, obs) in kept {
                if only_group.is_some_and(|g| g != gid) {
                    report.scans_unknown += 1;
                } else if st.seen_scans.contains(obs) || !batch_scans.insert(obs.clone()) {
                    report.scans_duplicate += 1;
                } else {
                    new_scans.entry(gid).or_default().push(obs.clone());
                    report.scans_stored += 1;
                }
            }

            for (key, new) in samples.iter_mut() {
                new.sort_by_key(|p| p.0);
                let empty;
                let series = match st.groups.get(&key.0).and_then(|g| g.series.get(&key.1)) {
                    Some(s) => s,
                    None => {
                        empty = ParticipantSeries::new(&key.1, new_series[key]);
                        &empty
                    }
                };
                let up = series.plan(new, &self.cfg.pipeline);
                report.events_finalized += up.finalized.len();
                report.late_samples += up.late_samples;
                plans.insert(key.clone(), up);
            }
        }

        // Durable first, then visible.
        let mut touched: Vec<String> = new_chunks.keys().chain(new_scans.keys()).cloned().collect();
        touched.sort();
        touched.dedup();
        for gid in &touched {
            if !writer.contains_key(gid) {
                let (segs, ..) = self.open_segments(gid)?;
                writer.insert(gid.clone(), segs);
            }
            let segs = writer.get_mut(gid).expect("opened above");
            if let Some(c) = new_chunks.get(gid) {
                segs.volumes.append(c)?;
            }
            if let Some(s) = new_scans.get(gid) {
                segs.scans.append(s)?;
            }
            let finalized: Vec<SpeakingEvent> = plans
                .iter()
                .filter(|(k, _)| &k.0 == gid)
                .flat_map(|(_, u)| u.finalized.iter().cloned())
                .collect();
            segs.events.append(&finalized)?;
        }

        let mut st = self.state.write();
        for (gid, chunks) in new_chunks {
            for c in &chunks {
                st.seen_chunks.insert((c.badge_id.clone(), c.seq));
            }
            st.groups.entry(gid).or_default().chunks += chunks.len();
        }
        for (gid, scans) in new_scans {
            st.seen_scans.extend(scans.iter().cloned());
            st.groups.entry(gid).or_default().scans.extend(scans);
        }
        for ((gid, pid), up) in plans {
            let period = new_series[&(gid.clone(), pid.clone())];
            let g = st.groups.entry(gid.clone()).or_default();
            g.events.extend(up.finalized.iter().cloned());
            let s = g
                .series
                .entry(pid.clone())
                .or_insert_with(|| ParticipantSeries::new(&pid, period));
            s.apply(&samples[&(gid, pid)], up);
        }
        drop(st);
        tracing::debug!(?report, "ingest");
        Ok(report)
    }

    /// Parses a loose JSON body record by record, counting malformed ones.
    pub fn ingest_json(
        &self,
        body: &serde_json::Value,
        only_group: Option<&str>,
    ) -> Result<IngestReport, HubError> {
        let obj = body
            .as_object()
            .ok_or_else(|| HubError::BadRequest("body must be a JSON object".into()))?;
        let mut malformed = 0;
        let mut parse = |key: &str| -> Vec<serde_json::Value> {
            match obj.get(key) {
                None => Vec::new(),
                Some(serde_json::Value::Array(a)) => a.clone(),
                Some(_) => {
                    malformed += 1;
                    Vec::new()
                }
            }
        };
        let (raw_chunks, raw_scans) = (parse("chunks"), parse("scans"));
        let mut batch = IngestBatch::default();
        for v in raw_chunks {
            match serde_json::from_value(v) {
                Ok(c) => batch.chunks.push(c),
                Err(_) => malformed += 1,
            }
        }
        for v in raw_scans {
            match serde_json::from_value(v) {
                Ok(s) => batch.scans.push(s),
                Err(_) => malformed += 1,
            }
        }
        if let Some(off) = obj.get("clock_offset_ms") {
            batch.clock_offset_ms = off
                .as_i64()
                .ok_or_else(|| HubError::BadRequest("clock_offset_ms must be an integer".into()))?;
        }
        let mut report = self.ingest(&batch, only_group)?;
        report.malformed += malformed;
        Ok(report)
    }

    fn require_group(&self, st: &State, gid: &str) -> Result<Vec<String>, HubError> {
        st.registry
            .group(gid)
            .ok_or_else(|| HubError::UnknownGroup(gid.to_string()))?;
        Ok(st.registry.participant_ids(gid))
    }

    pub fn groups(&self) -> Vec<GroupSummary> {
        let st = self.state.read();
        st.registry
            .groups
            .iter()
            .map(|(gid, g)| {
                let data = st.groups.get(gid);
                GroupSummary {
                    group_id: gid.clone(),
                    participants: g.participants.clone(),
                    volume_chunks: data.map_or(0, |d| d.chunks),
                    events: data.map_or(0, |d| {
                        d.events.len() + d.series.values().map(|s| s.tail.len()).sum::<usize>()
                    }),
                    scans: data.map_or(0, |d| d.scans.len()),
                }
            })
            .collect()
    }

    /// Volume samples with `ts` in the window, by participant then time.
    pub fn volumes(&self, gid: &str, w: TimeWindow) -> Result<Vec<VolumeSample>, HubError> {
        let st = self.state.read();
        let ids = self.require_group(&st, gid)?;
        let Some(data) = st.groups.get(gid) else {
            return Ok(Vec::new());
        };
        Ok(ids
            .iter()
            .filter_map(|p| data.series.get(p))
            .flat_map(|s| s.samples_in(w.start_ts, w.end_ts))
            .collect())
    }

    /// Events of registered participants that intersect the window.
    pub fn events(&self, gid: &str, w: TimeWindow) -> Result<Vec<SpeakingEvent>, HubError> {
        let st = self.state.read();
        let ids = self.require_group(&st, gid)?;
        Ok(st
            .groups
            .get(gid)
            .map(GroupData::all_events)
            .unwrap_or_default()
            .into_iter()
            .filter(|e| ids.contains(&e.participant_id) && w.intersects(e.start_ts, e.end_ts))
            .collect())
    }

    /// Every event of the group regardless of window, for turn clustering.
    fn group_events(&self, gid: &str) -> Result<(Vec<String>, Vec<SpeakingEvent>), HubError> {
        let st = self.state.read();
        let ids = self.require_group(&st, gid)?;
        let events = st
            .groups
            .get(gid)
            .map(GroupData::all_events)
            .unwrap_or_default();
        Ok((ids, events))
    }

    pub fn stats(&self, gid: &str, w: TimeWindow) -> Result<WindowStats, HubError> {
        let (ids, events) = self.group_events(gid)?;
        Ok(window_stats(&events, &ids, w, &self.cfg.metrics))
    }

    pub fn turn_matrix(&self, gid: &str, w: TimeWindow) -> Result<TurnMatrix, HubError> {
        let (ids, events) = self.group_events(gid)?;
        let m = &self.cfg.metrics;
        Ok(response_matrix(
            &events,
            &ids,
            w,
            m.turn_gap_ms,
            m.response_window_ms,
        ))
    }

    pub fn mediator(&self, gid: &str, w: TimeWindow) -> Result<MediatorState, HubError> {
        Ok(mediator_state(
            &self.stats(gid, w)?,
            self.cfg.metrics.rate_max,
        )?)
    }

    pub fn proximity(&self, gid: &str, w: TimeWindow) -> Result<ProximityGraph, HubError> {
        let st = self.state.read();
        let ids = self.require_group(&st, gid)?;
        let scans = st
            .groups
            .get(gid)
            .map(|g| g.scans.as_slice())
            .unwrap_or_default();
        let resolved = resolve_participants(scans, &st.registry);
        let mut graph = build_graph(&resolved, w, &self.cfg.path_loss, self.cfg.min_obs);
        graph.nodes = ids;
        Ok(graph)
    }

    /// Stats, turn matrix and proximity graph for a group. Unregistered
    /// groups report zeroed stats rather than an error.
    pub fn analyze(&self, gid: &str, w: TimeWindow) -> Result<Analysis, HubError> {
        match (
            self.stats(gid, w),
            self.turn_matrix(gid, w),
            self.proximity(gid, w),
        ) {
            (Ok(stats), Ok(turn_matrix), Ok(proximity)) => Ok(Analysis {
                group_id: gid.into(),
                stats,
                turn_matrix,
                proximity,
            }),
            (Err(HubError::UnknownGroup(_)), ..) => Ok(Analysis {
                group_id: gid.into(),
                stats: window_stats(&[], &[], w, &self.cfg.metrics),
                turn_matrix: response_matrix(
                    &[],
                    &[],
                    w,
                    self.cfg.metrics.turn_gap_ms,
                    self.cfg.metrics.response_window_ms,
                ),
                proximity: ProximityGraph {
                    window: w,
                    nodes: Vec::new(),
                    edges: Vec::new(),
                },
            }),
            (Err(e), ..) | (_, Err(e), _) | (_, _, Err(e)) => Err(e),
        }
    }

    /// Stored chunks overlapping the window, for export.
    pub fn stored_chunks(&self, gid: &str, w: TimeWindow) -> Result<Vec<StoredChunk>, HubError> {
        {
            let st = self.state.read();
            self.require_group(&st, gid)?;
        }
        let path = self.group_dir(gid).join(SegmentKind::Volumes.file_name());
        if !path.exists() {
            return Ok(Vec::new());
        }
        let _w = self.writer.lock();
        let entries: Vec<Entry<StoredChunk>> = crate::jsonl::read_file(&path)?;
        Ok(entries
            .into_iter()
            .map(|e| e.record)
            .filter(|c| {
                w.intersects(
                    c.start_ts,
                    c.start_ts + c.values.len() as i64 * i64::from(c.period_ms),
                )
            })
            .collect())
    }

    pub fn scans(&self, gid: &str, w: TimeWindow) -> Result<Vec<ProximityObservation>, HubError> {
        let st = self.state.read();
        self.require_group(&st, gid)?;
        Ok(st
            .groups
            .get(gid)
            .map(|g| {
                g.scans
                    .iter()
                    .filter(|s| w.contains(s.ts))
                    .cloned()
                    .collect()
            })
            .unwrap_or_default())
    }

    /// `[earliest, latest end)` over every stored sample and scan.
    pub fn span(&self) -> Option<(i64, i64)> {
        let st = self.state.read();
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for g in st.groups.values() {
            for s in g.series.values() {
                if let (Some(first), Some(last)) = (s.ts.first(), s.ts.last()) {
                    lo = lo.min(*first);
                    hi = hi.max(last + s.period_ms);
                }
            }
            for sc in &g.scans {
                lo = lo.min(sc.ts);
                hi = hi.max(sc.ts + 1);
            }
        }
        (lo < hi).then_some((lo, hi))
    }
}

//! Scripted badge simulator.
//!
//! A [`ConversationScript`] says who speaks when and where everyone stands;
//! [`simulate`] turns it into what the badges would have recorded: volume
//! chunks on each badge's own (offset, drifting) clock and periodic BLE scans.
//! Output is a pure function of the script and configs.

mod clock;
mod device;
mod flash;

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl;
use crate::proximity::{PathLossParams, ProximityObservation};
use crate::registry::{GroupEntry, GroupRegistry, ParticipantEntry};

pub use clock::BadgeClock;
pub use device::{ScheduledChunk, SimulatedBadge};
pub use flash::{flash_store, FlashMemory, FlashOutcome, MS_PER_HOUR};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid script: {0}")]
    Script(String),
    #[error("invalid badge config: {0}")]
    Config(String),
    #[error("{configs} badge configs for {participants} participants")]
    ConfigMismatch { configs: usize, participants: usize },
    #[error("distance must be positive, got {0} m")]
    Distance(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptParticipant {
    pub id: String,
    pub position_xy_m: [f64; 2],
    pub base_volume: f64,
    /// `[start_ms, end_ms)` relative to the script start.
    pub speech_intervals: Vec<(i64, i64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub badge_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beacon_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
}

impl ScriptParticipant {
    pub fn badge_id(&self) -> &str {
        self.badge_id.as_deref().unwrap_or(&self.id)
    }

    pub fn beacon_id(&self) -> &str {
        self.beacon_id.as_deref().unwrap_or(&self.id)
    }

    pub fn speaking_ms(&self) -> i64 {
        self.speech_intervals.iter().map(|(s, e)| e - s).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationScript {
    pub duration_ms: i64,
    pub participants: Vec<ScriptParticipant>,
    pub noise_floor: f64,
    pub rng_seed: u64,
    /// True time of the script start, ms since the Unix epoch.
    #[serde(default)]
    pub start_ts: i64,
    #[serde(default = "default_group")]
    pub group_id: String,
    #[serde(default)]
    pub path_loss: PathLossParams,
    #[serde(default = "default_rssi_noise")]
    pub rssi_noise_db: f64,
    /// Fraction of a speaker's volume picked up by a badge 1 m away; falls
    /// off with the inverse square of distance, never exceeding this value.
    #[serde(default = "default_bleed")]
    pub bleed_at_1m: f64,
}

fn default_group() -> String {
    "g1".into()
}
fn default_rssi_noise() -> f64 {
    4.0
}
fn default_bleed() -> f64 {
    0.1
}

impl ConversationScript {
    pub fn from_json_file(path: &Path) -> Result<Self, SimError> {
        let script: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        script.validate()?;
        Ok(script)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::Script(m));
        if self.duration_ms <= 0 {
            return err("duration_ms must be positive".into());
        }
        if self.participants.is_empty() {
            return err("no participants".into());
        }
        if !(0.0..1.0).contains(&self.noise_floor) {
            return err(format!("noise_floor {} outside [0, 1)", self.noise_floor));
        }
        let mut ids = HashSet::new();
        for p in &self.participants {
            if !ids.insert(&p.id) {
                return err(format!("duplicate participant {}", p.id));
            }
            if !(p.base_volume > 0.0 && p.base_volume <= 1.0) || p.base_volume <= self.noise_floor {
                return err(format!("{}: base_volume must be in (noise_floor, 1]", p.id));
            }
            let mut spans = p.speech_intervals.clone();
            spans.sort_unstable();
            for (s, e) in &spans {
                if !(0 <= *s && s < e && *e <= self.duration_ms) {
                    return err(format!("{}: interval {s}..{e} outside script", p.id));
                }
            }
            if spans.windows(2).any(|w| w[1].0 < w[0].1) {
                return err(format!("{}: overlapping speech intervals", p.id));
            }
        }
        Ok(())
    }

    pub fn end_ts(&self) -> i64 {
        self.start_ts + self.duration_ms
    }

    /// Registry with one group holding every scripted participant.
    pub fn registry(&self) -> GroupRegistry {
        let participants = self
            .participants
            .iter()
            .map(|p| ParticipantEntry {
                participant_id: p.id.clone(),
                badge_id: p.badge_id().to_string(),
                beacon_id: p.beacon_id().to_string(),
                display_name: p.display_name.clone().unwrap_or_else(|| p.id.clone()),
            })
            .collect();
        let mut reg = GroupRegistry::default();
        reg.groups
            .insert(self.group_id.clone(), GroupEntry { participants });
        reg
    }

    /// Fraction of true-time span `[a, b)` (absolute ms) covered by `p`'s speech.
    fn speech_fraction(&self, p: &ScriptParticipant, a: f64, b: f64) -> f64 {
        let covered: f64 = p
            .speech_intervals
            .iter()
            .map(|&(s, e)| {
                let (s, e) = ((self.start_ts + s) as f64, (self.start_ts + e) as f64);
                (e.min(b) - s.max(a)).max(0.0)
            })
            .sum();
        (covered / (b - a)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BadgeMode {
    Hardware,
    Phone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadgeConfig {
    pub mode: BadgeMode,
    pub volume_period_ms: u32,
    pub scan_period_ms: u32,
    /// `None` for phones, which cache to local storage without a fixed cap.
    pub flash_capacity_hours: Option<f64>,
    pub clock_offset_ms: i64,
    pub clock_drift_ppm: f64,
    /// Span of volume data per stored chunk.
    #[serde(default = "default_chunk_ms")]
    pub chunk_ms: u32,
}

fn default_chunk_ms() -> u32 {
    60_000
}

/// Nominal battery life of the coin-cell hardware badge. Metadata only.
pub const HARDWARE_BATTERY_HOURS: f64 = 40.0;
pub const DEFAULT_DRIFT_PPM: f64 = 20.0;
/// Unsynchronized badges start within this many ms of true time.
pub const MAX_INITIAL_OFFSET_MS: i64 = 2_000;

impl BadgeConfig {
    pub fn hardware() -> Self {
        Self {
            mode: BadgeMode::Hardware,
            volume_period_ms: 250,
            scan_period_ms: 60_000,
            flash_capacity_hours: Some(8.0),
            clock_offset_ms: 0,
            clock_drift_ppm: DEFAULT_DRIFT_PPM,
            chunk_ms: default_chunk_ms(),
        }
    }

    pub fn phone() -> Self {
        Self {
            mode: BadgeMode::Phone,
            volume_period_ms: 10,
            scan_period_ms: 10_000,
            flash_capacity_hours: None,
            clock_offset_ms: 0,
            clock_drift_ppm: DEFAULT_DRIFT_PPM,
            chunk_ms: default_chunk_ms(),
        }
    }

    pub fn for_mode(mode: BadgeMode) -> Self {
        match mode {
            BadgeMode::Hardware => Self::hardware(),
            BadgeMode::Phone => Self::phone(),
        }
    }

    /// Same config with an offset drawn uniformly from ±2 s.
    pub fn with_random_offset(mut self, rng: &mut impl Rng) -> Self {
        self.clock_offset_ms = rng.random_range(-MAX_INITIAL_OFFSET_MS..=MAX_INITIAL_OFFSET_MS);
        self
    }

    pub fn with_clock(mut self, offset_ms: i64, drift_ppm: f64) -> Self {
        self.clock_offset_ms = offset_ms;
        self.clock_drift_ppm = drift_ppm;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.volume_period_ms == 0 || self.scan_period_ms == 0 || self.chunk_ms == 0 {
            return Err(SimError::Config("periods must be positive".into()));
        }
        if self.chunk_ms < self.volume_period_ms {
            return Err(SimError::Config(
                "chunk_ms shorter than the volume period".into(),
            ));
        }
        match (self.mode, self.flash_capacity_hours) {
            (BadgeMode::Hardware, None) => Err(SimError::Config(
                "hardware badges need a flash capacity".into(),
            )),
            (_, Some(h)) if h.is_nan() || h <= 0.0 => {
                Err(SimError::Config("flash capacity must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn samples_per_chunk(&self) -> usize {
        (self.chunk_ms / self.volume_period_ms).max(1) as usize
    }
}

/// A run of volume values as stored in badge flash and pulled by the hub.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleChunk {
    pub badge_id: String,
    pub seq: u64,
    pub period_ms: u32,
    /// Badge-clock timestamp of the first value.
    pub start_ts: i64,
    pub values: Vec<f64>,
}

impl SampleChunk {
    pub fn duration_ms(&self) -> i64 {
        self.values.len() as i64 * i64::from(self.period_ms)
    }

    pub fn end_ts(&self) -> i64 {
        self.start_ts + self.duration_ms()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.badge_id.is_empty() {
            return Err("empty badge_id".into());
        }
        if self.period_ms == 0 {
            return Err("period_ms must be positive".into());
        }
        if self.values.is_empty() {
            return Err("chunk has no values".into());
        }
        if let Some(v) = self.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(format!("volume {v} outside [0, 1]"));
        }
        Ok(())
    }
}

/// Everything one badge produced during a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct BadgeTrace {
    pub badge_id: String,
    pub participant_id: String,
    pub config: BadgeConfig,
    pub chunks: Vec<SampleChunk>,
    /// True time at which each chunk's first sample was taken.
    pub chunk_true_start: Vec<f64>,
    pub scans: Vec<ProximityObservation>,
}

impl BadgeTrace {
    pub fn clock(&self, script: &ConversationScript) -> BadgeClock {
        BadgeClock::new(
            self.config.clock_offset_ms as f64,
            self.config.clock_drift_ppm,
            script.start_ts,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub badges: Vec<BadgeTrace>,
    pub registry: GroupRegistry,
}

/// Forward log-distance model: `rssi_at_1m - 10 n log10(d) + noise`.
pub fn rssi_from_distance(
    distance_m: f64,
    params: &PathLossParams,
    noise_db: f64,
) -> Result<f64, SimError> {
    if distance_m.is_nan() || distance_m <= 0.0 {
        return Err(SimError::Distance(distance_m));
    }
    Ok(params.rssi_at_1m - 10.0 * params.exponent * distance_m.log10() + noise_db)
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Speech loudness jitter: a speaking participant's volume is
/// `base_volume * U(1 - MOD_DEPTH, 1 + MOD_DEPTH)` per sample.
const MOD_DEPTH: f64 = 0.5;
/// Scanner-to-beacon distances are floored here before the path-loss model.
const MIN_RADIO_DISTANCE_M: f64 = 0.1;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn simulate(
    script: &ConversationScript,
    configs: &[BadgeConfig],
) -> Result<SimOutput, SimError> {
    script.validate()?;
    if configs.len() != script.participants.len() {
        return Err(SimError::ConfigMismatch {
            configs: configs.len(),
            participants: script.participants.len(),
        });
    }
    for c in configs {
        c.validate()?;
    }
    let badges = script
        .participants
        .iter()
        .zip(configs)
        .enumerate()
        .map(|(i, (p, cfg))| simulate_badge(script, i, p, cfg))
        .collect::<Result<_, _>>()?;
    Ok(SimOutput {
        badges,
        registry: script.registry(),
    })
}

fn simulate_badge(
    script: &ConversationScript,
    index: usize,
    me: &ScriptParticipant,
    cfg: &BadgeConfig,
) -> Result<BadgeTrace, SimError> {
    let clock = BadgeClock::new(
        cfg.clock_offset_ms as f64,
        cfg.clock_drift_ppm,
        script.start_ts,
    );
    let mut vol_rng = rng_for(script.rng_seed, 2 * index as u64);
    let mut scan_rng = rng_for(script.rng_seed, 2 * index as u64 + 1);
    let end_true = script.end_ts() as f64;

    // Volumes: sampled on the badge's own clock grid.
    let period = i64::from(cfg.volume_period_ms);
    let badge_start = clock.read(script.start_ts);
    let mut values: Vec<f64> = Vec::new();
    let mut true_starts: Vec<f64> = Vec::new();
    loop {
        let b0 = badge_start + values.len() as i64 * period;
        let (t0, t1) = (
            clock.true_time(b0 as f64),
            clock.true_time((b0 + period) as f64),
        );
        if t1 > end_true {
            break;
        }
        let f_me = script.speech_fraction(me, t0, t1);
        let speech = me.base_volume * vol_rng.random_range(1.0 - MOD_DEPTH..1.0 + MOD_DEPTH);
        let silence = script.noise_floor * vol_rng.random::<f64>();
        let mut v = f_me * speech + (1.0 - f_me) * silence;
        for other in script.participants.iter().filter(|o| o.id != me.id) {
            let f = script.speech_fraction(other, t0, t1);
            let jitter = vol_rng.random_range(1.0 - MOD_DEPTH..1.0 + MOD_DEPTH);
            if f > 0.0 {
                let d = distance(me.position_xy_m, other.position_xy_m).max(1.0);
                v += f * other.base_volume * jitter * script.bleed_at_1m / (d * d);
            }
        }
        values.push(v.clamp(0.0, 1.0));
        true_starts.push(t0);
    }

    let per_chunk = cfg.samples_per_chunk();
    let (chunks, chunk_true_start) = values
        .chunks(per_chunk)
        .zip(true_starts.chunks(per_chunk))
        .enumerate()
        .map(|(k, (vals, ts))| {
            let chunk = SampleChunk {
                badge_id: me.badge_id().to_string(),
                seq: k as u64 + 1,
                period_ms: cfg.volume_period_ms,
                start_ts: badge_start + (k * per_chunk) as i64 * period,
                values: vals.to_vec(),
            };
            (chunk, ts[0])
        })
        .unzip();

    // Scans: at exact multiples of the scan period on the badge clock.
    let scan_period = i64::from(cfg.scan_period_ms);
    let noise = Normal::new(0.0, script.rssi_noise_db.max(0.0)).expect("nonnegative sigma");
    let mut scans = Vec::new();
    let mut k =
        badge_start.div_euclid(scan_period) + i64::from(badge_start.rem_euclid(scan_period) != 0);
    loop {
        let b = k * scan_period;
        if clock.true_time(b as f64) >= end_true {
            break;
        }
        for other in script.participants.iter().filter(|o| o.id != me.id) {
            let d = distance(me.position_xy_m, other.position_xy_m).max(MIN_RADIO_DISTANCE_M);
            let rssi = rssi_from_distance(d, &script.path_loss, noise.sample(&mut scan_rng))?;
            scans.push(ProximityObservation {
                scanner_id: me.badge_id().to_string(),
                beacon_id: other.beacon_id().to_string(),
                rssi_dbm: (rssi.round() as i32).clamp(-120, 0),
                ts: b,
            });
        }
        k += 1;
    }

    Ok(BadgeTrace {
        badge_id: me.badge_id().to_string(),
        participant_id: me.id.clone(),
        config: cfg.clone(),
        chunks,
        chunk_true_start,
        scans,
    })
}

/// Writes `<dir>/<badge_id>/chunks.jsonl`, `<dir>/<badge_id>/scans.jsonl` and
/// `<dir>/registry.json`.
pub fn write_trace(output: &SimOutput, dir: &Path) -> Result<(), SimError> {
    std::fs::create_dir_all(dir)?;
    for b in &output.badges {
        let badge_dir = dir.join(&b.badge_id);
        std::fs::create_dir_all(&badge_dir)?;
        jsonl::write_file(&badge_dir.join("chunks.jsonl"), &b.chunks)?;
        jsonl::write_file(&badge_dir.join("scans.jsonl"), &b.scans)?;
    }
    std::fs::write(
        dir.join("registry.json"),
        serde_json::to_string_pretty(&output.registry)? + "\n",
    )?;
    Ok(())
}

use std::collections::VecDeque;

use super::SampleChunk;

pub const MS_PER_HOUR: f64 = 3_600_000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FlashOutcome {
    pub retained: Vec<SampleChunk>,
    pub overflowed_count: usize,
}

/// Keeps the newest chunks whose summed duration fits in `capacity_hours`;
/// everything older counts as overflowed.
pub fn flash_store(chunks: &[SampleChunk], capacity_hours: f64) -> FlashOutcome {
    let capacity_ms = capacity_hours * MS_PER_HOUR;
    let mut used = 0.0;
    let mut keep_from = chunks.len();
    for (i, c) in chunks.iter().enumerate().rev() {
        let d = c.duration_ms() as f64;
        if used + d > capacity_ms {
            break;
        }
        used += d;
        keep_from = i;
    }
    FlashOutcome {
        retained: chunks[keep_from..].to_vec(),
        overflowed_count: keep_from,
    }
}

/// Stateful drop-oldest flash buffer. Acknowledged chunks are released and
/// stop counting toward occupancy.
#[derive(Debug, Clone)]
pub struct FlashMemory {
    capacity_ms: Option<f64>,
    chunks: VecDeque<SampleChunk>,
    used_ms: f64,
    overflowed: u64,
}

impl FlashMemory {
    /// `None` means unbounded storage (phone badges).
    pub fn new(capacity_hours: Option<f64>) -> Self {
        Self {
            capacity_ms: capacity_hours.map(|h| h * MS_PER_HOUR),
            chunks: VecDeque::new(),
            used_ms: 0.0,
            overflowed: 0,
        }
    }

    pub fn push(&mut self, chunk: SampleChunk) {
        self.used_ms += chunk.duration_ms() as f64;
        self.chunks.push_back(chunk);
        if let Some(cap) = self.capacity_ms {
            while self.used_ms > cap {
                let Some(old) = self.chunks.pop_front() else {
                    break;
                };
                self.used_ms -= old.duration_ms() as f64;
                self.overflowed += 1;
            }
        }
    }

    /// Frees every chunk with `seq <= through_seq`.
    pub fn release_through(&mut self, through_seq: u64) {
        while self.chunks.front().is_some_and(|c| c.seq <= through_seq) {
            let c = self.chunks.pop_front().expect("front checked");
            self.used_ms -= c.duration_ms() as f64;
        }
    }

    pub fn after(&self, seq: u64) -> Vec<SampleChunk> {
        self.chunks
            .iter()
            .filter(|c| c.seq > seq)
            .cloned()
            .collect()
    }

    pub fn overflowed(&self) -> u64 {
        self.overflowed
    }

    pub fn occupancy_ms(&self) -> f64 {
        self.used_ms
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }
}

use std::collections::VecDeque;

use super::{BadgeClock, BadgeTrace, ConversationScript, FlashMemory, SampleChunk};
use crate::protocol::{ErrorCode, Request, Response};

/// Volume data a badge will have recorded once true time passes `true_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledChunk {
    pub true_start: f64,
    pub true_end: f64,
    pub period_ms: u32,
    pub values: Vec<f64>,
}

/// A badge that answers the hub protocol while replaying a simulated trace
/// against a live clock. Chunks are stamped with the badge clock at the
/// moment they are written, so time sync affects everything recorded after.
#[derive(Debug, Clone)]
pub struct SimulatedBadge {
    badge_id: String,
    clock: BadgeClock,
    flash: FlashMemory,
    schedule: VecDeque<ScheduledChunk>,
    last_seq: u64,
}

impl SimulatedBadge {
    pub fn new(
        badge_id: impl Into<String>,
        clock: BadgeClock,
        capacity_hours: Option<f64>,
    ) -> Self {
        Self {
            badge_id: badge_id.into(),
            clock,
            flash: FlashMemory::new(capacity_hours),
            schedule: VecDeque::new(),
            last_seq: 0,
        }
    }

    pub fn from_trace(trace: &BadgeTrace, script: &ConversationScript) -> Self {
        let clock = trace.clock(script);
        let mut badge = Self::new(&trace.badge_id, clock, trace.config.flash_capacity_hours);
        for (chunk, &true_start) in trace.chunks.iter().zip(&trace.chunk_true_start) {
            badge.schedule(ScheduledChunk {
                true_start,
                true_end: clock.true_time(chunk.end_ts() as f64),
                period_ms: chunk.period_ms,
                values: chunk.values.clone(),
            });
        }
        badge
    }

    pub fn schedule(&mut self, chunk: ScheduledChunk) {
        self.schedule.push_back(chunk);
    }

    pub fn badge_id(&self) -> &str {
        &self.badge_id
    }

    pub fn clock(&self) -> &BadgeClock {
        &self.clock
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn flash(&self) -> &FlashMemory {
        &self.flash
    }

    /// True time at which the last scheduled chunk is complete.
    pub fn finished_at(&self) -> Option<f64> {
        self.schedule.back().map(|c| c.true_end)
    }

    /// Writes every scheduled chunk completed by `true_now` to flash.
    pub fn advance_to(&mut self, true_now: i64) {
        while self
            .schedule
            .front()
            .is_some_and(|c| c.true_end <= true_now as f64)
        {
            let c = self.schedule.pop_front().expect("front checked");
            self.last_seq += 1;
            self.flash.push(SampleChunk {
                badge_id: self.badge_id.clone(),
                seq: self.last_seq,
                period_ms: c.period_ms,
                start_ts: self.clock.badge_time(c.true_start).round() as i64,
                values: c.values,
            });
        }
    }

    pub fn handle(&mut self, req: &Request, true_now: i64) -> Response {
        self.advance_to(true_now);
        match *req {
            Request::Hello => Response::Hello {
                badge_id: self.badge_id.clone(),
                last_seq: self.last_seq,
                badge_ts: self.clock.read(true_now),
                overflowed: self.flash.overflowed(),
            },
            Request::TimeSync { adjust_ms } => {
                self.clock.adjust(adjust_ms as f64);
                Response::TimeSync {
                    badge_ts: self.clock.read(true_now),
                }
            }
            Request::Pull { after_seq } if after_seq > self.last_seq => {
                self.cursor_ahead(after_seq)
            }
            Request::Pull { after_seq } => Response::Chunks {
                chunks: self.flash.after(after_seq),
            },
            Request::Ack { seq } if seq > self.last_seq => self.cursor_ahead(seq),
            Request::Ack { seq } => {
                self.flash.release_through(seq);
                Response::Ack { seq }
            }
        }
    }

    fn cursor_ahead(&self, seq: u64) -> Response {
        Response::Error {
            code: ErrorCode::CursorAhead,
            message: format!(
                "{}: seq {seq} is past last written {}",
                self.badge_id, self.last_seq
            ),
        }
    }
}

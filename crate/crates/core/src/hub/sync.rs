//! Hub side of the badge protocol: time sync, pull, ack, and the periodic
//! scheduler.
//!
//! A pull session runs `hello`, `request`, `store`, `ack` and finally
//! `adjust`. The clock correction is only sent after the ack, so every chunk
//! the badge still holds was stamped with the clock that `hello` measured.

use std::io;
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Clock, Hub, HubError, IngestBatch, IngestReport, ManualClock};
use crate::protocol::{read_frame, write_frame, ErrorCode, Request, Response};
use crate::sim::{SampleChunk, SimulatedBadge};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullCursor {
    pub badge_id: String,
    /// Highest seq the hub has stored and acknowledged; 0 before the first ack.
    pub last_acked_seq: u64,
}

impl PullCursor {
    pub fn new(badge_id: impl Into<String>) -> Self {
        Self {
            badge_id: badge_id.into(),
            last_acked_seq: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("badge unreachable: {0}")]
    Unreachable(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Error)]
pub enum SyncError {
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("badge {badge_id}: {code:?}: {message}")]
    Badge {
        badge_id: String,
        code: ErrorCode,
        message: String,
    },
    #[error("unexpected reply to {request}: {reply:?}")]
    Unexpected {
        request: &'static str,
        reply: Box<Response>,
    },
    #[error(transparent)]
    Hub(#[from] HubError),
}

impl SyncError {
    /// Transport failures are worth retrying; the rest need attention.
    pub fn is_retryable(&self) -> bool {
        matches!(self, SyncError::Link(LinkError::Unreachable(_)))
    }
}

/// One request, one response.
pub trait BadgeLink: Send {
    fn call(&mut self, req: &Request) -> Result<Response, LinkError>;
}

/// Talks to a [`SimulatedBadge`] in the same process. Each direction takes
/// `one_way_ms` of simulated time on the shared clock.
pub struct InProcessLink {
    badge: Arc<Mutex<SimulatedBadge>>,
    clock: ManualClock,
    one_way_ms: i64,
    reachable: Arc<AtomicBool>,
}

impl InProcessLink {
    pub fn new(badge: Arc<Mutex<SimulatedBadge>>, clock: ManualClock, one_way_ms: i64) -> Self {
        Self {
            badge,
            clock,
            one_way_ms,
            reachable: Arc::new(AtomicBool::new(true)),
        }
    }

    /// Flag that makes every call fail while false.
    pub fn reachability(&self) -> Arc<AtomicBool> {
        self.reachable.clone()
    }
}

impl BadgeLink for InProcessLink {
    fn call(&mut self, req: &Request) -> Result<Response, LinkError> {
        if !self.reachable.load(Ordering::SeqCst) {
            return Err(LinkError::Unreachable("link down".into()));
        }
        let at_badge = self.clock.advance(self.one_way_ms);
        let resp = self.badge.lock().handle(req, at_badge);
        self.clock.advance(self.one_way_ms);
        Ok(resp)
    }
}

/// Length-prefixed JSON over TCP. Reconnects on the next call after a failure.
pub struct TcpLink {
    addr: String,
    timeout: Duration,
    stream: Option<TcpStream>,
}

impl TcpLink {
    pub fn new(addr: impl Into<String>) -> Self {
        Self {
            addr: addr.into(),
            timeout: Duration::from_secs(5),
            stream: None,
        }
    }

    fn connect(&self) -> io::Result<TcpStream> {
        let addr = self
            .addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, "no address"))?;
        let s = TcpStream::connect_timeout(&addr, self.timeout)?;
        s.set_read_timeout(Some(self.timeout))?;
        s.set_write_timeout(Some(self.timeout))?;
        s.set_nodelay(true)?;
        Ok(s)
    }
}

impl BadgeLink for TcpLink {
    fn call(&mut self, req: &Request) -> Result<Response, LinkError> {
        let unreachable = |e: io::Error| LinkError::Unreachable(e.to_string());
        if self.stream.is_none() {
            self.stream = Some(self.connect().map_err(unreachable)?);
        }
        let stream = self.stream.as_mut().expect("connected above");
        let result = write_frame(stream, req).and_then(|()| read_frame::<Response>(stream));
        match result {
            Ok(Some(resp)) => Ok(resp),
            Ok(None) => {
                self.stream = None;
                Err(LinkError::Unreachable("connection closed".into()))
            }
            Err(e) => {
                self.stream = None;
                Err(unreachable(e))
            }
        }
    }
}

/// Serves a simulated badge on `listener` until `stop` is set. Each
/// connection is handled on its own thread; `clock` supplies true time.
pub fn serve_badge(
    listener: TcpListener,
    badge: Arc<Mutex<SimulatedBadge>>,
    clock: Arc<dyn Clock>,
    stop: Arc<AtomicBool>,
) -> io::Result<JoinHandle<()>> {
    listener.set_nonblocking(true)?;
    Ok(std::thread::spawn(move || {
        while !stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let (badge, clock, stop) = (badge.clone(), clock.clone(), stop.clone());
                    std::thread::spawn(move || {
                        if let Err(e) = badge_connection(stream, &badge, clock.as_ref(), &stop) {
                            tracing::debug!(error = %e, "badge connection ended");
                        }
                    });
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    std::thread::sleep(Duration::from_millis(5))
                }
                Err(e) => {
                    tracing::warn!(error = %e, "badge accept failed");
                    return;
                }
            }
        }
    }))
}

fn badge_connection(
    mut stream: TcpStream,
    badge: &Mutex<SimulatedBadge>,
    clock: &dyn Clock,
    stop: &AtomicBool,
) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(Duration::from_millis(200)))?;
    stream.set_nodelay(true)?;
    loop {
        if stop.load(Ordering::SeqCst) {
            return Ok(());
        }
        let req = match read_frame::<serde_json::Value>(&mut stream) {
            Ok(Some(v)) => v,
            Ok(None) => return Ok(()),
            Err(e)
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) =>
            {
                continue
            }
            Err(e) => return Err(e),
        };
        let resp = match serde_json::from_value::<Request>(req) {
            Ok(req) => badge.lock().handle(&req, clock.now_ms()),
            Err(e) => Response::Error {
                code: ErrorCode::BadRequest,
                message: e.to_string(),
            },
        };
        write_frame(&mut stream, &resp)?;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSyncResult {
    pub badge_id: String,
    /// Hub minus badge time at the midpoint of the exchange.
    pub offset_ms: i64,
    pub rtt_ms: i64,
    pub last_seq: u64,
    pub overflowed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullOutcome {
    pub badge_id: String,
    pub offset_ms: i64,
    pub chunks_received: usize,
    pub report: IngestReport,
    pub cursor: PullCursor,
    /// The hub's cursor was ahead of the badge and was rewound.
    pub reset: bool,
}

/// Drives pull sessions against one hub. Every step is public so callers
/// (and fault-injection tests) can stop between them.
#[derive(Clone)]
pub struct Puller {
    hub: Arc<Hub>,
    clock: Arc<dyn Clock>,
}

impl Puller {
    pub fn new(hub: Arc<Hub>, clock: Arc<dyn Clock>) -> Self {
        Self { hub, clock }
    }

    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }

    fn badge_error(badge_id: &str, resp: Response, request: &'static str) -> SyncError {
        match resp {
            Response::Error { code, message } => SyncError::Badge {
                badge_id: badge_id.into(),
                code,
                message,
            },
            other => SyncError::Unexpected {
                request,
                reply: Box::new(other),
            },
        }
    }

    /// Measures the badge's clock offset without changing it.
    pub fn hello(&self, link: &mut dyn BadgeLink) -> Result<TimeSyncResult, SyncError> {
        let sent = self.clock.now_ms();
        let resp = link.call(&Request::Hello)?;
        let received = self.clock.now_ms();
        match resp {
            Response::Hello {
                badge_id,
                last_seq,
                badge_ts,
                overflowed,
            } => {
                let midpoint = (sent as f64 + received as f64) / 2.0;
                Ok(TimeSyncResult {
                    badge_id,
                    offset_ms: (midpoint - badge_ts as f64).round() as i64,
                    rtt_ms: received - sent,
                    last_seq,
                    overflowed,
                })
            }
            other => Err(Self::badge_error("?", other, "hello")),
        }
    }

    /// Tells the badge to shift its clock by `offset_ms`.
    pub fn adjust(
        &self,
        link: &mut dyn BadgeLink,
        badge_id: &str,
        offset_ms: i64,
    ) -> Result<(), SyncError> {
        match link.call(&Request::TimeSync {
            adjust_ms: offset_ms,
        })? {
            Response::TimeSync { .. } => Ok(()),
            other => Err(Self::badge_error(badge_id, other, "time_sync")),
        }
    }

    /// Measures and corrects the badge clock in one go.
    pub fn sync_time(&self, link: &mut dyn BadgeLink) -> Result<TimeSyncResult, SyncError> {
        let hello = self.hello(link)?;
        if hello.offset_ms != 0 {
            self.adjust(link, &hello.badge_id, hello.offset_ms)?;
        }
        Ok(hello)
    }

    /// Chunks after `after_seq`. Asking again without an ack returns the same list.
    pub fn request(
        &self,
        link: &mut dyn BadgeLink,
        badge_id: &str,
        after_seq: u64,
    ) -> Result<Vec<SampleChunk>, SyncError> {
        match link.call(&Request::Pull { after_seq })? {
            Response::Chunks { chunks } => Ok(chunks),
            other => Err(Self::badge_error(badge_id, other, "pull")),
        }
    }

    /// Durably stores pulled chunks, shifted by the measured offset.
    pub fn store(
        &self,
        chunks: Vec<SampleChunk>,
        offset_ms: i64,
    ) -> Result<IngestReport, SyncError> {
        let batch = IngestBatch {
            chunks,
            scans: Vec::new(),
            clock_offset_ms: offset_ms,
        };
        Ok(self.hub.ingest(&batch, None)?)
    }

    /// Lets the badge free everything through `seq`, then records the cursor.
    pub fn ack(
        &self,
        link: &mut dyn BadgeLink,
        badge_id: &str,
        seq: u64,
    ) -> Result<PullCursor, SyncError> {
        match link.call(&Request::Ack { seq })? {
            Response::Ack { .. } => Ok(self.hub.advance_cursor(badge_id, seq)?),
            other => Err(Self::badge_error(badge_id, other, "ack")),
        }
    }

    /// A full session: measure, pull, store, ack, then correct the clock.
    pub fn pull(&self, link: &mut dyn BadgeLink) -> Result<PullOutcome, SyncError> {
        let hello = self.hello(link)?;
        let badge_id = hello.badge_id.clone();
        let mut cursor = self.hub.cursor(&badge_id);
        let mut reset = false;
        if cursor.last_acked_seq > hello.last_seq {
            tracing::warn!(badge = %badge_id, cursor = cursor.last_acked_seq, badge_last = hello.last_seq, "cursor ahead of badge, resetting");
            cursor = self.hub.reset_cursor(&badge_id, 0)?;
            reset = true;
        }
        let chunks = self.request(link, &badge_id, cursor.last_acked_seq)?;
        let received = chunks.len();
        let through = chunks.iter().map(|c| c.seq).max();
        let report = self.store(chunks, hello.offset_ms)?;
        if let Some(seq) = through {
            cursor = self.ack(link, &badge_id, seq)?;
        }
        if hello.offset_ms != 0 {
            self.adjust(link, &badge_id, hello.offset_ms)?;
        }
        Ok(PullOutcome {
            badge_id,
            offset_ms: hello.offset_ms,
            chunks_received: received,
            report,
            cursor,
            reset,
        })
    }
}

struct ScheduledLink {
    name: String,
    link: Box<dyn BadgeLink>,
    due_ms: i64,
}

/// Pulls every registered link once per period. A failed pull is retried
/// after `retry_ms` instead of waiting a whole period.
pub struct PullScheduler {
    puller: Puller,
    links: Vec<ScheduledLink>,
    period_ms: i64,
    retry_ms: i64,
}

impl PullScheduler {
    pub fn new(puller: Puller, period_ms: u64) -> Self {
        let period_ms = period_ms.max(1) as i64;
        Self {
            puller,
            links: Vec::new(),
            period_ms,
            retry_ms: (period_ms / 6).max(1),
        }
    }

    pub fn with_retry_ms(mut self, retry_ms: i64) -> Self {
        self.retry_ms = retry_ms.max(1);
        self
    }

    /// The new link is due immediately.
    pub fn add(&mut self, name: impl Into<String>, link: Box<dyn BadgeLink>) {
        self.links.push(ScheduledLink {
            name: name.into(),
            link,
            due_ms: i64::MIN,
        });
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Runs every link due at `now_ms`.
    pub fn tick(&mut self, now_ms: i64) -> Vec<(String, Result<PullOutcome, SyncError>)> {
        let mut out = Vec::new();
        for l in self.links.iter_mut().filter(|l| l.due_ms <= now_ms) {
            let result = self.puller.pull(l.link.as_mut());
            match &result {
                Ok(_) => l.due_ms = now_ms + self.period_ms,
                Err(e) => {
                    tracing::warn!(badge = %l.name, error = %e, "pull failed");
                    l.due_ms = now_ms + self.retry_ms.min(self.period_ms);
                }
            }
            out.push((l.name.clone(), result));
        }
        out
    }

    /// Earliest time any link is due.
    pub fn next_due(&self) -> Option<i64> {
        self.links.iter().map(|l| l.due_ms).min()
    }

    /// Ticks against the puller's clock until `stop` is set.
    pub fn run(mut self, clock: Arc<dyn Clock>, stop: Arc<AtomicBool>) {
        while !stop.load(Ordering::SeqCst) {
            self.tick(clock.now_ms());
            std::thread::sleep(Duration::from_millis(100));
        }
    }
}

//! Hub to badge wire protocol.
//!
//! The hub drives every exchange: it sends a [`Request`] and the badge answers
//! with exactly one [`Response`]. On a byte stream each message is a 4-byte
//! big-endian length followed by that many bytes of JSON.

use std::io::{self, Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::sim::SampleChunk;

/// Largest frame either side will accept.
pub const MAX_FRAME_BYTES: u32 = 64 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    Hello,
    /// Shift the badge clock by `adjust_ms`.
    TimeSync {
        adjust_ms: i64,
    },
    /// Every retained chunk with `seq > after_seq`.
    Pull {
        after_seq: u64,
    },
    /// The hub has stored everything through `seq`; the badge may free it.
    Ack {
        seq: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// The requested cursor is past the newest chunk the badge has written.
    CursorAhead,
    BadRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Response {
    Hello {
        badge_id: String,
        /// Newest chunk written, 0 if none yet.
        last_seq: u64,
        badge_ts: i64,
        overflowed: u64,
    },
    TimeSync {
        badge_ts: i64,
    },
    Chunks {
        chunks: Vec<SampleChunk>,
    },
    Ack {
        seq: u64,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

pub fn write_frame<T: Serialize>(w: &mut impl Write, msg: &T) -> io::Result<()> {
    let body = serde_json::to_vec(msg)?;
    let len = u32::try_from(body.len())
        .ok()
        .filter(|n| *n <= MAX_FRAME_BYTES)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()
}

/// Returns `Ok(None)` on a clean end of stream before a new frame.
pub fn read_frame<T: DeserializeOwned>(r: &mut impl Read) -> io::Result<Option<T>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME_BYTES {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame of {len} bytes"),
        ));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    Ok(Some(serde_json::from_slice(&body)?))
}

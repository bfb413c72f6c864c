//! A hardware badge holds 8 hours of volume data; left unpulled for 9 hours
//! it drops the oldest chunks. Phones have no fixed cap.
//!
//! Run with `cargo run --example flash_overflow`.

use openbadge::sim::{flash_store, FlashMemory, SampleChunk};

fn chunk(seq: u64) -> SampleChunk {
    SampleChunk {
        badge_id: "badge-A".into(),
        seq,
        period_ms: 250,
        start_ts: (seq as i64 - 1) * 60_000,
        values: vec![0.01; 240],
    }
}

fn main() {
    let chunks: Vec<SampleChunk> = (1..=9 * 60).map(chunk).collect();

    let out = flash_store(&chunks, 8.0);
    println!(
        "hardware: {} of {} chunks overflowed, seq {}..={} retained",
        out.overflowed_count,
        chunks.len(),
        out.retained.first().unwrap().seq,
        out.retained.last().unwrap().seq
    );

    // The stateful buffer frees acknowledged chunks, so regular pulls avoid loss.
    let mut flash = FlashMemory::new(Some(8.0));
    for c in &chunks {
        flash.push(c.clone());
        if c.seq % 60 == 0 {
            flash.release_through(c.seq);
        }
    }
    println!(
        "hourly pulls: {} overflowed, {} chunks waiting",
        flash.overflowed(),
        flash.len()
    );

    let mut phone = FlashMemory::new(None);
    chunks.iter().cloned().for_each(|c| phone.push(c));
    println!(
        "phone: {} overflowed, {:.1} h cached",
        phone.overflowed(),
        phone.occupancy_ms() / 3_600_000.0
    );
}

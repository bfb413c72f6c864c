//! Raw microphone samples to speaking events: band-pass, volume, median, detect.
//!
//! Run with `cargo run --example audio_pipeline`.

use openbadge::signal::{process_frames, AudioFrameSeries, PipelineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RATE: u32 = 8000;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let start_ts = 1_700_000_000_000;
    // 10 s: mains hum and hiss throughout, speech-like tone from 3 s to 7 s.
    let amplitudes: Vec<f64> = (0..10 * RATE)
        .map(|i| {
            let t = f64::from(i) / f64::from(RATE);
            let hum = 0.2 * (2.0 * std::f64::consts::PI * 50.0 * t).sin();
            let hiss = rng.random_range(-0.005..0.005);
            let speech = if (3.0..7.0).contains(&t) {
                let envelope = 0.5 + 0.5 * (2.0 * std::f64::consts::PI * 1.5 * t).sin();
                0.4 * envelope * (2.0 * std::f64::consts::PI * 440.0 * t).sin()
            } else {
                0.0
            };
            (hum + hiss + speech).clamp(-1.0, 1.0)
        })
        .collect();
    let frames = AudioFrameSeries::new("A", RATE, start_ts, amplitudes);

    let cfg = PipelineConfig::default();
    let (volumes, events) = process_frames(&frames, 250, &cfg).expect("valid input");
    println!("{} volume samples at 250 ms", volumes.len());
    for v in volumes.iter().step_by(4) {
        let bar = "#".repeat((v.value * 200.0).min(60.0) as usize);
        println!("{:>6} ms {:.4} {bar}", v.ts - start_ts, v.value);
    }
    for e in &events {
        println!(
            "{} spoke from {} ms to {} ms",
            e.participant_id,
            e.start_ts - start_ts,
            e.end_ts - start_ts
        );
    }
}

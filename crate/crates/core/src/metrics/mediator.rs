use std::f64::consts::PI;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{MetricsError, WindowStats};

/// Render-ready state of the Meeting Mediator: participants on a unit circle,
/// one edge per participant weighted by turns, and a ball pulled toward the
/// participants who take the most turns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediatorState {
    pub node_positions: IndexMap<String, [f64; 2]>,
    pub edge_weights: IndexMap<String, u32>,
    pub ball_xy: [f64; 2],
    pub ball_intensity: f64,
}

/// `n` points evenly spaced counter-clockwise on the unit circle, starting at (1, 0).
pub fn node_positions(n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|k| {
            let angle = 2.0 * PI * k as f64 / n as f64;
            [angle.cos(), angle.sin()]
        })
        .collect()
}

pub fn mediator_state(stats: &WindowStats, rate_max: f64) -> Result<MediatorState, MetricsError> {
    let n = stats.turns.len();
    if n < 2 {
        return Err(MetricsError::TooFewParticipants {
            required: 2,
            got: n,
        });
    }
    if rate_max.is_nan() || rate_max <= 0.0 {
        return Err(MetricsError::InvalidValue(format!(
            "rate_max must be positive, got {rate_max}"
        )));
    }
    let positions = node_positions(n);
    let total: u32 = stats.turns.values().sum();
    let mut ball = [0.0, 0.0];
    for (&turns, p) in stats.turns.values().zip(&positions) {
        let w = if total == 0 {
            1.0 / n as f64
        } else {
            f64::from(turns) / f64::from(total)
        };
        ball[0] += w * p[0];
        ball[1] += w * p[1];
    }
    Ok(MediatorState {
        node_positions: stats.turns.keys().cloned().zip(positions).collect(),
        edge_weights: stats.turns.clone(),
        ball_xy: ball,
        ball_intensity: (stats.turn_rate_per_min / rate_max).clamp(0.0, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::TimeWindow;

    fn stats(turns: &[u32], rate: f64) -> WindowStats {
        WindowStats {
            window: TimeWindow::new(0, 60_000).unwrap(),
            speaking_ms: (0..turns.len()).map(|i| (format!("p{i}"), 0)).collect(),
            turns: turns
                .iter()
                .enumerate()
                .map(|(i, t)| (format!("p{i}"), *t))
                .collect(),
            turn_rate_per_min: rate,
            overlap_pct: 0.0,
            gini: 0.0,
            dominant: None,
        }
    }

    #[test]
    fn equal_turns_center_the_ball() {
        for n in 2..8 {
            let m = mediator_state(&stats(&vec![3; n], 5.0), 20.0).unwrap();
            assert!(
                m.ball_xy[0].abs() < 1e-12 && m.ball_xy[1].abs() < 1e-12,
                "{n}: {:?}",
                m.ball_xy
            );
        }
        let m = mediator_state(&stats(&[0, 0, 0], 0.0), 20.0).unwrap();
        assert!(m.ball_xy[0].abs() < 1e-12 && m.ball_xy[1].abs() < 1e-12);
    }

    #[test]
    fn single_speaker_ball_sits_on_node() {
        let m = mediator_state(&stats(&[0, 0, 4], 4.0), 20.0).unwrap();
        assert_eq!(m.ball_xy, m.node_positions["p2"]);
    }

    #[test]
    fn weighted_centroid_example() {
        let m = mediator_state(&stats(&[3, 1, 0, 0], 4.0), 20.0).unwrap();
        assert!((m.ball_xy[0] - 0.75).abs() < 1e-12);
        assert!((m.ball_xy[1] - 0.25).abs() < 1e-12);
        assert!((m.ball_intensity - 0.2).abs() < 1e-12);
    }

    #[test]
    fn intensity_saturates() {
        assert_eq!(
            mediator_state(&stats(&[1, 1], 45.0), 20.0)
                .unwrap()
                .ball_intensity,
            1.0
        );
    }

    #[test]
    fn needs_two_participants() {
        assert!(mediator_state(&stats(&[1], 1.0), 20.0).is_err());
        assert!(mediator_state(&stats(&[1, 2], 1.0), 0.0).is_err());
    }
}

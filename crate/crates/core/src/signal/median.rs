use super::{PipelineError, VolumeSample};

/// Centered rolling median with shrunken (still odd) windows at the edges,
/// so the output keeps the input's length and timestamps.
///
/// Both window bounds only move forward, so a sorted buffer is maintained
/// incrementally instead of re-sorting per index.
pub fn rolling_median(
    series: &[VolumeSample],
    window: usize,
) -> Result<Vec<VolumeSample>, PipelineError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(PipelineError::Config(format!(
            "median window must be odd and >= 1, got {window}"
        )));
    }
    if window > series.len() {
        return Err(PipelineError::Input(format!(
            "median window {window} exceeds series length {}",
            series.len()
        )));
    }
    let n = series.len();
    let half = window / 2;
    let mut sorted: Vec<f64> = Vec::with_capacity(window);
    // Current buffer covers series[lo..hi].
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut out = Vec::with_capacity(n);

    for (i, sample) in series.iter().enumerate() {
        let h = half.min(i).min(n - 1 - i);
        let (want_lo, want_hi) = (i - h, i + h + 1);
        while hi < want_hi {
            let v = series[hi].value;
            let pos = sorted.partition_point(|x| x.total_cmp(&v).is_lt());
            sorted.insert(pos, v);
            hi += 1;
        }
        while lo < want_lo {
            let v = series[lo].value;
            let pos = sorted.partition_point(|x| x.total_cmp(&v).is_lt());
            sorted.remove(pos);
            lo += 1;
        }
        out.push(VolumeSample {
            value: sorted[sorted.len() / 2],
            ..sample.clone()
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> Vec<VolumeSample> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| VolumeSample::new("p", i as i64 * 10, v))
            .collect()
    }

    fn values(s: &[VolumeSample]) -> Vec<f64> {
        s.iter().map(|v| v.value).collect()
    }

    #[test]
    fn window_one_is_identity() {
        let s = series(&[0.3, 0.1, 0.9, 0.2]);
        assert_eq!(rolling_median(&s, 1).unwrap(), s);
    }

    #[test]
    fn single_spike_removed() {
        let s = series(&[0.0, 0.0, 0.9, 0.0, 0.0]);
        assert_eq!(values(&rolling_median(&s, 5).unwrap()), vec![0.0; 5]);
    }

    #[test]
    fn edges_use_shrunken_windows() {
        // i=0: [0.5]; i=1: median(0.5,0.1,0.2); i=2: median of all five.
        let s = series(&[0.5, 0.1, 0.2, 0.7, 0.9]);
        assert_eq!(
            values(&rolling_median(&s, 5).unwrap()),
            vec![0.5, 0.2, 0.5, 0.7, 0.9]
        );
    }

    #[test]
    fn duplicates_are_handled() {
        let s = series(&[0.2, 0.2, 0.2, 0.1, 0.2, 0.2]);
        assert_eq!(values(&rolling_median(&s, 3).unwrap()), vec![0.2; 6]);
    }

    #[test]
    fn bad_windows() {
        let s = series(&[0.1, 0.2]);
        assert!(matches!(
            rolling_median(&s, 2),
            Err(PipelineError::Config(_))
        ));
        assert!(matches!(
            rolling_median(&s, 3),
            Err(PipelineError::Input(_))
        ));
    }
}

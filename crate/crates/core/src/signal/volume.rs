use super::{AudioFrameSeries, PipelineError, VolumeSample, VolumeStat};

/// Averages raw frames into one volume value per full `period_ms`. A trailing
/// partial period is dropped. `period_ms` must cover a whole number of
/// samples at the series' sample rate.
pub fn compute_volume(
    frames: &AudioFrameSeries,
    period_ms: u32,
    stat: VolumeStat,
) -> Result<Vec<VolumeSample>, PipelineError> {
    if frames.amplitudes.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    frames.validate()?;
    let scaled = u64::from(frames.sample_rate) * u64::from(period_ms);
    if period_ms == 0 || scaled < 1000 {
        return Err(PipelineError::Config(format!(
            "period of {period_ms} ms spans less than one sample at {} Hz",
            frames.sample_rate
        )));
    }
    if scaled % 1000 != 0 {
        return Err(PipelineError::Config(format!(
            "period of {period_ms} ms is not a whole number of samples at {} Hz",
            frames.sample_rate
        )));
    }
    let per_period = (scaled / 1000) as usize;

    Ok(frames
        .amplitudes
        .chunks_exact(per_period)
        .enumerate()
        .map(|(k, chunk)| {
            let value = match stat {
                VolumeStat::MeanAbs => {
                    chunk.iter().map(|a| a.abs()).sum::<f64>() / per_period as f64
                }
                VolumeStat::Rms => {
                    (chunk.iter().map(|a| a * a).sum::<f64>() / per_period as f64).sqrt()
                }
            };
            VolumeSample {
                participant_id: frames.participant_id.clone(),
                ts: frames.start_ts + k as i64 * i64::from(period_ms),
                value: value.min(1.0),
            }
        })
        .collect())
}

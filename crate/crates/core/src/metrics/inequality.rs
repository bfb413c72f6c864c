use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    #[default]
    Gini,
    /// `1 - H(p) / ln(n)` over speaking-time shares.
    NormalizedEntropy,
}

fn check(values: &[f64]) -> Result<(), MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::TooFewParticipants {
            required: 1,
            got: 0,
        });
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(MetricsError::InvalidValue(format!(
            "inequality input {v} must be finite and >= 0"
        )));
    }
    Ok(())
}

/// Gini coefficient of nonnegative values; 0 when all are zero.
///
/// Uses the sorted-rank form `Σ (2i - n - 1) x_(i) / (n Σx)`, which equals the
/// mean absolute pairwise difference over twice the mean.
pub fn gini(values: &[f64]) -> Result<f64, MetricsError> {
    check(values)?;
    let total: f64 = values.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x)
        .sum();
    Ok((weighted / (n * total)).clamp(0.0, 1.0))
}

pub fn normalized_entropy_inequality(values: &[f64]) -> Result<f64, MetricsError> {
    check(values)?;
    let total: f64 = values.iter().sum();
    if total == 0.0 || values.len() == 1 {
        return Ok(0.0);
    }
    let h: f64 = values
        .iter()
        .filter(|v| **v > 0.0)
        .map(|v| v / total)
        .map(|p| -p * p.ln())
        .sum();
    Ok((1.0 - h / (values.len() as f64).ln()).clamp(0.0, 1.0))
}

pub fn inequality(values: &[f64], kind: Inequality) -> Result<f64, MetricsError> {
    match kind {
        Inequality::Gini => gini(values),
        Inequality::NormalizedEntropy => normalized_entropy_inequality(values),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_values_have_zero_gini() {
        assert_eq!(gini(&[5.0, 5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert_eq!(gini(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn one_hot_is_n_minus_one_over_n() {
        assert!((gini(&[0.0, 0.0, 7.0, 0.0]).unwrap() - 0.75).abs() < 1e-12);
        assert!((gini(&[3.0, 0.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_and_negative_inputs_error() {
        assert!(gini(&[]).is_err());
        assert!(gini(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn entropy_variant_bounds() {
        assert!(
            normalized_entropy_inequality(&[2.0, 2.0, 2.0])
                .unwrap()
                .abs()
                < 1e-12
        );
        assert!((normalized_entropy_inequality(&[0.0, 9.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
    }
}

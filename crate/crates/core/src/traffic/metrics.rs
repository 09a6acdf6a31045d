use super::TrafficError;

/// Root-mean-square error divided by the mean of `actual`.
pub fn nrmse(predicted: &[f64], actual: &[f64]) -> Result<f64, TrafficError> {
    if predicted.len() != actual.len() || actual.is_empty() {
        return Err(TrafficError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(TrafficError::ZeroMean);
    }
    let mse = predicted.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum::<f64>() / n;
    Ok(mse.sqrt() / mean)
}

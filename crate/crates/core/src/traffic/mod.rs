//! Cell traffic-load series, forecasting, and the threshold gate.
//!
//! Forecasters see a fixed 32-bucket context and produce at most 128 buckets, so a
//! forecast horizon is covered by re-bucketing the raw series first: [`patch_plan`] picks
//! the bucket width, [`rescale`] aggregates by mean.

mod gate;
mod loader;
mod metrics;
mod predictor;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gate::{gate, zigbee_delay, Route};
pub use loader::{load_traffic_csv, read_traffic_csv};
pub use metrics::nrmse;
pub use predictor::{
    predict, MovingAverage, NaiveLast, Predictor, PredictorKind, RemotePredictor, SeasonalNaive, PREDICTOR_URL_ENV,
};

/// Buckets of context every forecaster receives.
pub const CONTEXT_LEN: usize = 32;
/// Longest forecast a forecaster produces.
pub const MAX_HORIZON: usize = 128;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("invalid traffic series: {0}")]
    InvalidSeries(String),
    #[error("insufficient history: need {needed} buckets of {bucket_minutes} min, have {available}")]
    InsufficientHistory {
        needed: usize,
        available: usize,
        bucket_minutes: u32,
    },
    #[error("insufficient context: predictor needs {needed} buckets, have {available}")]
    InsufficientContext { needed: usize, available: usize },
    #[error("forecast length {0} outside 1..={MAX_HORIZON}")]
    InvalidHorizon(usize),
    #[error("length mismatch: {predicted} predicted vs {actual} actual values")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("NRMSE undefined: actual series has zero mean")]
    ZeroMean,
    #[error("series is in raw volume units; normalise by cell capacity first")]
    UnitsMismatch,
    #[error("remote predictor: {0}")]
    Remote(String),
    #[error("traffic CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("traffic CSV line {line}: {reason}")]
    Record { line: u64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadUnits {
    /// Fraction of cell capacity, in `[0, 1]`.
    Fraction,
    /// Raw activity volume as found in the source data.
    Raw,
}

/// Uniformly sampled load of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSeries {
    values: Vec<f64>,
    bucket_minutes: u32,
    start_time: DateTime<Utc>,
    units: LoadUnits,
}

impl TrafficSeries {
    pub fn new(
        values: Vec<f64>,
        bucket_minutes: u32,
        start_time: DateTime<Utc>,
        units: LoadUnits,
    ) -> Result<Self, TrafficError> {
        if values.is_empty() {
            return Err(TrafficError::InvalidSeries("no samples".into()));
        }
        if bucket_minutes == 0 {
            return Err(TrafficError::InvalidSeries("bucket width must be > 0 minutes".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(TrafficError::InvalidSeries(format!("non-finite sample {bad}")));
        }
        if units == LoadUnits::Fraction {
            if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(TrafficError::InvalidSeries(format!("fraction sample {bad} outside [0, 1]")));
            }
        }
        Ok(TrafficSeries {
            values,
            bucket_minutes,
            start_time,
            units,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bucket_minutes(&self) -> u32 {
        self.bucket_minutes
    }

    pub fn start_time(&self) -> DateTime<Utc> {
        self.start_time
    }

    pub fn units(&self) -> LoadUnits {
        self.units
    }

    /// Start of the bucket after the last one.
    pub fn end_time(&self) -> DateTime<Utc> {
        self.start_time + Duration::minutes(self.bucket_minutes as i64 * self.values.len() as i64)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Raw volumes divided by `capacity`, saturating at 1.
    pub fn to_fraction(&self, capacity: f64) -> Result<TrafficSeries, TrafficError> {
        if self.units == LoadUnits::Fraction {
            return Ok(self.clone());
        }
        if !(capacity > 0.0) {
            return Err(TrafficError::InvalidSeries(format!("capacity must be > 0, got {capacity}")));
        }
        let values = self.values.iter().map(|v| (v / capacity).clamp(0.0, 1.0)).collect();
        TrafficSeries::new(values, self.bucket_minutes, self.start_time, LoadUnits::Fraction)
    }

    /// The most recent `n` buckets.
    pub fn tail(&self, n: usize) -> TrafficSeries {
        let skip = self.values.len().saturating_sub(n);
        TrafficSeries {
            values: self.values[skip..].to_vec(),
            bucket_minutes: self.bucket_minutes,
            start_time: self.start_time + Duration::minutes(self.bucket_minutes as i64 * skip as i64),
            units: self.units,
        }
    }

    /// Buckets `[0, n)` and `[n, len)`.
    pub fn split_at(&self, n: usize) -> Result<(TrafficSeries, TrafficSeries), TrafficError> {
        if n == 0 || n >= self.values.len() {
            return Err(TrafficError::InvalidSeries(format!(
                "split point {n} must lie inside 1..{}",
                self.values.len()
            )));
        }
        let head = TrafficSeries {
            values: self.values[..n].to_vec(),
            ..self.clone()
        };
        let tail = self.tail(self.values.len() - n);
        Ok((head, tail))
    }
}

/// Bucket widths the re-scaler may choose below one hour. Beyond that, whole hours.
const FRIENDLY_MINUTES: [u32; 12] = [1, 2, 3, 4, 5, 6, 10, 12, 15, 20, 30, 60];

/// Resolution chosen to cover a forecast horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchPlan {
    pub bucket_minutes: u32,
    /// Forecast buckets needed to span the horizon, at most [`MAX_HORIZON`].
    pub horizon_steps: usize,
}

/// Smallest friendly bucket width, no finer than the source and a multiple of it, such that
/// `horizon_minutes` fits in [`MAX_HORIZON`] buckets.
pub fn patch_plan(source_bucket_minutes: u32, horizon_minutes: u32) -> Result<PatchPlan, TrafficError> {
    if horizon_minutes == 0 {
        return Err(TrafficError::InvalidSeries("horizon must be > 0 minutes".into()));
    }
    if source_bucket_minutes == 0 {
        return Err(TrafficError::InvalidSeries("source bucket must be > 0 minutes".into()));
    }
    let floor = horizon_minutes.div_ceil(MAX_HORIZON as u32).max(source_bucket_minutes);
    let bucket_minutes = FRIENDLY_MINUTES
        .into_iter()
        .chain((2..).map(|h| 60 * h))
        .find(|&c| c >= floor && c % source_bucket_minutes == 0)
        .expect("multiples of 60 * source always qualify");
    Ok(PatchPlan {
        bucket_minutes,
        horizon_steps: horizon_minutes.div_ceil(bucket_minutes) as usize,
    })
}

/// Re-buckets `series` by mean to the resolution [`patch_plan`] picks for `horizon_minutes`.
///
/// Buckets are aligned to the end of the series; leftover oldest samples that do not fill a
/// whole bucket are dropped. At least [`CONTEXT_LEN`] buckets must remain.
pub fn rescale(series: &TrafficSeries, horizon_minutes: u32) -> Result<TrafficSeries, TrafficError> {
    let plan = patch_plan(series.bucket_minutes, horizon_minutes)?;
    let k = (plan.bucket_minutes / series.bucket_minutes) as usize;
    let buckets = series.len() / k;
    if buckets < CONTEXT_LEN {
        return Err(TrafficError::InsufficientHistory {
            needed: CONTEXT_LEN,
            available: buckets,
            bucket_minutes: plan.bucket_minutes,
        });
    }
    if k == 1 {
        return Ok(series.clone());
    }
    let skip = series.len() - buckets * k;
    let values = series.values[skip..]
        .chunks_exact(k)
        .map(|c| c.iter().sum::<f64>() / k as f64)
        .collect();
    Ok(TrafficSeries {
        values,
        bucket_minutes: plan.bucket_minutes,
        start_time: series.start_time + Duration::minutes(series.bucket_minutes as i64 * skip as i64),
        units: series.units,
    })
}

#[cfg(test)]
pub(crate) fn epoch() -> DateTime<Utc> {
    DateTime::from_timestamp(1_383_264_000, 0).expect("valid timestamp")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: Vec<f64>, bucket: u32) -> TrafficSeries {
        TrafficSeries::new(values, bucket, epoch(), LoadUnits::Fraction).unwrap()
    }

    #[test]
    fn six_hundred_minutes_use_five_minute_buckets() {
        let plan = patch_plan(1, 600).unwrap();
        assert_eq!(plan, PatchPlan { bucket_minutes: 5, horizon_steps: 120 });
    }

    #[test]
    fn short_horizon_keeps_source_resolution() {
        let s = series((0..200).map(|i| (i % 10) as f64 / 10.0).collect(), 1);
        assert_eq!(patch_plan(1, 128).unwrap().bucket_minutes, 1);
        assert_eq!(rescale(&s, 128).unwrap(), s);
    }

    #[test]
    fn coarse_source_bounds_bucket_from_below() {
        // ten-minute source data cannot be split into five-minute buckets
        assert_eq!(patch_plan(10, 600).unwrap(), PatchPlan { bucket_minutes: 10, horizon_steps: 60 });
        assert_eq!(patch_plan(1, 128 * 7).unwrap().bucket_minutes, 10);
        assert_eq!(patch_plan(1, 128 * 61).unwrap().bucket_minutes, 120);
        assert_eq!(patch_plan(7, 60).unwrap().bucket_minutes, 420);
    }

    #[test]
    fn constant_series_stays_constant() {
        let s = series(vec![0.37; 600], 1);
        let r = rescale(&s, 600).unwrap();
        assert_eq!(r.bucket_minutes(), 5);
        assert_eq!(r.len(), 120);
        assert!(r.values().iter().all(|&v| (v - 0.37).abs() < 1e-15));
    }

    #[test]
    fn rescale_drops_oldest_partial_bucket() {
        let s = series((0..163).map(|i| i as f64 / 200.0).collect(), 1);
        let r = rescale(&s, 600).unwrap();
        assert_eq!(r.len(), 32);
        assert_eq!(r.start_time(), epoch() + Duration::minutes(3));
        assert_eq!(r.end_time(), s.end_time());
        assert!((r.values()[0] - (3.0 + 4.0 + 5.0 + 6.0 + 7.0) / 5.0 / 200.0).abs() < 1e-15);
    }

    #[test]
    fn rescale_needs_context() {
        let s = series(vec![0.1; 159], 1);
        assert!(matches!(
            rescale(&s, 600),
            Err(TrafficError::InsufficientHistory { needed: 32, available: 31, bucket_minutes: 5 })
        ));
    }

    #[test]
    fn series_invariants() {
        assert!(TrafficSeries::new(vec![], 5, epoch(), LoadUnits::Raw).is_err());
        assert!(TrafficSeries::new(vec![1.0], 0, epoch(), LoadUnits::Raw).is_err());
        assert!(TrafficSeries::new(vec![1.5], 5, epoch(), LoadUnits::Fraction).is_err());
        assert!(TrafficSeries::new(vec![1.5], 5, epoch(), LoadUnits::Raw).is_ok());
    }

    #[test]
    fn raw_to_fraction_saturates() {
        let raw = TrafficSeries::new(vec![50.0, 200.0, 400.0], 10, epoch(), LoadUnits::Raw).unwrap();
        let f = raw.to_fraction(200.0).unwrap();
        assert_eq!(f.values(), &[0.25, 1.0, 1.0]);
        assert_eq!(f.units(), LoadUnits::Fraction);
    }
}

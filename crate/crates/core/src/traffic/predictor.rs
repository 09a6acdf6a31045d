use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{LoadUnits, TrafficError, TrafficSeries, CONTEXT_LEN, MAX_HORIZON};

/// Environment variable holding the remote forecaster's URL.
pub const PREDICTOR_URL_ENV: &str = "LINKS_PREDICTOR_URL";

/// A forecaster over bucketed load.
pub trait Predictor: Send + Sync {
    fn name(&self) -> &str;

    /// Number of trailing buckets passed to [`Predictor::forecast`].
    fn context_len(&self) -> usize {
        CONTEXT_LEN
    }

    /// `steps` future buckets from the given context.
    fn forecast(&self, context: &[f64], steps: usize) -> Result<Vec<f64>, TrafficError>;
}

/// Repeats the last observed value.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveLast;

impl Predictor for NaiveLast {
    fn name(&self) -> &str {
        "naive-last"
    }

    fn forecast(&self, context: &[f64], steps: usize) -> Result<Vec<f64>, TrafficError> {
        let last = *context.last().ok_or(TrafficError::InsufficientContext { needed: 1, available: 0 })?;
        Ok(vec![last; steps])
    }
}

/// Mean of the last `window` values, repeated.
#[derive(Debug, Clone, Copy)]
pub struct MovingAverage {
    pub window: usize,
}

impl Default for MovingAverage {
    fn default() -> Self {
        MovingAverage { window: 8 }
    }
}

impl Predictor for MovingAverage {
    fn name(&self) -> &str {
        "moving-average"
    }

    fn forecast(&self, context: &[f64], steps: usize) -> Result<Vec<f64>, TrafficError> {
        if self.window == 0 || context.len() < self.window {
            return Err(TrafficError::InsufficientContext {
                needed: self.window.max(1),
                available: context.len(),
            });
        }
        let recent = &context[context.len() - self.window..];
        let mean = recent.iter().sum::<f64>() / self.window as f64;
        Ok(vec![mean; steps])
    }
}

/// Value one period earlier.
#[derive(Debug, Clone, Copy)]
pub struct SeasonalNaive {
    pub period: usize,
}

impl SeasonalNaive {
    /// One day of buckets at the given width.
    pub fn daily(bucket_minutes: u32) -> Result<Self, TrafficError> {
        if bucket_minutes == 0 || 1440 % bucket_minutes != 0 {
            return Err(TrafficError::InvalidSeries(format!(
                "{bucket_minutes}-minute buckets do not tile a day"
            )));
        }
        Ok(SeasonalNaive {
            period: (1440 / bucket_minutes) as usize,
        })
    }
}

impl Predictor for SeasonalNaive {
    fn name(&self) -> &str {
        "seasonal-naive"
    }

    /// A full period of history, and never less than the standard context.
    fn context_len(&self) -> usize {
        self.period.max(CONTEXT_LEN)
    }

    fn forecast(&self, context: &[f64], steps: usize) -> Result<Vec<f64>, TrafficError> {
        if self.period == 0 || context.len() < self.period {
            return Err(TrafficError::InsufficientContext {
                needed: self.period.max(1),
                available: context.len(),
            });
        }
        let base = context.len() - self.period;
        Ok((0..steps).map(|h| context[base + h % self.period]).collect())
    }
}

/// Forecaster behind an HTTP endpoint.
///
/// Request: `POST {url}` with `{"context": [f64; 32], "horizon": steps}`.
/// Response: `{"forecast": [f64; steps]}`.
pub struct RemotePredictor {
    url: String,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    context: &'a [f64],
    horizon: usize,
}

#[derive(Deserialize)]
struct RemoteResponse {
    forecast: Vec<f64>,
}

impl RemotePredictor {
    pub fn new(url: impl Into<String>) -> Result<Self, TrafficError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| TrafficError::Remote(e.to_string()))?;
        Ok(RemotePredictor { url: url.into(), client })
    }

    pub fn from_env() -> Result<Self, TrafficError> {
        let url = std::env::var(PREDICTOR_URL_ENV)
            .map_err(|_| TrafficError::Remote(format!("{PREDICTOR_URL_ENV} is not set")))?;
        Self::new(url)
    }
}

impl Predictor for RemotePredictor {
    fn name(&self) -> &str {
        "remote"
    }

    fn forecast(&self, context: &[f64], steps: usize) -> Result<Vec<f64>, TrafficError> {
        let response = self
            .client
            .post(&self.url)
            .json(&RemoteRequest { context, horizon: steps })
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| TrafficError::Remote(e.to_string()))?;
        let body: RemoteResponse = response.json().map_err(|e| TrafficError::Remote(e.to_string()))?;
        Ok(body.forecast)
    }
}

/// Built-in forecaster names as accepted on the command line and in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    #[default]
    NaiveLast,
    MovingAverage,
    SeasonalNaive,
    Remote,
}

impl PredictorKind {
    pub fn build(self, bucket_minutes: u32) -> Result<Box<dyn Predictor>, TrafficError> {
        Ok(match self {
            PredictorKind::NaiveLast => Box::new(NaiveLast),
            PredictorKind::MovingAverage => Box::new(MovingAverage::default()),
            PredictorKind::SeasonalNaive => Box::new(SeasonalNaive::daily(bucket_minutes)?),
            PredictorKind::Remote => Box::new(RemotePredictor::from_env()?),
        })
    }
}

impl FromStr for PredictorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive-last" => Ok(PredictorKind::NaiveLast),
            "moving-average" => Ok(PredictorKind::MovingAverage),
            "seasonal-naive" => Ok(PredictorKind::SeasonalNaive),
            "remote" => Ok(PredictorKind::Remote),
            other => Err(format!(
                "unknown predictor `{other}` (expected naive-last, moving-average, seasonal-naive or remote)"
            )),
        }
    }
}

/// Forecast of `steps` buckets following `history`, at the same resolution.
///
/// Fraction-unit forecasts are clipped to `[0, 1]`.
pub fn predict(predictor: &dyn Predictor, history: &TrafficSeries, steps: usize) -> Result<TrafficSeries, TrafficError> {
    if !(1..=MAX_HORIZON).contains(&steps) {
        return Err(TrafficError::InvalidHorizon(steps));
    }
    let needed = predictor.context_len().max(CONTEXT_LEN);
    if history.len() < needed {
        return Err(TrafficError::InsufficientContext {
            needed,
            available: history.len(),
        });
    }
    let context = &history.values()[history.len() - predictor.context_len()..];
    let mut values = predictor.forecast(context, steps)?;
    if values.len() != steps {
        return Err(TrafficError::Remote(format!(
            "{} returned {} values for a {steps}-step forecast",
            predictor.name(),
            values.len()
        )));
    }
    if history.units() == LoadUnits::Fraction {
        for v in &mut values {
            *v = v.clamp(0.0, 1.0);
        }
    }
    TrafficSeries::new(values, history.bucket_minutes(), history.end_time(), history.units())
}

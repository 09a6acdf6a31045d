use std::collections::{BTreeSet, HashSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::scenario::{GeoPoint, SensorType};

pub const PLAN_FORMAT_VERSION: u32 = 1;

fn default_version() -> u32 {
    PLAN_FORMAT_VERSION
}

/// One sensor-data request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub sensor_id: String,
    pub sensor_type: SensorType,
    pub location: GeoPoint,
    /// `[start, end)`.
    pub time_range: [DateTime<Utc>; 2],
    /// Requested payload; when absent the registry's record size and rate decide.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub est_payload_bits: Option<u64>,
}

impl PlanEntry {
    pub fn hours(&self) -> f64 {
        (self.time_range[1] - self.time_range[0]).num_milliseconds() as f64 / 3.6e6
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalPlan {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub query: String,
    pub entries: Vec<PlanEntry>,
}

impl RetrievalPlan {
    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.version != PLAN_FORMAT_VERSION {
            return Err(PlannerError::InvalidPlan(format!(
                "unsupported plan version {} (expected {PLAN_FORMAT_VERSION})",
                self.version
            )));
        }
        let mut ids = HashSet::new();
        for (k, e) in self.entries.iter().enumerate() {
            let at = format!("entries[{k}] ({})", e.sensor_id);
            if e.sensor_id.trim().is_empty() {
                return Err(PlannerError::InvalidPlan(format!("entries[{k}]: empty sensor_id")));
            }
            if !ids.insert(e.sensor_id.as_str()) {
                return Err(PlannerError::InvalidPlan(format!("{at}: duplicate sensor_id")));
            }
            if e.time_range[0] >= e.time_range[1] {
                return Err(PlannerError::InvalidPlan(format!("{at}: time range start must precede end")));
            }
            if e.est_payload_bits == Some(0) {
                return Err(PlannerError::InvalidPlan(format!("{at}: est_payload_bits must be > 0")));
            }
            let GeoPoint { lat, lon } = e.location;
            if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
                return Err(PlannerError::InvalidPlan(format!("{at}: location ({lat}, {lon}) out of range")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<RetrievalPlan, PlannerError> {
        let plan: RetrievalPlan = serde_json::from_str(text).map_err(|e| PlannerError::InvalidPlan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn sensor_ids(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.sensor_id.as_str()).collect()
    }
}

/// Fenced code blocks as `(info string, body)`.
pub(crate) fn fenced_blocks(text: &str) -> Vec<(String, String)> {
    let mut blocks = Vec::new();
    let mut open: Option<(String, Vec<&str>)> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        match open.take() {
            None => {
                if let Some(info) = trimmed.strip_prefix("```") {
                    open = Some((info.trim().to_ascii_lowercase(), Vec::new()));
                }
            }
            Some((info, mut body)) => {
                if trimmed.trim_end() == "```" {
                    blocks.push((info, body.join("\n")));
                } else {
                    body.push(line);
                    open = Some((info, body));
                }
            }
        }
    }
    blocks
}

/// The last plan in `message`: a ```json or ```plan block holding an object with `entries`.
///
/// `None` when the message carries no plan at all, `Some(Err)` when the last candidate
/// fails to parse or validate.
pub fn extract_plan(message: &str) -> Option<Result<RetrievalPlan, String>> {
    let candidate = fenced_blocks(message)
        .into_iter()
        .filter(|(info, body)| (info == "json" || info == "plan") && body.contains("\"entries\""))
        .next_back()?;
    Some(RetrievalPlan::from_json(&candidate.1).map_err(|e| e.to_string()))
}

/// F1 over selected sensor ids.
pub fn plan_accuracy(predicted: &RetrievalPlan, gold: &RetrievalPlan) -> Result<f64, PlannerError> {
    let gold = gold.sensor_ids();
    if gold.is_empty() {
        return Err(PlannerError::EmptyGold);
    }
    let predicted = predicted.sensor_ids();
    let hits = predicted.intersection(&gold).count() as f64;
    if hits == 0.0 {
        return Ok(0.0);
    }
    let p = hits / predicted.len() as f64;
    let r = hits / gold.len() as f64;
    Ok(2.0 * p * r / (p + r))
}

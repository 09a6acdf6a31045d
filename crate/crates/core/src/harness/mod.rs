//! End-to-end runs: query to plan to devices, forecast and gate, then RRM or Zigbee.
//!
//! [`PipelineInputs`] bundles every fixture a run reads. [`prepare`] performs everything
//! that does not depend on the threshold (planning, conversion, forecasting and the channel
//! draw), so a threshold sweep reuses one plan and one channel realization.

mod eval;
mod pipeline;
mod sweep;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::planner::{CardSet, Gazetteer, PlannerError, RetrievalPlan, SensorRegistry, ToolBox, DEFAULT_STEP_LIMIT};
use crate::scenario::{load_scenario, GeoPoint, Scenario};
use crate::traffic::{load_traffic_csv, PredictorKind, TrafficSeries};

pub use eval::{eval_accuracy, write_eval_csv, EvalFixture, EvalQuery, EvalRow, EvalStatus};
pub use pipeline::{prepare, run_pipeline, CellForecast, DeviceOutcome, PipelineResult, Prepared};
pub use sweep::{sweep_tau, write_sweep_csv, SweepRow};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

/// Pipeline stage an error is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Planning,
    Conversion,
    Forecast,
    Gate,
    Rrm,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Planning => "planning",
            Stage::Conversion => "conversion",
            Stage::Forecast => "forecast",
            Stage::Gate => "gate",
            Stage::Rrm => "rrm",
        })
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage: {source}")]
pub struct HarnessError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl HarnessError {
    pub fn new(stage: Stage, source: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        HarnessError {
            stage,
            source: source.into(),
        }
    }

    pub(crate) fn at(stage: Stage) -> impl FnOnce(PlannerError) -> HarnessError {
        move |e| HarnessError::new(stage, e)
    }
}

/// Centre of a traffic cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub cell_id: String,
    pub lat: f64,
    pub lon: f64,
}

impl Cell {
    pub fn location(&self) -> GeoPoint {
        GeoPoint {
            lat: self.lat,
            lon: self.lon,
        }
    }
}

fn default_step_limit() -> usize {
    DEFAULT_STEP_LIMIT
}

fn default_max_rounds() -> usize {
    10
}

fn default_config_version() -> u32 {
    CONFIG_FORMAT_VERSION
}

/// The pipeline config file. Paths are relative to the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_config_version")]
    pub version: u32,
    pub scenario: PathBuf,
    pub query: String,
    pub cards: PathBuf,
    pub registry: PathBuf,
    pub gazetteer: PathBuf,
    pub traffic: PathBuf,
    pub cells: Vec<Cell>,
    /// Raw traffic volume that counts as a fully loaded cell.
    pub capacity: f64,
    /// Transmission window the forecast must cover.
    pub horizon_minutes: u32,
    #[serde(default)]
    pub predictor: PredictorKind,
    #[serde(default = "default_step_limit")]
    pub step_limit: usize,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default)]
    pub gold_plan: Option<PathBuf>,
    /// Script used with the mock backend.
    #[serde(default)]
    pub mock_script: Option<PathBuf>,
}

/// Everything a pipeline run reads, loaded and validated.
#[derive(Debug, Clone)]
pub struct PipelineInputs {
    pub scenario: Scenario,
    pub query: String,
    pub cards: CardSet,
    pub tools: ToolBox,
    pub traffic: BTreeMap<String, TrafficSeries>,
    pub cells: Vec<Cell>,
    pub capacity: f64,
    pub horizon_minutes: u32,
    pub predictor: PredictorKind,
    pub step_limit: usize,
    pub max_rounds: usize,
    pub gold: Option<RetrievalPlan>,
    pub mock_script: Option<PathBuf>,
}

fn config_err(e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> HarnessError {
    HarnessError::new(Stage::Config, e)
}

impl PipelineInputs {
    /// Loads a config file and every file it names. `scenario_override` replaces the
    /// config's scenario path.
    pub fn load(config_path: &Path, scenario_override: Option<&Path>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(config_path)
            .map_err(|e| config_err(format!("reading {}: {e}", config_path.display())))?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| config_err(format!("{}: {e}", config_path.display())))?;
        let base = config_path.parent().unwrap_or(Path::new("."));
        Self::from_config(config, base, scenario_override)
    }

    pub fn from_config(
        config: PipelineConfig,
        base: &Path,
        scenario_override: Option<&Path>,
    ) -> Result<Self, HarnessError> {
        if config.version != CONFIG_FORMAT_VERSION {
            return Err(config_err(format!("unsupported config version {}", config.version)));
        }
        let at = |p: &Path| base.join(p);
        let scenario_path = scenario_override.map(Path::to_path_buf).unwrap_or_else(|| at(&config.scenario));
        let scenario = load_scenario(&scenario_path).map_err(config_err)?;
        let cards = CardSet::load(&at(&config.cards)).map_err(config_err)?;
        let registry = SensorRegistry::load(&at(&config.registry)).map_err(config_err)?;
        let gazetteer = Gazetteer::load(&at(&config.gazetteer)).map_err(config_err)?;
        let traffic = load_traffic_csv(&at(&config.traffic)).map_err(config_err)?;
        let gold = match &config.gold_plan {
            Some(p) => {
                let text = std::fs::read_to_string(at(p))
                    .map_err(|e| config_err(format!("reading {}: {e}", at(p).display())))?;
                Some(RetrievalPlan::from_json(&text).map_err(config_err)?)
            }
            None => None,
        };
        let inputs = PipelineInputs {
            scenario,
            query: config.query,
            cards,
            tools: ToolBox::new(registry, gazetteer),
            traffic,
            cells: config.cells,
            capacity: config.capacity,
            horizon_minutes: config.horizon_minutes,
            predictor: config.predictor,
            step_limit: config.step_limit,
            max_rounds: config.max_rounds,
            gold,
            mock_script: config.mock_script.map(|p| at(&p)),
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.cells.is_empty() {
            return Err(config_err("no traffic cells configured"));
        }
        if let Some(c) = self.cells.iter().find(|c| !self.traffic.contains_key(&c.cell_id)) {
            return Err(config_err(format!("cell `{}` has no rows in the traffic file", c.cell_id)));
        }
        if !(self.capacity > 0.0) {
            return Err(config_err(format!("capacity must be > 0, got {}", self.capacity)));
        }
        if self.horizon_minutes == 0 {
            return Err(config_err("horizon_minutes must be > 0"));
        }
        if self.step_limit < 1 || self.max_rounds < 1 {
            return Err(config_err("step_limit and max_rounds must be >= 1"));
        }
        if self.scenario.geo_origin.is_none() {
            return Err(config_err("scenario needs `bs.origin` to place sensors"));
        }
        Ok(())
    }

    /// SHA-256 over every input in canonical form, plus the seed.
    pub fn digest(&self, seed: u64) -> String {
        let mut h = Sha256::new();
        let mut part = |label: &str, bytes: &[u8]| {
            h.update(label.as_bytes());
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        };
        fn json<T: Serialize + ?Sized>(v: &T) -> Vec<u8> {
            serde_json::to_vec(v).expect("inputs serialize")
        }
        part("scenario", self.scenario.to_json().as_bytes());
        part("query", self.query.as_bytes());
        part("cards", &json(&self.cards));
        part("registry", &json(&self.tools.registry.records()));
        part("gazetteer", &json(self.tools.gazetteer.places()));
        part("traffic", &json(&self.traffic));
        part("cells", &json(&self.cells));
        part(
            "settings",
            &json(&(
                self.capacity,
                self.horizon_minutes,
                self.predictor,
                self.step_limit,
                self.max_rounds,
            )),
        );
        part("gold", &json(&self.gold));
        if let Some(p) = &self.mock_script {
            part("mock_script", &std::fs::read(p).unwrap_or_default());
        }
        part("seed", &seed.to_le_bytes());
        hex::encode(h.finalize())
    }
}

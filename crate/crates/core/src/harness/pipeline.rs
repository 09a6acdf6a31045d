use serde::{Deserialize, Serialize};

use super::{HarnessError, PipelineInputs, Stage};
use crate::channel::{draw_realization, ChannelRealization};
use crate::convertor::{convert, project, SkippedEntry};
use crate::planner::{plan_accuracy, run_planning, LlmBackend, RetrievalPlan};
use crate::rrm::{reflexion_solve, SolutionReport};
use crate::scenario::{distance, Scenario};
use crate::traffic::{gate, patch_plan, predict, rescale, zigbee_delay, Route, TrafficSeries};

pub const RESULT_FORMAT_VERSION: u32 = 1;

/// One forecast per cell, covering the whole transmission window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellForecast {
    pub cell_id: String,
    pub peak: f64,
    pub forecast: TrafficSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceOutcome {
    pub sensor_id: String,
    pub cell_id: String,
    /// What the threshold gate decided.
    pub gate: Route,
    /// Network actually used; a gated-in device the scheduler cannot serve falls back.
    pub route: Route,
    pub latency_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rbs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub version: u32,
    pub config_digest: String,
    pub seed: u64,
    pub tau: f64,
    pub query: String,
    pub plan: RetrievalPlan,
    pub planning_steps: usize,
    pub plan_accuracy: Option<f64>,
    pub skipped: Vec<SkippedEntry>,
    pub forecasts: Vec<CellForecast>,
    pub devices: Vec<DeviceOutcome>,
    pub rrm_solution: Option<SolutionReport>,
    pub per_device_latency_s: Vec<f64>,
    pub max_latency_s: f64,
    pub n_cellular: usize,
    pub n_zigbee: usize,
}

impl PipelineResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pipeline result serializes")
    }
}

/// Everything up to the threshold gate.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub digest_base: String,
    pub seed: u64,
    pub query: String,
    pub plan: RetrievalPlan,
    pub planning_steps: usize,
    pub plan_accuracy: Option<f64>,
    pub skipped: Vec<SkippedEntry>,
    /// Scenario holding every converted device.
    pub scenario: Scenario,
    pub realization: ChannelRealization,
    pub forecasts: Vec<CellForecast>,
    /// Index into `forecasts` for each device.
    pub device_cell: Vec<usize>,
    pub max_rounds: usize,
}

/// Planning, conversion, forecasting and the channel draw.
///
/// Forecasts, including any remote predictor calls, are all made here, before any gating.
pub fn prepare(inputs: &PipelineInputs, backend: &dyn LlmBackend, seed: u64) -> Result<Prepared, HarnessError> {
    inputs.validate()?;
    let (plan, transcript) = run_planning(&inputs.query, &inputs.cards, &inputs.tools, backend, inputs.step_limit)
        .map_err(HarnessError::at(Stage::Planning))?;
    let accuracy = match &inputs.gold {
        Some(gold) => Some(plan_accuracy(&plan, gold).map_err(HarnessError::at(Stage::Planning))?),
        None => None,
    };

    let origin = inputs.scenario.geo_origin.expect("validated");
    let report = convert(&plan, &inputs.tools.registry, origin);
    if report.device_params.is_empty() {
        return Err(HarnessError::new(
            Stage::Conversion,
            format!("no plan entry could be converted ({} skipped)", report.skipped.len()),
        ));
    }
    let scenario = inputs
        .scenario
        .with_devices(report.devices())
        .map_err(|e| HarnessError::new(Stage::Conversion, e))?;

    let mut cells = inputs.cells.clone();
    cells.sort_by(|a, b| a.cell_id.cmp(&b.cell_id));
    let mut forecasts = Vec::with_capacity(cells.len());
    for cell in &cells {
        let forecast = forecast_cell(inputs, &cell.cell_id)
            .map_err(|e| HarnessError::new(Stage::Forecast, format!("cell {}: {e}", cell.cell_id)))?;
        forecasts.push(forecast);
    }

    let centres: Vec<_> = cells.iter().map(|c| project(origin, c.location())).collect();
    let device_cell = scenario
        .devices
        .iter()
        .map(|d| {
            (0..centres.len())
                .min_by(|&a, &b| distance(d.position, centres[a]).total_cmp(&distance(d.position, centres[b])))
                .expect("cells are non-empty")
        })
        .collect();

    let realization = draw_realization(&scenario, seed);
    Ok(Prepared {
        digest_base: inputs.digest(seed),
        seed,
        query: inputs.query.clone(),
        plan,
        planning_steps: transcript.steps.len(),
        plan_accuracy: accuracy,
        skipped: report.skipped,
        scenario,
        realization,
        forecasts,
        device_cell,
        max_rounds: inputs.max_rounds,
    })
}

fn forecast_cell(inputs: &PipelineInputs, cell_id: &str) -> Result<CellForecast, Box<dyn std::error::Error + Send + Sync>> {
    let raw = &inputs.traffic[cell_id];
    let load = raw.to_fraction(inputs.capacity)?;
    let bucketed = rescale(&load, inputs.horizon_minutes)?;
    let steps = patch_plan(bucketed.bucket_minutes(), inputs.horizon_minutes)?.horizon_steps;
    let predictor = inputs.predictor.build(bucketed.bucket_minutes())?;
    let forecast = predict(predictor.as_ref(), &bucketed, steps)?;
    log::debug!("cell {cell_id}: {steps} buckets of {} min", forecast.bucket_minutes());
    Ok(CellForecast {
        cell_id: cell_id.to_string(),
        peak: forecast.peak(),
        forecast,
    })
}

impl Prepared {
    /// Gates every device at `tau`, schedules the cellular group and reports latencies.
    pub fn evaluate(&self, tau: f64) -> Result<PipelineResult, HarnessError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(HarnessError::new(Stage::Gate, format!("tau must lie in [0, 1], got {tau}")));
        }
        let devices = &self.scenario.devices;
        let mut gates = Vec::with_capacity(devices.len());
        for &c in &self.device_cell {
            gates.push(gate(&self.forecasts[c].forecast, tau).map_err(|e| HarnessError::new(Stage::Gate, e))?);
        }

        let cellular: Vec<usize> = (0..devices.len()).filter(|&i| gates[i] == Route::Cellular6G).collect();
        let mut rrm = None;
        let mut rrm_delay = vec![None; devices.len()];
        let mut rrm_rbs = vec![Vec::new(); devices.len()];
        if !cellular.is_empty() {
            let sub = Scenario {
                devices: cellular.iter().map(|&i| devices[i].clone()).collect(),
                tau,
                ..self.scenario.clone()
            };
            let realization = self.realization.select_devices(&cellular);
            let solution = reflexion_solve(&sub, &realization, self.max_rounds)
                .map_err(|e| HarnessError::new(Stage::Rrm, e))?;
            for (k, &i) in cellular.iter().enumerate() {
                let d = solution.per_device_delay_s[k];
                if d.is_finite() {
                    rrm_delay[i] = Some(d);
                    rrm_rbs[i] = solution.rbs_of(k);
                }
            }
            rrm = Some(solution.to_report());
        }

        let mut outcomes = Vec::with_capacity(devices.len());
        for (i, d) in devices.iter().enumerate() {
            let (route, latency_s) = match rrm_delay[i] {
                Some(delay) => (Route::Cellular6G, delay),
                None => (Route::ZigbeeFallback, zigbee_delay(d, &self.scenario.zigbee)),
            };
            outcomes.push(DeviceOutcome {
                sensor_id: d.id.clone(),
                cell_id: self.forecasts[self.device_cell[i]].cell_id.clone(),
                gate: gates[i],
                route,
                latency_s,
                rbs: std::mem::take(&mut rrm_rbs[i]),
            });
        }
        let per_device_latency_s: Vec<f64> = outcomes.iter().map(|o| o.latency_s).collect();
        let n_cellular = outcomes.iter().filter(|o| o.route == Route::Cellular6G).count();
        Ok(PipelineResult {
            version: RESULT_FORMAT_VERSION,
            config_digest: self.digest_base.clone(),
            seed: self.seed,
            tau,
            query: self.query.clone(),
            plan: self.plan.clone(),
            planning_steps: self.planning_steps,
            plan_accuracy: self.plan_accuracy,
            skipped: self.skipped.clone(),
            forecasts: self.forecasts.clone(),
            max_latency_s: per_device_latency_s.iter().copied().fold(0.0, f64::max),
            per_device_latency_s,
            n_zigbee: outcomes.len() - n_cellular,
            n_cellular,
            devices: outcomes,
            rrm_solution: rrm,
        })
    }
}

/// Full run at the scenario's own threshold.
pub fn run_pipeline(inputs: &PipelineInputs, backend: &dyn LlmBackend, seed: u64) -> Result<PipelineResult, HarnessError> {
    prepare(inputs, backend, seed)?.evaluate(inputs.scenario.tau)
}

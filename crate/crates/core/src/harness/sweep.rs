use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{HarnessError, PipelineInputs, Stage};
use crate::planner::LlmBackend;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub tau: f64,
    pub max_latency_s: f64,
    pub n_cellular: usize,
    pub n_zigbee: usize,
}

/// One evaluation per threshold over a single plan, forecast set and channel draw.
///
/// Rows come back sorted by threshold; equal thresholds keep their input order.
pub fn sweep_tau(
    inputs: &PipelineInputs,
    backend: &dyn LlmBackend,
    tau_values: &[f64],
    seed: u64,
) -> Result<Vec<SweepRow>, HarnessError> {
    if tau_values.is_empty() {
        return Err(HarnessError::new(Stage::Config, "no tau values given"));
    }
    if let Some(bad) = tau_values.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(HarnessError::new(Stage::Config, format!("tau {bad} outside [0, 1]")));
    }
    let prepared = super::prepare(inputs, backend, seed)?;
    let mut rows = tau_values
        .par_iter()
        .map(|&tau| {
            prepared.evaluate(tau).map(|r| SweepRow {
                tau,
                max_latency_s: r.max_latency_s,
                n_cellular: r.n_cellular,
                n_zigbee: r.n_zigbee,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    Ok(rows)
}

/// `tau,max_latency_s,n_cellular,n_zigbee`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

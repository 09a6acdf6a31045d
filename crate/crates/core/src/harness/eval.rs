use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, Stage};
use crate::planner::{
    plan_accuracy, run_planning, BackendError, CardSet, Gazetteer, LlmBackend, PlannerError, RetrievalPlan,
    ScriptEntry, SensorRegistry, ToolBox, DEFAULT_STEP_LIMIT,
};

fn default_step_limit() -> usize {
    DEFAULT_STEP_LIMIT
}

/// One query with its gold plan. `script` drives the mock backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalQuery {
    pub id: String,
    pub query: String,
    pub gold: RetrievalPlan,
    #[serde(default)]
    pub script: Vec<ScriptEntry>,
    /// F1 the fixture author worked out for this script.
    #[serde(default)]
    pub expected_f1: Option<f64>,
    #[serde(default)]
    pub expected_steps: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalFile {
    version: u32,
    cards: PathBuf,
    registry: PathBuf,
    gazetteer: PathBuf,
    #[serde(default = "default_step_limit")]
    step_limit: usize,
    queries: Vec<EvalQuery>,
}

#[derive(Debug, Clone)]
pub struct EvalFixture {
    pub cards: CardSet,
    pub tools: ToolBox,
    pub step_limit: usize,
    pub queries: Vec<EvalQuery>,
}

impl EvalFixture {
    /// Reads the fixture; card, registry and gazetteer paths are relative to it.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let err = |e: String| HarnessError::new(Stage::Config, format!("{}: {e}", path.display()));
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let file: EvalFile = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if file.version != 1 {
            return Err(err(format!("unsupported fixture version {}", file.version)));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let cards = CardSet::load(&base.join(&file.cards)).map_err(|e| err(e.to_string()))?;
        let registry = SensorRegistry::load(&base.join(&file.registry)).map_err(|e| err(e.to_string()))?;
        let gazetteer = Gazetteer::load(&base.join(&file.gazetteer)).map_err(|e| err(e.to_string()))?;
        for q in &file.queries {
            q.gold.validate().map_err(|e| err(format!("query {}: {e}", q.id)))?;
            if q.gold.entries.is_empty() {
                return Err(err(format!("query {}: gold plan has no entries", q.id)));
            }
        }
        Ok(EvalFixture {
            cards,
            tools: ToolBox::new(registry, gazetteer),
            step_limit: file.step_limit,
            queries: file.queries,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStatus {
    Ok,
    PlanParseError,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub query_id: String,
    pub f1: f64,
    pub steps_used: usize,
    pub status: EvalStatus,
}

/// Plans every query and scores it against its gold. Failed runs score 0 and say why.
pub fn eval_accuracy(
    fixture: &EvalFixture,
    backend_for: &dyn Fn(&EvalQuery) -> Result<Box<dyn LlmBackend>, BackendError>,
) -> Vec<EvalRow> {
    fixture
        .queries
        .iter()
        .map(|q| {
            let failed = |status, steps_used| EvalRow {
                query_id: q.id.clone(),
                f1: 0.0,
                steps_used,
                status,
            };
            let backend = match backend_for(q) {
                Ok(b) => b,
                Err(e) => {
                    log::warn!("query {}: {e}", q.id);
                    return failed(EvalStatus::BackendError, 0);
                }
            };
            match run_planning(&q.query, &fixture.cards, &fixture.tools, backend.as_ref(), fixture.step_limit) {
                Ok((plan, transcript)) => EvalRow {
                    query_id: q.id.clone(),
                    f1: plan_accuracy(&plan, &q.gold).expect("gold validated non-empty at load"),
                    steps_used: transcript.steps.len(),
                    status: EvalStatus::Ok,
                },
                Err(PlannerError::PlanParse { reason, transcript }) => {
                    log::warn!("query {}: {reason}", q.id);
                    failed(EvalStatus::PlanParseError, transcript.steps.len())
                }
                Err(e) => {
                    log::warn!("query {}: {e}", q.id);
                    failed(EvalStatus::BackendError, 0)
                }
            }
        })
        .collect()
}

/// `query_id,f1,steps_used,status`.
pub fn write_eval_csv<W: Write>(rows: &[EvalRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

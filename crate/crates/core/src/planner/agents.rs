use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::backend::{ChatMessage, LlmBackend, LlmRequest};
use super::cards::CardSet;
use super::plan::{extract_plan, fenced_blocks, RetrievalPlan};
use super::registry::ToolBox;
use super::PlannerError;

/// Conversation length beyond which extra steps stop paying off.
pub const DEFAULT_STEP_LIMIT: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Manager,
    Planner,
    Reviewer,
    Coder,
    Executor,
}

impl AgentRole {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Manager => "Manager",
            AgentRole::Planner => "Planner",
            AgentRole::Reviewer => "Reviewer",
            AgentRole::Coder => "Coder",
            AgentRole::Executor => "Executor",
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "manager" => Ok(AgentRole::Manager),
            "planner" => Ok(AgentRole::Planner),
            "reviewer" => Ok(AgentRole::Reviewer),
            "coder" => Ok(AgentRole::Coder),
            "executor" => Ok(AgentRole::Executor),
            other => Err(format!("unknown agent role `{other}`")),
        }
    }
}

/// How the speaker of a step was chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManagerDecision {
    /// The Manager's raw reply.
    pub raw: String,
    /// True when the reply named no single agent and the fixed order was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    pub args: Value,
    pub ok: bool,
    pub result: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Revise,
}

impl Verdict {
    /// `ACCEPT` as the first word accepts; anything else asks for a revision.
    pub fn parse(message: &str) -> Verdict {
        let first = message
            .split(|c: char| !c.is_ascii_alphabetic())
            .find(|w| !w.is_empty())
            .unwrap_or("");
        if first.eq_ignore_ascii_case("accept") {
            Verdict::Accept
        } else {
            Verdict::Revise
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub step: usize,
    pub role: AgentRole,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    pub manager: ManagerDecision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTranscript {
    pub query: String,
    pub steps: Vec<AgentStep>,
    pub step_limit: usize,
    /// Reviewer verdicts in the order they were given.
    pub memory: Vec<String>,
}

impl AgentTranscript {
    pub fn new(query: impl Into<String>, step_limit: usize) -> Self {
        AgentTranscript {
            query: query.into(),
            steps: Vec::new(),
            step_limit,
            memory: Vec::new(),
        }
    }

    fn last_of(&self, role: AgentRole) -> Option<&AgentStep> {
        self.steps.iter().rev().find(|s| s.role == role)
    }

    /// Speaker under the fixed order Planner, Reviewer, Coder and Executor, Reviewer.
    fn fallback_next(&self) -> AgentRole {
        let Some(last) = self.steps.last() else {
            return AgentRole::Planner;
        };
        match last.role {
            AgentRole::Manager | AgentRole::Planner => AgentRole::Reviewer,
            AgentRole::Reviewer => {
                let planner_at = self.last_of(AgentRole::Planner).map_or(0, |s| s.step);
                let coded_since = self.last_of(AgentRole::Coder).is_some_and(|s| s.step > planner_at);
                if coded_since {
                    AgentRole::Planner
                } else {
                    AgentRole::Coder
                }
            }
            AgentRole::Coder => AgentRole::Executor,
            AgentRole::Executor => {
                if last.tool_calls.is_empty() || last.tool_calls.iter().any(|c| !c.ok) {
                    AgentRole::Coder
                } else {
                    AgentRole::Reviewer
                }
            }
        }
    }

    /// The conversation as seen by `role`: its own turns as assistant, the rest as user.
    fn messages_for(&self, role: AgentRole) -> Vec<ChatMessage> {
        let mut out = vec![ChatMessage {
            role: "user".into(),
            content: self.query.clone(),
        }];
        out.extend(self.steps.iter().map(|s| ChatMessage {
            role: if s.role == role { "assistant" } else { "user" }.into(),
            content: format!("[{}] {}", s.role, s.message),
        }));
        out
    }
}

/// Appends a reviewer verdict to long-term memory.
pub fn reflect(mut transcript: AgentTranscript, verdict: &str) -> AgentTranscript {
    transcript.memory.push(verdict.trim().to_string());
    transcript
}

/// The single agent named in a Manager reply, if exactly one is.
fn parse_choice(reply: &str) -> Option<AgentRole> {
    let mut named: Vec<AgentRole> = reply
        .split(|c: char| !c.is_ascii_alphabetic())
        .filter_map(|w| w.parse().ok())
        .filter(|r| *r != AgentRole::Manager)
        .collect();
    named.dedup();
    named.sort();
    named.dedup();
    match named.as_slice() {
        [one] => Some(*one),
        _ => None,
    }
}

const PLAN_SCHEMA: &str = r#"Emit the plan as a ```json block:
{"version": 1, "entries": [{"sensor_id": "...", "sensor_type": "...", "location": {"lat": 0.0, "lon": 0.0},
  "time_range": ["RFC 3339 start", "RFC 3339 end"], "est_payload_bits": null}]}"#;

fn system_prompt(role: AgentRole, cards: &CardSet, memory: &[String], schema_note: Option<&str>) -> String {
    let mut p = String::new();
    match role {
        AgentRole::Manager => {
            p.push_str("You are the Manager of a sensor-data planning team. Read the conversation and reply with the name of the agent that should speak next: Planner, Reviewer, Coder or Executor.\n");
        }
        AgentRole::Planner => {
            p.push_str("You are the Planner. Identify the places, times and sensor types the query needs, decide which data functions to call, and write the retrieval plan.\n\nSensor cards:\n");
            p.push_str(&cards.render_sensors());
            p.push_str("\nData functions:\n");
            p.push_str(&cards.render_apis());
            p.push('\n');
            p.push_str(PLAN_SCHEMA);
            p.push('\n');
            if !memory.is_empty() {
                p.push_str("\nReviewer notes so far, oldest first:\n");
                for (k, note) in memory.iter().enumerate() {
                    p.push_str(&format!("{}. {note}\n", k + 1));
                }
            }
        }
        AgentRole::Reviewer => {
            p.push_str("You are the Reviewer. Check the latest plan for missing or wrong sensors, places and time ranges. Start your reply with ACCEPT or REVISE, then give your reasons.\n\nSensor cards:\n");
            p.push_str(&cards.render_sensors());
            if let Some(note) = schema_note {
                p.push_str(&format!("\nSchema check of the latest plan: {note}\n"));
            }
        }
        AgentRole::Coder => {
            p.push_str("You are the Coder. Call data functions by writing one ```call block per call, holding {\"name\": ..., \"args\": {...}}. When the results are in, you may emit the final plan.\n\nData functions:\n");
            p.push_str(&cards.render_apis());
            p.push('\n');
            p.push_str(PLAN_SCHEMA);
            p.push('\n');
        }
        AgentRole::Executor => {}
    }
    p
}

/// Runs the ```call blocks of the latest Coder turn against the registered tools.
fn execute(transcript: &AgentTranscript, cards: &CardSet, tools: &ToolBox) -> (String, Vec<ToolCall>) {
    let Some(code) = transcript.last_of(AgentRole::Coder) else {
        return ("no code to run".into(), Vec::new());
    };
    let mut calls = Vec::new();
    for (_, body) in fenced_blocks(&code.message).into_iter().filter(|(info, _)| info == "call") {
        let parsed: Result<(String, Value), String> = serde_json::from_str::<Value>(&body)
            .map_err(|e| format!("malformed call: {e}"))
            .and_then(|v| {
                let name = v.get("name").and_then(Value::as_str).ok_or("call has no `name`")?.to_string();
                Ok((name, v.get("args").cloned().unwrap_or(Value::Object(Default::default()))))
            });
        let call = match parsed {
            Err(e) => ToolCall {
                name: String::new(),
                args: Value::Null,
                ok: false,
                result: Value::String(e),
            },
            Ok((name, args)) => {
                let result = if cards.api_cards.iter().any(|c| c.name == name) {
                    tools.call(&name, &args)
                } else {
                    Err(format!("`{name}` is not a registered data function"))
                };
                ToolCall {
                    ok: result.is_ok(),
                    result: result.unwrap_or_else(Value::String),
                    name,
                    args,
                }
            }
        };
        calls.push(call);
    }
    if calls.is_empty() {
        return ("no ```call blocks in the latest Coder turn".into(), calls);
    }
    let report: Vec<_> = calls
        .iter()
        .map(|c| serde_json::json!({"name": c.name, "ok": c.ok, "result": c.result}))
        .collect();
    (serde_json::to_string(&report).expect("results serialize"), calls)
}

/// Drives the agent conversation until the Reviewer accepts a valid plan or `step_limit`
/// steps have been taken.
///
/// Each step asks the Manager for the next speaker, then lets that agent speak; Executor
/// steps run tools and make no model call. On exhaustion the latest plan emitted by the
/// Planner or Coder is returned if it validates.
pub fn run_planning(
    query: &str,
    cards: &CardSet,
    tools: &ToolBox,
    backend: &dyn LlmBackend,
    step_limit: usize,
) -> Result<(RetrievalPlan, AgentTranscript), PlannerError> {
    if step_limit < 1 {
        return Err(PlannerError::InvalidArgument("step_limit must be >= 1".into()));
    }
    cards.validate()?;

    let mut transcript = AgentTranscript::new(query, step_limit);
    let mut latest: Option<Result<RetrievalPlan, String>> = None;

    for step in 1..=step_limit {
        let manager_reply = backend.complete(&LlmRequest {
            role: AgentRole::Manager,
            step,
            system_prompt: system_prompt(AgentRole::Manager, cards, &[], None),
            messages: transcript.messages_for(AgentRole::Manager),
        })?;
        let choice = parse_choice(&manager_reply);
        let role = choice.unwrap_or_else(|| transcript.fallback_next());
        let manager = ManagerDecision {
            raw: manager_reply,
            fallback: choice.is_none(),
        };

        let (message, tool_calls) = if role == AgentRole::Executor {
            execute(&transcript, cards, tools)
        } else {
            let schema_note = match &latest {
                Some(Ok(_)) => Some("valid".to_string()),
                Some(Err(e)) => Some(format!("invalid ({e})")),
                None => None,
            };
            let reply = backend.complete(&LlmRequest {
                role,
                step,
                system_prompt: system_prompt(role, cards, &transcript.memory, schema_note.as_deref()),
                messages: transcript.messages_for(role),
            })?;
            (reply, Vec::new())
        };

        if matches!(role, AgentRole::Planner | AgentRole::Coder) {
            if let Some(found) = extract_plan(&message) {
                latest = Some(found.map(|mut plan| {
                    if plan.query.is_empty() {
                        plan.query = query.to_string();
                    }
                    plan
                }));
            }
        }
        let verdict = (role == AgentRole::Reviewer).then(|| Verdict::parse(&message));
        log::debug!("planning step {step}: {role}{}", if manager.fallback { " (fallback)" } else { "" });
        if verdict.is_some() && !message.trim().is_empty() {
            transcript = reflect(transcript, &message);
        }
        transcript.steps.push(AgentStep {
            step,
            role,
            message,
            tool_calls,
            manager,
            verdict,
        });

        if verdict == Some(Verdict::Accept) {
            if let Some(Ok(plan)) = &latest {
                return Ok((plan.clone(), transcript));
            }
        }
    }

    match latest {
        Some(Ok(plan)) => Ok((plan, transcript)),
        Some(Err(reason)) => Err(PlannerError::PlanParse {
            reason,
            transcript: Box::new(transcript),
        }),
        None => Err(PlannerError::PlanParse {
            reason: "no plan was emitted".into(),
            transcript: Box::new(transcript),
        }),
    }
}

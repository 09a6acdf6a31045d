use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_fixture, PlannerError};
use crate::scenario::{SensorField, SensorType};

/// Standardized description of one sensor category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorCard {
    pub sensor_type: SensorType,
    pub description: String,
    pub unit: String,
}

impl SensorCard {
    pub fn field(&self) -> SensorField {
        self.sensor_type.field()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    /// Semantic type, e.g. `place name` or `sensor type`.
    #[serde(rename = "type")]
    pub kind: String,
}

/// A callable data function offered to the agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataApiCard {
    pub name: String,
    pub signature: Vec<ParamSpec>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CardSet {
    pub sensor_cards: Vec<SensorCard>,
    pub api_cards: Vec<DataApiCard>,
}

impl CardSet {
    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.sensor_cards.is_empty() && self.api_cards.is_empty() {
            return Err(PlannerError::InvalidCards("card set is empty".into()));
        }
        let mut types = HashSet::new();
        for c in &self.sensor_cards {
            if c.unit.trim().is_empty() {
                return Err(PlannerError::InvalidCards(format!("{} card has no unit", c.sensor_type)));
            }
            if !types.insert(c.sensor_type) {
                return Err(PlannerError::InvalidCards(format!("duplicate {} card", c.sensor_type)));
            }
        }
        let mut names = HashSet::new();
        for a in &self.api_cards {
            if !names.insert(a.name.as_str()) {
                return Err(PlannerError::InvalidCards(format!("duplicate api card `{}`", a.name)));
            }
            if let Some(k) = a.signature.iter().position(|p| p.name.trim().is_empty()) {
                return Err(PlannerError::InvalidCards(format!("`{}` parameter {k} is unnamed", a.name)));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<CardSet, PlannerError> {
        let cards: CardSet = serde_json::from_str(text).map_err(|e| PlannerError::InvalidCards(e.to_string()))?;
        cards.validate()?;
        Ok(cards)
    }

    pub fn load(path: &Path) -> Result<CardSet, PlannerError> {
        Self::from_json(&read_fixture(path)?)
    }

    /// Sensor cards grouped by field, as shown to the agents.
    pub fn render_sensors(&self) -> String {
        let mut out = String::new();
        for field in [SensorField::Environment, SensorField::Energy, SensorField::Mobility] {
            let cards: Vec<_> = self.sensor_cards.iter().filter(|c| c.field() == field).collect();
            if cards.is_empty() {
                continue;
            }
            out.push_str(&format!("[{}]\n", serde_json::to_value(field).unwrap().as_str().unwrap()));
            for c in cards {
                out.push_str(&format!("- {} ({}): {}\n", c.sensor_type, c.unit, c.description));
            }
        }
        out
    }

    pub fn render_apis(&self) -> String {
        self.api_cards
            .iter()
            .map(|a| {
                let params: Vec<_> = a.signature.iter().map(|p| format!("{}: {}", p.name, p.kind)).collect();
                format!("- {}({}): {}\n", a.name, params.join(", "), a.description)
            })
            .collect()
    }
}

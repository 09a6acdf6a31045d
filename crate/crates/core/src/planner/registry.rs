use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{read_fixture, PlannerError};
use crate::convertor::haversine_m;
use crate::scenario::{GeoPoint, SensorType};

/// One registered sensor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegistryRecord {
    pub sensor_id: String,
    #[serde(rename = "type")]
    pub sensor_type: SensorType,
    pub lat: f64,
    pub lon: f64,
    pub record_bytes: u64,
    pub records_per_hour: f64,
}

impl RegistryRecord {
    pub fn location(&self) -> GeoPoint {
        GeoPoint {
            lat: self.lat,
            lon: self.lon,
        }
    }
}

#[derive(Deserialize)]
struct RegistryRow {
    sensor_id: String,
    #[serde(rename = "type")]
    sensor_type: String,
    lat: f64,
    lon: f64,
    record_bytes: u64,
    records_per_hour: f64,
}

/// The sensor database the agents search and the convertor sizes payloads from.
#[derive(Debug, Clone, Default)]
pub struct SensorRegistry {
    records: Vec<RegistryRecord>,
    index: HashMap<String, usize>,
}

impl SensorRegistry {
    pub fn new(records: Vec<RegistryRecord>) -> Result<Self, PlannerError> {
        let mut index = HashMap::new();
        for (k, r) in records.iter().enumerate() {
            let bad = |reason: String| PlannerError::Fixture {
                path: "registry".into(),
                reason: format!("sensor {}: {reason}", r.sensor_id),
            };
            if index.insert(r.sensor_id.clone(), k).is_some() {
                return Err(bad("duplicate id".into()));
            }
            if !(-90.0..=90.0).contains(&r.lat) || !(-180.0..=180.0).contains(&r.lon) {
                return Err(bad(format!("coordinates ({}, {}) out of range", r.lat, r.lon)));
            }
            if r.record_bytes == 0 {
                return Err(bad("record_bytes must be > 0".into()));
            }
            if !(r.records_per_hour >= 0.0) || !r.records_per_hour.is_finite() {
                return Err(bad(format!("records_per_hour must be >= 0, got {}", r.records_per_hour)));
            }
        }
        Ok(SensorRegistry { records, index })
    }

    /// Rows of `sensor_id,type,lat,lon,record_bytes,records_per_hour`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, PlannerError> {
        let bad = |line: usize, reason: String| PlannerError::Fixture {
            path: "registry".into(),
            reason: format!("line {line}: {reason}"),
        };
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut records = Vec::new();
        for (k, row) in csv.deserialize::<RegistryRow>().enumerate() {
            let row = row.map_err(|e| bad(k + 2, e.to_string()))?;
            let sensor_type = row.sensor_type.parse().map_err(|e| bad(k + 2, format!("{e}")))?;
            records.push(RegistryRecord {
                sensor_id: row.sensor_id,
                sensor_type,
                lat: row.lat,
                lon: row.lon,
                record_bytes: row.record_bytes,
                records_per_hour: row.records_per_hour,
            });
        }
        Self::new(records)
    }

    pub fn load(path: &Path) -> Result<Self, PlannerError> {
        Self::read_csv(read_fixture(path)?.as_bytes())
    }

    pub fn records(&self) -> &[RegistryRecord] {
        &self.records
    }

    pub fn get(&self, sensor_id: &str) -> Option<&RegistryRecord> {
        self.index.get(sensor_id).map(|&k| &self.records[k])
    }

    /// South-west and north-east corners.
    pub fn bounding_box(&self) -> Option<(GeoPoint, GeoPoint)> {
        let first = self.records.first()?;
        let mut sw = first.location();
        let mut ne = first.location();
        for r in &self.records {
            sw.lat = sw.lat.min(r.lat);
            sw.lon = sw.lon.min(r.lon);
            ne.lat = ne.lat.max(r.lat);
            ne.lon = ne.lon.max(r.lon);
        }
        Some((sw, ne))
    }

    /// Sensors of one type, optionally within `radius_m` of `near`, in registry order.
    pub fn search(&self, sensor_type: SensorType, near: Option<(GeoPoint, f64)>) -> Vec<&RegistryRecord> {
        self.records
            .iter()
            .filter(|r| r.sensor_type == sensor_type)
            .filter(|r| near.is_none_or(|(c, radius)| haversine_m(c, r.location()) <= radius))
            .collect()
    }
}

/// Place names to coordinates, matched case-insensitively.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    places: BTreeMap<String, GeoPoint>,
}

impl Gazetteer {
    pub fn new(places: impl IntoIterator<Item = (String, GeoPoint)>) -> Self {
        Gazetteer {
            places: places.into_iter().map(|(k, v)| (k.trim().to_lowercase(), v)).collect(),
        }
    }

    /// A JSON object mapping names to `{"lat", "lon"}`.
    pub fn from_json(text: &str) -> Result<Self, PlannerError> {
        let places: BTreeMap<String, GeoPoint> = serde_json::from_str(text).map_err(|e| PlannerError::Fixture {
            path: "gazetteer".into(),
            reason: e.to_string(),
        })?;
        Ok(Self::new(places))
    }

    pub fn load(path: &Path) -> Result<Self, PlannerError> {
        Self::from_json(&read_fixture(path)?)
    }

    pub fn places(&self) -> &BTreeMap<String, GeoPoint> {
        &self.places
    }

    pub fn lookup(&self, place: &str) -> Option<GeoPoint> {
        self.places.get(&place.trim().to_lowercase()).copied()
    }
}

/// Implementations behind the Data API cards, over read-only fixtures.
#[derive(Debug, Clone, Default)]
pub struct ToolBox {
    pub registry: SensorRegistry,
    pub gazetteer: Gazetteer,
}

impl ToolBox {
    pub const TOOLS: [&'static str; 3] = ["geocode", "search_sensors", "get_sensor"];

    pub fn new(registry: SensorRegistry, gazetteer: Gazetteer) -> Self {
        ToolBox { registry, gazetteer }
    }

    pub fn call(&self, name: &str, args: &Value) -> Result<Value, String> {
        match name {
            "geocode" => {
                let place = str_arg(args, "place")?;
                let p = self.gazetteer.lookup(place).ok_or_else(|| format!("unknown place `{place}`"))?;
                Ok(json!({"place": place, "lat": p.lat, "lon": p.lon}))
            }
            "search_sensors" => {
                let sensor_type: SensorType = str_arg(args, "sensor_type")?.parse().map_err(|e| format!("{e}"))?;
                let centre = match (args.get("place"), args.get("lat"), args.get("lon")) {
                    (Some(_), _, _) => {
                        let place = str_arg(args, "place")?;
                        Some(self.gazetteer.lookup(place).ok_or_else(|| format!("unknown place `{place}`"))?)
                    }
                    (None, Some(lat), Some(lon)) => Some(GeoPoint {
                        lat: lat.as_f64().ok_or("`lat` must be a number")?,
                        lon: lon.as_f64().ok_or("`lon` must be a number")?,
                    }),
                    _ => None,
                };
                let radius = match args.get("radius_m") {
                    Some(v) => v.as_f64().ok_or("`radius_m` must be a number")?,
                    None => 2000.0,
                };
                let hits = self.registry.search(sensor_type, centre.map(|c| (c, radius)));
                Ok(serde_json::to_value(hits).expect("records serialize"))
            }
            "get_sensor" => {
                let id = str_arg(args, "sensor_id")?;
                let r = self.registry.get(id).ok_or_else(|| format!("unregistered sensor `{id}`"))?;
                Ok(serde_json::to_value(r).expect("records serialize"))
            }
            other => Err(format!("no tool named `{other}`")),
        }
    }
}

fn str_arg<'a>(args: &'a Value, key: &str) -> Result<&'a str, String> {
    args.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| format!("missing string argument `{key}`"))
}

//! The immutable world description and its JSON config file.
//!
//! Powers are written in dBm and the SINR threshold in dB inside the file; in memory
//! everything is linear (watts, plain ratio).

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    db_to_linear, dbm_to_watts, linear_to_db, watts_to_dbm, ChannelError, ChannelParams, FadingModel,
    InterferenceModel, DEFAULT_RB_BANDWIDTH_HZ,
};

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading scenario file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario field `{field}`: {reason}")]
    Validation { field: String, reason: String },
}

impl ScenarioError {
    fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ScenarioError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Field named by a validation error, if any.
    pub fn field(&self) -> Option<&str> {
        match self {
            ScenarioError::Validation { field, .. } => Some(field),
            _ => None,
        }
    }
}

impl From<ChannelError> for ScenarioError {
    fn from(e: ChannelError) -> Self {
        match e {
            ChannelError::InvalidParam { field, reason } => {
                ScenarioError::validation(format!("channel.{field}"), reason)
            }
            other => ScenarioError::validation("channel", other.to_string()),
        }
    }
}

/// Planar coordinates in meters on the local tangent plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// WGS-84 latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

/// Euclidean distance on the local plane.
pub fn distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// The three sensor fields of the card set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorField {
    Environment,
    Energy,
    Mobility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorType {
    Temperature,
    Humidity,
    Rainfall,
    WindSpeed,
    AirQuality,
    PowerConsumption,
    GridFrequency,
    SolarIrradiance,
    LeakageCurrent,
    TrafficFlow,
    EvCharger,
    Parking,
}

impl SensorType {
    pub const ALL: [SensorType; 12] = [
        SensorType::Temperature,
        SensorType::Humidity,
        SensorType::Rainfall,
        SensorType::WindSpeed,
        SensorType::AirQuality,
        SensorType::PowerConsumption,
        SensorType::GridFrequency,
        SensorType::SolarIrradiance,
        SensorType::LeakageCurrent,
        SensorType::TrafficFlow,
        SensorType::EvCharger,
        SensorType::Parking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SensorType::Temperature => "temperature",
            SensorType::Humidity => "humidity",
            SensorType::Rainfall => "rainfall",
            SensorType::WindSpeed => "wind_speed",
            SensorType::AirQuality => "air_quality",
            SensorType::PowerConsumption => "power_consumption",
            SensorType::GridFrequency => "grid_frequency",
            SensorType::SolarIrradiance => "solar_irradiance",
            SensorType::LeakageCurrent => "leakage_current",
            SensorType::TrafficFlow => "traffic_flow",
            SensorType::EvCharger => "ev_charger",
            SensorType::Parking => "parking",
        }
    }

    pub fn field(self) -> SensorField {
        use SensorType::*;
        match self {
            Temperature | Humidity | Rainfall | WindSpeed | AirQuality => SensorField::Environment,
            PowerConsumption | GridFrequency | SolarIrradiance | LeakageCurrent => SensorField::Energy,
            TrafficFlow | EvCharger | Parking => SensorField::Mobility,
        }
    }
}

impl fmt::Display for SensorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown sensor type `{0}`")]
pub struct UnknownSensorType(pub String);

impl FromStr for SensorType {
    type Err = UnknownSensorType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let needle = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        SensorType::ALL
            .into_iter()
            .find(|t| t.as_str() == needle)
            .ok_or_else(|| UnknownSensorType(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoTDevice {
    pub id: String,
    pub position: Point,
    /// Payload `D_i` waiting in edge storage, in bits.
    pub data_bits: f64,
    pub sensor_type: SensorType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZigbeeParams {
    pub rate_bps: f64,
    pub per_hop_latency_s: f64,
    pub hops: u32,
}

impl Default for ZigbeeParams {
    /// Nominal 2.4 GHz PHY: 250 kbps, one hop, 5 ms per hop.
    fn default() -> Self {
        ZigbeeParams {
            rate_bps: 250e3,
            per_hop_latency_s: 5e-3,
            hops: 1,
        }
    }
}

impl ZigbeeParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.rate_bps > 0.0) || !self.rate_bps.is_finite() {
            return Err(ScenarioError::validation("zigbee.rate_bps", format!("must be > 0, got {}", self.rate_bps)));
        }
        if !(self.per_hop_latency_s >= 0.0) || !self.per_hop_latency_s.is_finite() {
            return Err(ScenarioError::validation(
                "zigbee.per_hop_latency_s",
                format!("must be >= 0, got {}", self.per_hop_latency_s),
            ));
        }
        if self.hops < 1 {
            return Err(ScenarioError::validation("zigbee.hops", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bs_position: Point,
    /// Geographic anchor of the plane, used when projecting sensor coordinates.
    pub geo_origin: Option<GeoPoint>,
    pub devices: Vec<IoTDevice>,
    /// Conventional cellular UEs. Counted for context, never scheduled.
    pub cc_ue_count: u32,
    pub num_rbs: usize,
    pub channel: ChannelParams,
    pub p_max_w: f64,
    /// Linear SINR threshold.
    pub beta: f64,
    /// Traffic-load threshold as a fraction of cell capacity.
    pub tau: f64,
    pub zigbee: ZigbeeParams,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.num_rbs < 1 {
            return Err(ScenarioError::validation("rbs.count", "must be >= 1"));
        }
        if !(self.p_max_w > 0.0) || !self.p_max_w.is_finite() {
            return Err(ScenarioError::validation("limits.p_max", format!("must be > 0 W, got {}", self.p_max_w)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(ScenarioError::validation("limits.beta", format!("must be > 0, got {}", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(ScenarioError::validation("tau", format!("must lie in [0, 1], got {}", self.tau)));
        }
        self.channel.validate()?;
        self.zigbee.validate()?;

        let mut seen = HashSet::new();
        for (i, d) in self.devices.iter().enumerate() {
            if !seen.insert(d.id.as_str()) {
                return Err(ScenarioError::validation(
                    format!("devices[{i}].id"),
                    format!("duplicate device id `{}`", d.id),
                ));
            }
            if !(d.data_bits > 0.0) || !d.data_bits.is_finite() {
                return Err(ScenarioError::validation(
                    format!("devices[{i}].data_bits"),
                    format!("device `{}` must carry > 0 bits, got {}", d.id, d.data_bits),
                ));
            }
            if !d.position.x.is_finite() || !d.position.y.is_finite() {
                return Err(ScenarioError::validation(format!("devices[{i}].position"), "non-finite coordinate"));
            }
            if distance(d.position, self.bs_position) == 0.0 {
                return Err(ScenarioError::validation(
                    format!("devices[{i}].position"),
                    format!("device `{}` sits on the base station", d.id),
                ));
            }
        }
        Ok(())
    }

    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    /// Distance of every device to the base station, in device order.
    pub fn distances(&self) -> Vec<f64> {
        self.devices.iter().map(|d| distance(d.position, self.bs_position)).collect()
    }

    /// Same world with a different device population, re-validated.
    pub fn with_devices(&self, devices: Vec<IoTDevice>) -> Result<Scenario, ScenarioError> {
        let s = Scenario {
            devices,
            ..self.clone()
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        file.into_scenario()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from_scenario(self)).expect("scenario serializes")
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json(&text)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    std::fs::write(path, scenario.to_json() + "\n").map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

// On-disk layout.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default = "format_version")]
    version: u32,
    bs: BsSection,
    devices: Vec<IoTDevice>,
    rbs: RbSection,
    channel: ChannelSection,
    limits: LimitsSection,
    #[serde(default)]
    zigbee: ZigbeeParams,
}

fn format_version() -> u32 {
    SCENARIO_FORMAT_VERSION
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BsSection {
    position: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<GeoPoint>,
    #[serde(default)]
    cc_ue_count: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RbSection {
    count: usize,
    #[serde(default = "default_bandwidth")]
    bandwidth_hz: f64,
}

fn default_bandwidth() -> f64 {
    DEFAULT_RB_BANDWIDTH_HZ
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    kappa: f64,
    alpha: f64,
    #[serde(default)]
    shadowing_sigma_db: f64,
    noise_power_dbm: f64,
    #[serde(default)]
    fading: FadingModel,
    #[serde(default = "no_interference")]
    interference: InterferenceSection,
}

fn no_interference() -> InterferenceSection {
    InterferenceSection::None
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
enum InterferenceSection {
    None,
    Constant { power_dbm: f64 },
    LogUniform { min_dbm: f64, max_dbm: f64 },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitsSection {
    p_max_dbm: f64,
    beta_db: f64,
    tau: f64,
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        if self.version != SCENARIO_FORMAT_VERSION {
            return Err(ScenarioError::validation(
                "version",
                format!("unsupported format version {} (expected {SCENARIO_FORMAT_VERSION})", self.version),
            ));
        }
        let interference = match self.channel.interference {
            InterferenceSection::None => InterferenceModel::Constant { power_w: 0.0 },
            InterferenceSection::Constant { power_dbm } => InterferenceModel::Constant {
                power_w: dbm_to_watts(power_dbm),
            },
            InterferenceSection::LogUniform { min_dbm, max_dbm } => InterferenceModel::LogUniform {
                min_w: dbm_to_watts(min_dbm),
                max_w: dbm_to_watts(max_dbm),
            },
        };
        let scenario = Scenario {
            bs_position: self.bs.position,
            geo_origin: self.bs.origin,
            devices: self.devices,
            cc_ue_count: self.bs.cc_ue_count,
            num_rbs: self.rbs.count,
            channel: ChannelParams {
                kappa: self.channel.kappa,
                alpha: self.channel.alpha,
                shadowing_sigma_db: self.channel.shadowing_sigma_db,
                noise_power_w: dbm_to_watts(self.channel.noise_power_dbm),
                rb_bandwidth_hz: self.rbs.bandwidth_hz,
                fading: self.channel.fading,
                interference,
            },
            p_max_w: dbm_to_watts(self.limits.p_max_dbm),
            beta: db_to_linear(self.limits.beta_db),
            tau: self.limits.tau,
            zigbee: self.zigbee,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn from_scenario(s: &Scenario) -> Self {
        let interference = match s.channel.interference {
            InterferenceModel::Constant { power_w } if power_w == 0.0 => InterferenceSection::None,
            InterferenceModel::Constant { power_w } => InterferenceSection::Constant {
                power_dbm: watts_to_dbm(power_w),
            },
            InterferenceModel::LogUniform { min_w, max_w } => InterferenceSection::LogUniform {
                min_dbm: watts_to_dbm(min_w),
                max_dbm: watts_to_dbm(max_w),
            },
        };
        ScenarioFile {
            version: SCENARIO_FORMAT_VERSION,
            bs: BsSection {
                position: s.bs_position,
                origin: s.geo_origin,
                cc_ue_count: s.cc_ue_count,
            },
            devices: s.devices.clone(),
            rbs: RbSection {
                count: s.num_rbs,
                bandwidth_hz: s.channel.rb_bandwidth_hz,
            },
            channel: ChannelSection {
                kappa: s.channel.kappa,
                alpha: s.channel.alpha,
                shadowing_sigma_db: s.channel.shadowing_sigma_db,
                noise_power_dbm: watts_to_dbm(s.channel.noise_power_w),
                fading: s.channel.fading,
                interference,
            },
            limits: LimitsSection {
                p_max_dbm: watts_to_dbm(s.p_max_w),
                beta_db: linear_to_db(s.beta),
                tau: s.tau,
            },
            zigbee: s.zigbee.clone(),
        }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// One device on the x axis at `distance_m`, `num_rbs` RBs, deterministic-friendly defaults.
    pub fn single_device_scenario(distance_m: f64, num_rbs: usize) -> Scenario {
        Scenario {
            bs_position: Point::ORIGIN,
            geo_origin: None,
            devices: vec![IoTDevice {
                id: "dev-0".into(),
                position: Point::new(distance_m, 0.0),
                data_bits: 1e6,
                sensor_type: SensorType::Temperature,
            }],
            cc_ue_count: 0,
            num_rbs,
            channel: ChannelParams {
                kappa: 1.0,
                alpha: 3.0,
                shadowing_sigma_db: 0.0,
                noise_power_w: 1e-12,
                rb_bandwidth_hz: DEFAULT_RB_BANDWIDTH_HZ,
                fading: FadingModel::Rayleigh,
                interference: InterferenceModel::default(),
            },
            p_max_w: 0.2,
            beta: 1.0,
            tau: 0.5,
            zigbee: ZigbeeParams::default(),
        }
    }
}

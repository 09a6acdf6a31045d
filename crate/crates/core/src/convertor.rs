//! Plan entries to RRM inputs: planar positions and payload sizes.

use serde::{Deserialize, Serialize};

use crate::planner::{RetrievalPlan, SensorRegistry};
use crate::scenario::{GeoPoint, IoTDevice, Point, SensorType};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Equirectangular projection about `origin`: x east, y north, in meters.
pub fn project(origin: GeoPoint, p: GeoPoint) -> Point {
    let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    Point::new(
        k * (p.lon - origin.lon) * origin.lat.to_radians().cos(),
        k * (p.lat - origin.lat),
    )
}

/// Inverse of [`project`].
pub fn unproject(origin: GeoPoint, p: Point) -> GeoPoint {
    let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    GeoPoint {
        lat: origin.lat + p.y / k,
        lon: origin.lon + p.x / (k * origin.lat.to_radians().cos()),
    }
}

/// Great-circle distance in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (la, lb) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lb - la;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + la.cos() * lb.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub sensor_id: String,
    pub sensor_type: SensorType,
    pub position_m: Point,
    pub data_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedEntry {
    pub sensor_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionReport {
    pub device_params: Vec<DeviceParams>,
    pub skipped: Vec<SkippedEntry>,
    pub projection_origin: GeoPoint,
}

impl ConversionReport {
    pub fn devices(&self) -> Vec<IoTDevice> {
        self.device_params
            .iter()
            .map(|d| IoTDevice {
                id: d.sensor_id.clone(),
                position: d.position_m,
                data_bits: d.data_bits,
                sensor_type: d.sensor_type,
            })
            .collect()
    }
}

/// Maps every plan entry either to device parameters or to a skip reason, in plan order.
///
/// Positions come from the registry's surveyed coordinates. The payload is the plan's
/// `est_payload_bits` when given, otherwise `records_per_hour * hours * record_bytes * 8`.
pub fn convert(plan: &RetrievalPlan, registry: &SensorRegistry, origin: GeoPoint) -> ConversionReport {
    if let Some((sw, ne)) = registry.bounding_box() {
        if !(sw.lat..=ne.lat).contains(&origin.lat) || !(sw.lon..=ne.lon).contains(&origin.lon) {
            log::warn!("projection origin ({}, {}) lies outside the registry's bounding box", origin.lat, origin.lon);
        }
    }
    let mut device_params = Vec::new();
    let mut skipped = Vec::new();
    for entry in &plan.entries {
        let skip = |reason: String| SkippedEntry {
            sensor_id: entry.sensor_id.clone(),
            reason,
        };
        let Some(record) = registry.get(&entry.sensor_id) else {
            skipped.push(skip("unregistered".into()));
            continue;
        };
        if record.sensor_type != entry.sensor_type {
            skipped.push(skip(format!(
                "type mismatch: plan says {}, registry says {}",
                entry.sensor_type, record.sensor_type
            )));
            continue;
        }
        let data_bits = match entry.est_payload_bits {
            Some(bits) => bits as f64,
            None => record.records_per_hour * entry.hours() * record.record_bytes as f64 * 8.0,
        };
        if !(data_bits > 0.0) {
            skipped.push(skip("zero payload".into()));
            continue;
        }
        device_params.push(DeviceParams {
            sensor_id: entry.sensor_id.clone(),
            sensor_type: record.sensor_type,
            position_m: project(origin, record.location()),
            data_bits,
        });
    }
    ConversionReport {
        device_params,
        skipped,
        projection_origin: origin,
    }
}

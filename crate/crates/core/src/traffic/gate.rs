use serde::{Deserialize, Serialize};

use super::{LoadUnits, TrafficError, TrafficSeries};
use crate::scenario::{IoTDevice, ZigbeeParams};

/// Network a device uses for one transmission window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    #[serde(rename = "cellular_6g")]
    Cellular6G,
    ZigbeeFallback,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::Cellular6G => "cellular_6g",
            Route::ZigbeeFallback => "zigbee_fallback",
        }
    }
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Cellular when the forecast peak over the window stays strictly below `tau`.
pub fn gate(forecast: &TrafficSeries, tau: f64) -> Result<Route, TrafficError> {
    if forecast.units() != LoadUnits::Fraction {
        return Err(TrafficError::UnitsMismatch);
    }
    Ok(if forecast.peak() < tau {
        Route::Cellular6G
    } else {
        Route::ZigbeeFallback
    })
}

/// Serialization time at the Zigbee PHY rate plus per-hop forwarding latency.
pub fn zigbee_delay(device: &IoTDevice, zp: &ZigbeeParams) -> f64 {
    device.data_bits / zp.rate_bps + zp.hops as f64 * zp.per_hop_latency_s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Point, SensorType};
    use crate::traffic::epoch;

    fn forecast(values: &[f64]) -> TrafficSeries {
        TrafficSeries::new(values.to_vec(), 5, epoch(), LoadUnits::Fraction).unwrap()
    }

    fn device(bits: f64) -> IoTDevice {
        IoTDevice {
            id: "z".into(),
            position: Point::new(1.0, 0.0),
            data_bits: bits,
            sensor_type: SensorType::Temperature,
        }
    }

    #[test]
    fn threshold_is_strict() {
        assert_eq!(gate(&forecast(&[0.1, 0.3, 0.2]), 0.5).unwrap(), Route::Cellular6G);
        assert_eq!(gate(&forecast(&[0.1, 0.5]), 0.5).unwrap(), Route::ZigbeeFallback);
        assert_eq!(gate(&forecast(&[0.99]), 1.0).unwrap(), Route::Cellular6G);
        assert_eq!(gate(&forecast(&[0.0]), 0.0).unwrap(), Route::ZigbeeFallback);
    }

    #[test]
    fn raw_units_are_refused() {
        let raw = TrafficSeries::new(vec![12.0], 5, epoch(), LoadUnits::Raw).unwrap();
        assert!(matches!(gate(&raw, 0.5), Err(TrafficError::UnitsMismatch)));
    }

    #[test]
    fn zigbee_arithmetic() {
        let zp = ZigbeeParams {
            rate_bps: 250e3,
            per_hop_latency_s: 0.0,
            hops: 1,
        };
        assert_eq!(zigbee_delay(&device(250_000.0), &zp), 1.0);
        let zp = ZigbeeParams {
            rate_bps: 250e3,
            per_hop_latency_s: 0.01,
            hops: 2,
        };
        assert!((zigbee_delay(&device(500_000.0), &zp) - 2.02).abs() < 1e-12);
        let zp = ZigbeeParams { hops: 0, ..zp };
        assert!(zp.validate().is_err());
    }

    #[test]
    fn route_serializes_snake_case() {
        assert_eq!(serde_json::to_string(&Route::Cellular6G).unwrap(), "\"cellular_6g\"");
        assert_eq!(serde_json::to_string(&Route::ZigbeeFallback).unwrap(), "\"zigbee_fallback\"");
    }
}

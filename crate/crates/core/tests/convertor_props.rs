mod common;

use common::{plan_for, planning_kit};
use links_core::convertor::{convert, haversine_m, project, unproject};
use links_core::scenario::{distance, GeoPoint, SensorType};
use proptest::prelude::*;

const DUOMO: GeoPoint = GeoPoint { lat: 45.4642, lon: 9.19 };

/// Point `r` meters from `origin` on bearing `theta`, by the spherical destination formula.
fn destination(origin: GeoPoint, r: f64, theta: f64) -> GeoPoint {
    let delta = r / links_core::convertor::EARTH_RADIUS_M;
    let (lat1, lon1) = (origin.lat.to_radians(), origin.lon.to_radians());
    let lat2 = (lat1.sin() * delta.cos() + lat1.cos() * delta.sin() * theta.cos()).asin();
    let lon2 = lon1 + (theta.sin() * delta.sin() * lat1.cos()).atan2(delta.cos() - lat1.sin() * lat2.sin());
    GeoPoint {
        lat: lat2.to_degrees(),
        lon: lon2.to_degrees(),
    }
}

#[test]
fn origin_projects_to_zero() {
    let p = project(DUOMO, DUOMO);
    assert_eq!((p.x, p.y), (0.0, 0.0));
}

#[test]
fn registry_arithmetic_for_two_hours() {
    let (_, tools) = planning_kit();
    let plan = plan_for(&tools, &["TMP-001"]);
    let r = tools.registry.get("TMP-001").unwrap();
    let report = convert(&plan, &tools.registry, DUOMO);
    let expected = r.records_per_hour * 2.0 * r.record_bytes as f64 * 8.0;
    assert_eq!(report.device_params[0].data_bits, expected);
}

#[test]
fn payload_override_and_skips() {
    let (_, tools) = planning_kit();
    let mut plan = plan_for(&tools, &["TMP-001", "HUM-001", "RAIN-001"]);
    plan.entries[0].est_payload_bits = Some(96_000);
    plan.entries[1].sensor_id = "HUM-999".into();
    plan.entries[2].sensor_type = SensorType::Temperature;
    let report = convert(&plan, &tools.registry, DUOMO);
    assert_eq!(report.device_params.len(), 1);
    assert_eq!(report.device_params[0].data_bits, 96_000.0);
    assert_eq!(report.skipped[0].sensor_id, "HUM-999");
    assert_eq!(report.skipped[0].reason, "unregistered");
    assert!(report.skipped[1].reason.starts_with("type mismatch"));
    assert_eq!(report.projection_origin, DUOMO);
}

#[test]
fn positions_come_from_the_registry() {
    let (_, tools) = planning_kit();
    let mut plan = plan_for(&tools, &["TMP-002"]);
    plan.entries[0].location = GeoPoint { lat: 0.0, lon: 0.0 };
    let report = convert(&plan, &tools.registry, DUOMO);
    let expected = project(DUOMO, tools.registry.get("TMP-002").unwrap().location());
    assert_eq!(report.device_params[0].position_m, expected);
}

proptest! {
    #[test]
    fn projection_error_within_half_a_percent(
        r1 in 50.0f64..20_000.0, t1 in 0.0f64..std::f64::consts::TAU,
        r2 in 50.0f64..20_000.0, t2 in 0.0f64..std::f64::consts::TAU,
        lat in -60.0f64..60.0, lon in -179.0f64..179.0,
    ) {
        let origin = GeoPoint { lat, lon };
        let a = destination(origin, r1, t1);
        let b = destination(origin, r2, t2);
        let o = project(origin, origin);
        let (pa, pb) = (project(origin, a), project(origin, b));
        let true_oa = haversine_m(origin, a);
        prop_assert!((distance(o, pa) - true_oa).abs() <= 0.005 * true_oa);
        let true_ab = haversine_m(a, b);
        if true_ab > 1.0 {
            prop_assert!((distance(pa, pb) - true_ab).abs() <= 0.005 * true_ab);
        }
    }

    #[test]
    fn unproject_inverts_project(dx in -20_000.0f64..20_000.0, dy in -20_000.0f64..20_000.0) {
        let p = links_core::scenario::Point::new(dx, dy);
        let back = project(DUOMO, unproject(DUOMO, p));
        prop_assert!((back.x - dx).abs() < 1e-6 && (back.y - dy).abs() < 1e-6);
    }

    #[test]
    fn every_entry_accounted_for_in_order(mask in 0u64..(1 << 20), bogus in 0usize..4, payload in prop::option::of(1u64..10_000_000)) {
        let (_, tools) = planning_kit();
        let ids: Vec<String> = tools.registry.records()[..20].iter().map(|r| r.sensor_id.clone()).collect();
        let picked: Vec<&str> = (0..20).filter(|k| mask >> k & 1 == 1).map(|k| ids[k].as_str()).collect();
        let mut plan = plan_for(&tools, &picked);
        for k in 0..bogus {
            let mut e = plan_for(&tools, &["TMP-001"]).entries.remove(0);
            e.sensor_id = format!("GHOST-{k}");
            plan.entries.insert(k.min(plan.entries.len()), e);
        }
        if let Some(first) = plan.entries.first_mut() {
            first.est_payload_bits = payload;
        }
        let a = convert(&plan, &tools.registry, DUOMO);
        let b = convert(&plan, &tools.registry, DUOMO);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.device_params.len() + a.skipped.len(), plan.entries.len());
        prop_assert_eq!(a.skipped.len(), bogus);
        prop_assert!(a.device_params.iter().all(|d| d.data_bits > 0.0));
        let converted: Vec<&str> = a.device_params.iter().map(|d| d.sensor_id.as_str()).collect();
        let expected: Vec<&str> = plan
            .entries
            .iter()
            .map(|e| e.sensor_id.as_str())
            .filter(|id| !id.starts_with("GHOST"))
            .collect();
        prop_assert_eq!(converted, expected);
    }
}

mod common;

use common::{fixture, plan_for, plan_message, say};
use links_core::harness::{
    eval_accuracy, prepare, run_pipeline, sweep_tau, write_eval_csv, write_sweep_csv, EvalFixture, EvalStatus,
    PipelineInputs, PipelineResult, Stage,
};
use links_core::planner::{AgentRole, LlmBackend, MockBackend};
use links_core::traffic::{zigbee_delay, Route};

fn inputs() -> PipelineInputs {
    PipelineInputs::load(&fixture("pipeline.json"), None).unwrap()
}

fn mock(inputs: &PipelineInputs) -> MockBackend {
    MockBackend::load(inputs.mock_script.as_ref().unwrap()).unwrap()
}

fn run_at(tau: f64, seed: u64) -> PipelineResult {
    let inputs = inputs();
    prepare(&inputs, &mock(&inputs), seed).unwrap().evaluate(tau).unwrap()
}

/// Max latency rebuilt from the RRM report and the Zigbee parameters alone.
fn recompute(inputs: &PipelineInputs, r: &PipelineResult) -> f64 {
    let mut worst = 0.0f64;
    for d in &r.devices {
        let latency = match d.route {
            Route::Cellular6G => {
                let rrm = r.rrm_solution.as_ref().expect("cellular devices imply a schedule");
                rrm.devices.iter().find(|x| x.device == d.sensor_id).unwrap().delay_s.unwrap()
            }
            Route::ZigbeeFallback => {
                let bits = r.plan.entries.iter().find(|e| e.sensor_id == d.sensor_id).map(|e| {
                    let rec = inputs.tools.registry.get(&e.sensor_id).unwrap();
                    e.est_payload_bits
                        .map(|b| b as f64)
                        .unwrap_or(rec.records_per_hour * e.hours() * rec.record_bytes as f64 * 8.0)
                });
                let z = &inputs.scenario.zigbee;
                bits.unwrap() / z.rate_bps + z.hops as f64 * z.per_hop_latency_s
            }
        };
        assert!((latency - d.latency_s).abs() <= 1e-9 * latency, "{}", d.sensor_id);
        worst = worst.max(latency);
    }
    worst
}

#[test]
fn tau_zero_sends_everyone_to_zigbee() {
    let inputs = inputs();
    let prepared = prepare(&inputs, &mock(&inputs), 7).unwrap();
    let r = prepared.evaluate(0.0).unwrap();
    assert!(r.rrm_solution.is_none());
    assert_eq!(r.n_cellular, 0);
    assert_eq!(r.n_zigbee, r.devices.len());
    for (d, dev) in r.devices.iter().zip(&prepared.scenario.devices) {
        assert_eq!(d.route, Route::ZigbeeFallback);
        assert_eq!(d.latency_s, zigbee_delay(dev, &prepared.scenario.zigbee));
    }
}

#[test]
fn tau_one_schedules_everyone() {
    let r = run_at(1.0, 7);
    assert!(r.forecasts.iter().all(|f| f.peak < 1.0));
    let rrm = r.rrm_solution.as_ref().unwrap();
    assert!(rrm.feasible);
    assert_eq!(r.n_cellular, r.devices.len());
    for (d, report) in r.devices.iter().zip(&rrm.devices) {
        assert_eq!(d.sensor_id, report.device);
        assert_eq!(Some(d.latency_s), report.delay_s);
        assert!(!d.rbs.is_empty());
    }
    assert_eq!(Some(r.max_latency_s), rrm.max_delay_s);
}

#[test]
fn mixed_gate_recomputes() {
    let inputs = inputs();
    let prepared = prepare(&inputs, &mock(&inputs), 7).unwrap();
    let mut saw_mixed = false;
    for tau in [0.2, 0.4, 0.5, 0.6] {
        let r = prepared.evaluate(tau).unwrap();
        saw_mixed |= r.n_cellular > 0 && r.n_zigbee > 0;
        let worst = recompute(&inputs, &r);
        assert!((r.max_latency_s - worst).abs() <= 1e-9 * worst);
        assert_eq!(r.max_latency_s, r.per_device_latency_s.iter().copied().fold(0.0, f64::max));
        for d in &r.devices {
            let peak = r.forecasts.iter().find(|f| f.cell_id == d.cell_id).unwrap().peak;
            assert_eq!(d.gate == Route::Cellular6G, peak < tau);
        }
    }
    assert!(saw_mixed);
}

#[test]
fn every_converted_device_appears_once() {
    let r = run_at(0.5, 3);
    let ids: Vec<&str> = r.devices.iter().map(|d| d.sensor_id.as_str()).collect();
    let planned: Vec<&str> = r.plan.entries.iter().map(|e| e.sensor_id.as_str()).collect();
    assert_eq!(ids, planned);
    assert_eq!(r.per_device_latency_s.len(), ids.len());
    assert_eq!(r.plan_accuracy, Some(1.0));
}

#[test]
fn sweep_rows_are_sorted_and_duplicates_agree() {
    let inputs = inputs();
    let rows = sweep_tau(&inputs, &mock(&inputs), &[0.8, 0.2, 0.5, 0.2, 1.0, 0.0], 7).unwrap();
    let taus: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    assert_eq!(taus, vec![0.0, 0.2, 0.2, 0.5, 0.8, 1.0]);
    assert_eq!(rows[1], rows[2]);
    for w in rows.windows(2) {
        assert!(w[1].max_latency_s <= w[0].max_latency_s);
    }
}

#[test]
fn single_tau_sweep_matches_pipeline() {
    let mut inputs = inputs();
    inputs.scenario.tau = 0.6;
    let rows = sweep_tau(&inputs, &mock(&inputs), &[0.6], 11).unwrap();
    let r = run_pipeline(&inputs, &mock(&inputs), 11).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].max_latency_s, r.max_latency_s);
    assert_eq!((rows[0].n_cellular, rows[0].n_zigbee), (r.n_cellular, r.n_zigbee));
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let inputs = inputs();
    let a = run_pipeline(&inputs, &mock(&inputs), 5).unwrap().to_json();
    let b = run_pipeline(&inputs, &mock(&inputs), 5).unwrap().to_json();
    assert_eq!(a, b);

    let taus = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let mut x = Vec::new();
    let mut y = Vec::new();
    write_sweep_csv(&sweep_tau(&inputs, &mock(&inputs), &taus, 5).unwrap(), &mut x).unwrap();
    write_sweep_csv(&sweep_tau(&inputs, &mock(&inputs), &taus, 5).unwrap(), &mut y).unwrap();
    assert_eq!(x, y);
    assert!(String::from_utf8(x).unwrap().starts_with("tau,max_latency_s,n_cellular,n_zigbee\n"));
}

#[test]
fn digest_tracks_inputs_and_seed() {
    let inputs = inputs();
    assert_eq!(inputs.digest(1), inputs.digest(1));
    assert_ne!(inputs.digest(1), inputs.digest(2));
    let mut other = inputs.clone();
    other.query.push('?');
    assert_ne!(inputs.digest(1), other.digest(1));
    assert_eq!(inputs.digest(1).len(), 64);
}

#[test]
fn errors_name_their_stage() {
    let inputs = inputs();
    let err = run_pipeline(&inputs, &MockBackend::default(), 1).unwrap_err();
    assert_eq!(err.stage, Stage::Planning);
    assert!(err.to_string().starts_with("planning stage:"), "{err}");

    let mut ghost = plan_for(&inputs.tools, &["TMP-001"]);
    ghost.entries[0].sensor_id = "GHOST".into();
    let script = vec![
        say(AgentRole::Planner, 1, plan_message(&ghost)),
        say(AgentRole::Reviewer, 2, "ACCEPT"),
    ];
    let err = run_pipeline(&inputs, &MockBackend::new(script).unwrap(), 1).unwrap_err();
    assert_eq!(err.stage, Stage::Conversion);

    let prepared = prepare(&inputs, &mock(&inputs), 1).unwrap();
    assert_eq!(prepared.evaluate(1.5).unwrap_err().stage, Stage::Gate);
    assert!(sweep_tau(&inputs, &mock(&inputs), &[], 1).is_err());
    assert!(sweep_tau(&inputs, &mock(&inputs), &[-0.1], 1).is_err());

    let mut no_origin = inputs.clone();
    no_origin.scenario.geo_origin = None;
    assert_eq!(run_pipeline(&no_origin, &mock(&inputs), 1).unwrap_err().stage, Stage::Config);

    let mut short = inputs.clone();
    short.horizon_minutes = 100_000;
    assert_eq!(run_pipeline(&short, &mock(&inputs), 1).unwrap_err().stage, Stage::Forecast);

    let err = PipelineInputs::load(&fixture("missing.json"), None).unwrap_err();
    assert_eq!(err.stage, Stage::Config);
}

#[test]
fn eval_fixture_reproduces_authored_scores() {
    let fixture = EvalFixture::load(&fixture("eval/queries.json")).unwrap();
    assert_eq!(fixture.queries.len(), 10);
    let rows = eval_accuracy(&fixture, &|q| {
        Ok(Box::new(MockBackend::new(q.script.clone())?) as Box<dyn LlmBackend>)
    });
    for (q, row) in fixture.queries.iter().zip(&rows) {
        assert_eq!(row.query_id, q.id);
        assert!((row.f1 - q.expected_f1.unwrap()).abs() <= 1e-12, "{}: {}", q.id, row.f1);
        assert_eq!(Some(row.steps_used), q.expected_steps, "{}", q.id);
    }
    let parse_failures: Vec<_> = rows.iter().filter(|r| r.status == EvalStatus::PlanParseError).collect();
    assert_eq!(parse_failures.len(), 1);
    assert_eq!(parse_failures[0].f1, 0.0);

    let mut out = Vec::new();
    write_eval_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("query_id,f1,steps_used,status\n"));
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn eval_backend_failure_is_a_row() {
    let fixture = EvalFixture::load(&fixture("eval/queries.json")).unwrap();
    let rows = eval_accuracy(&fixture, &|_| {
        Err(links_core::planner::BackendError::Config("no endpoint".into()))
    });
    assert!(rows.iter().all(|r| r.status == EvalStatus::BackendError && r.f1 == 0.0));
}

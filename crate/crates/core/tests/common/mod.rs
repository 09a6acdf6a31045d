#![allow(dead_code)]

use links_core::channel::{ChannelParams, FadingModel, InterferenceModel};
use links_core::planner::{
    AgentRole, CardSet, Gazetteer, PlanEntry, RetrievalPlan, ScriptEntry, SensorRegistry, ToolBox,
};
use links_core::rrm::RrmProblem;
use links_core::scenario::{IoTDevice, Point, Scenario, SensorType, ZigbeeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cell with `n` devices scattered 30..400 m from the BS and `m` RBs, 8 dB shadowing,
/// log-uniform interference and a 3 dB threshold, so a share of pairs fall below it.
pub fn random_scenario(n: usize, m: usize, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let devices = (0..n)
        .map(|i| {
            let r: f64 = rng.random_range(30.0..400.0);
            let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            IoTDevice {
                id: format!("s{i}"),
                position: Point::new(r * theta.cos(), r * theta.sin()),
                data_bits: rng.random_range(1e5..4e6),
                sensor_type: SensorType::ALL[i % SensorType::ALL.len()],
            }
        })
        .collect();
    Scenario {
        bs_position: Point::ORIGIN,
        geo_origin: None,
        devices,
        cc_ue_count: 10,
        num_rbs: m,
        channel: ChannelParams {
            kappa: 10f64.powf(-3.5),
            alpha: 3.5,
            shadowing_sigma_db: 8.0,
            noise_power_w: 10f64.powf(-14.1),
            rb_bandwidth_hz: 360e3,
            fading: FadingModel::Rayleigh,
            interference: InterferenceModel::LogUniform { min_w: 1e-15, max_w: 1e-13 },
        },
        p_max_w: 0.2,
        beta: 2.0,
        tau: 0.5,
        zigbee: ZigbeeParams::default(),
    }
}

/// `n x m` problem with rates in 0.1..5 Mbit/s, SINR tied to the rate, and roughly one pair
/// in five below the threshold.
pub fn random_problem(n: usize, m: usize, seed: u64) -> RrmProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bandwidth = 360e3;
    let mut rates = vec![vec![0.0; m]; n];
    let mut sinr = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let s: f64 = if rng.random_bool(0.2) {
                rng.random_range(0.01..0.9)
            } else {
                rng.random_range(1.0..1e4)
            };
            sinr[i][j] = s;
            rates[i][j] = bandwidth * (1.0 + s).log2();
        }
    }
    let data = (0..n).map(|_| rng.random_range(1e5..5e6)).collect();
    RrmProblem::from_matrices(rates, sinr, data, 1.0, vec![0.1; n], 0.1).unwrap()
}

/// Optimal max delay by plain enumeration of every owner vector in `{none, 0..n}^m`,
/// `None` when no vector serves every device.
///
/// Kept apart from the library solvers: eligibility and delays are recomputed here from
/// the raw matrices.
pub fn brute_force(p: &RrmProblem) -> Option<f64> {
    let n = p.data_bits.len();
    let m = p.rates_bps.first().map_or(0, Vec::len);
    let ok = |i: usize, j: usize| {
        p.rates_bps[i][j] > 0.0 && !p.forbidden.contains(&(i, j)) && (!p.sinr_screen || p.sinr[i][j] >= p.beta)
    };
    let mut owner = vec![0; m];
    let mut best: Option<f64> = None;
    loop {
        if owner.iter().enumerate().all(|(j, &o)| o == n || ok(o, j)) {
            let mut worst = 0.0f64;
            let mut served = true;
            for i in 0..n {
                let mut total = 0.0;
                for j in 0..m {
                    if owner[j] == i {
                        total += p.rates_bps[i][j];
                    }
                }
                if total <= 0.0 {
                    served = false;
                    break;
                }
                worst = worst.max(p.data_bits[i] / total);
            }
            if served && best.map_or(true, |b| worst < b) {
                best = Some(worst);
            }
        }
        // odometer over base n + 1
        let mut k = 0;
        while k < m {
            owner[k] += 1;
            if owner[k] <= n {
                break;
            }
            owner[k] = 0;
            k += 1;
        }
        if k == m {
            return best;
        }
    }
}

/// One-shot HTTP server on localhost answering every request on the first connection with
/// `status` and `body`. The join handle yields the raw request (head and body).
pub fn serve_once(status: u16, body: String) -> (String, std::thread::JoinHandle<String>) {
    use std::io::{BufRead, BufReader, Read, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut head = String::new();
        let mut length = 0usize;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
            head.push_str(&line);
            if line == "\r\n" || line.is_empty() {
                break;
            }
        }
        let mut payload = vec![0u8; length];
        reader.read_exact(&mut payload).unwrap();
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        stream.flush().unwrap();
        head + &String::from_utf8(payload).unwrap()
    });
    (url, handle)
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Cards and tools over the shipped fixture registry and gazetteer.
pub fn planning_kit() -> (CardSet, ToolBox) {
    let cards = CardSet::load(&fixture("cards.json")).unwrap();
    let registry = SensorRegistry::load(&fixture("registry.csv")).unwrap();
    let gazetteer = Gazetteer::load(&fixture("gazetteer.json")).unwrap();
    (cards, ToolBox::new(registry, gazetteer))
}

/// Plan over the given registry sensors for 2013-11-03 00:00 to 02:00 UTC.
pub fn plan_for(tools: &ToolBox, ids: &[&str]) -> RetrievalPlan {
    let entries = ids
        .iter()
        .map(|id| {
            let r = tools.registry.get(id).unwrap_or_else(|| panic!("{id} not in registry"));
            PlanEntry {
                sensor_id: r.sensor_id.clone(),
                sensor_type: r.sensor_type,
                location: r.location(),
                time_range: [
                    "2013-11-03T00:00:00Z".parse().unwrap(),
                    "2013-11-03T02:00:00Z".parse().unwrap(),
                ],
                est_payload_bits: None,
            }
        })
        .collect();
    RetrievalPlan {
        version: 1,
        query: String::new(),
        entries,
    }
}

/// A reply carrying `plan` in a json block.
pub fn plan_message(plan: &RetrievalPlan) -> String {
    format!("Here is the plan.\n```json\n{}\n```\n", plan.to_json())
}

pub fn say(role: AgentRole, step: usize, message: impl Into<String>) -> ScriptEntry {
    ScriptEntry {
        role,
        step,
        message: message.into(),
    }
}

//! Min-max delay resource-block assignment for the uplink OMA cell.
//!
//! The problem is
//!
//! ```text
//! minimise  max_i  D_i / sum_j b_ij R_ij
//! s.t.      0 <= p_i <= p_max
//!           gamma_ij >= beta   for every assigned (i, j)
//!           b_ij in {0, 1},  sum_i b_ij <= 1
//! ```
//!
//! Interference is exogenous, so every rate is monotone in the device's own power and the
//! optimal power vector is `p_max` everywhere. What is left to optimise is the binary
//! assignment, handled by [`solve_exact`] (branch and bound over all assignments) and
//! [`solve_heuristic`] (bisection on the target delay with a matching-aware greedy check and
//! a swap local search). [`reflexion_solve`] wraps either one in the repair loop that
//! forbids pairs found to violate the SINR threshold and re-solves.

mod constraints;
mod exact;
mod heuristic;
mod matching;
mod reflexion;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{self, ChannelRealization};
use crate::scenario::Scenario;

pub use constraints::{check_constraints, ConstraintViolation, ViolationKind};
pub use exact::{solve_exact, MAX_EXACT_DEVICES, MAX_EXACT_RBS};
pub use heuristic::{solve_heuristic, DEFAULT_TOLERANCE_S};
pub use reflexion::{reflexion_solve, reflexion_solve_with, RoundRecord, SolverChoice};

#[derive(Debug, Error, PartialEq)]
pub enum RrmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("power of device {device} is {power_w} W, outside [0, {p_max_w}] W")]
    PowerOutOfRange { device: usize, power_w: f64, p_max_w: f64 },
    #[error("instance too large for exhaustive search: {devices} devices x {rbs} RBs (limit {max_devices} x {max_rbs})")]
    InstanceTooLarge {
        devices: usize,
        rbs: usize,
        max_devices: usize,
        max_rbs: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Numerical inputs of one assignment problem at a fixed power vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RrmProblem {
    pub device_ids: Vec<String>,
    /// `rates_bps[i][j]`: achievable rate of device `i` on RB `j`.
    pub rates_bps: Vec<Vec<f64>>,
    pub sinr: Vec<Vec<f64>>,
    pub data_bits: Vec<f64>,
    pub beta: f64,
    pub power_w: Vec<f64>,
    pub p_max_w: f64,
    /// When set, solvers only use pairs with `sinr >= beta`.
    pub sinr_screen: bool,
    /// (device, RB) pairs no solver may use.
    pub forbidden: BTreeSet<(usize, usize)>,
}

impl RrmProblem {
    /// Builds a problem directly from matrices, with SINR screening on.
    pub fn from_matrices(
        rates_bps: Vec<Vec<f64>>,
        sinr: Vec<Vec<f64>>,
        data_bits: Vec<f64>,
        beta: f64,
        power_w: Vec<f64>,
        p_max_w: f64,
    ) -> Result<Self, RrmError> {
        let n = data_bits.len();
        let problem = RrmProblem {
            device_ids: (0..n).map(|i| format!("dev-{i}")).collect(),
            rates_bps,
            sinr,
            data_bits,
            beta,
            power_w,
            p_max_w,
            sinr_screen: true,
            forbidden: BTreeSet::new(),
        };
        problem.check_shape()?;
        Ok(problem)
    }

    pub fn num_devices(&self) -> usize {
        self.data_bits.len()
    }

    pub fn num_rbs(&self) -> usize {
        self.rates_bps.first().map_or(0, Vec::len)
    }

    fn check_shape(&self) -> Result<(), RrmError> {
        let n = self.data_bits.len();
        if self.rates_bps.len() != n || self.sinr.len() != n || self.power_w.len() != n || self.device_ids.len() != n {
            return Err(RrmError::DimensionMismatch(format!(
                "{n} devices but {} rate rows, {} SINR rows, {} powers, {} ids",
                self.rates_bps.len(),
                self.sinr.len(),
                self.power_w.len(),
                self.device_ids.len()
            )));
        }
        let m = self.num_rbs();
        for (i, (r, s)) in self.rates_bps.iter().zip(&self.sinr).enumerate() {
            if r.len() != m || s.len() != m {
                return Err(RrmError::DimensionMismatch(format!(
                    "row {i} has {} rates and {} SINRs, expected {m}",
                    r.len(),
                    s.len()
                )));
            }
            if r.iter().any(|x| !(*x >= 0.0)) {
                return Err(RrmError::InvalidArgument(format!("row {i} holds a negative or NaN rate")));
            }
        }
        Ok(())
    }

    /// Whether a solver may assign RB `rb` to `device`.
    pub fn is_eligible(&self, device: usize, rb: usize) -> bool {
        self.rates_bps[device][rb] > 0.0
            && !self.forbidden.contains(&(device, rb))
            && (!self.sinr_screen || self.sinr[device][rb] >= self.beta)
    }

    pub(crate) fn eligibility(&self) -> Vec<Vec<bool>> {
        (0..self.num_devices())
            .map(|i| (0..self.num_rbs()).map(|j| self.is_eligible(i, j)).collect())
            .collect()
    }

    /// Per-device delays of an assignment; unserved devices get `f64::INFINITY`.
    ///
    /// Rates are summed in increasing RB order starting from zero, so the same assignment
    /// always produces bit-identical delays.
    pub fn delays(&self, assignment: &[Vec<bool>]) -> Vec<f64> {
        assignment
            .iter()
            .zip(&self.rates_bps)
            .zip(&self.data_bits)
            .map(|((row, rates), &d)| {
                let total = row
                    .iter()
                    .zip(rates)
                    .filter(|(b, _)| **b)
                    .fold(0.0, |acc, (_, r)| acc + r);
                if total > 0.0 {
                    d / total
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }

    /// Solution record for `assignment`; `feasible` is decided by the caller.
    pub(crate) fn solution(&self, assignment: Vec<Vec<bool>>, solver: SolverKind) -> RrmSolution {
        let per_device_delay_s = self.delays(&assignment);
        let max_delay_s = max_delay(&per_device_delay_s);
        RrmSolution {
            device_ids: self.device_ids.clone(),
            assignment,
            power_w: self.power_w.clone(),
            per_device_delay_s,
            max_delay_s,
            feasible: true,
            violations: Vec::new(),
            history: Vec::new(),
            solver,
        }
    }

    pub(crate) fn infeasible(&self, violations: Vec<ConstraintViolation>, solver: SolverKind) -> RrmSolution {
        let assignment = vec![vec![false; self.num_rbs()]; self.num_devices()];
        let mut s = self.solution(assignment, solver);
        s.feasible = false;
        s.violations = violations;
        s
    }
}

pub(crate) fn max_delay(delays: &[f64]) -> f64 {
    delays.iter().copied().fold(0.0, f64::max)
}

/// Rates and SINRs of every (device, RB) pair of `scenario` at `power_w`.
pub fn build_problem(
    scenario: &Scenario,
    realization: &ChannelRealization,
    power_w: &[f64],
) -> Result<RrmProblem, RrmError> {
    let n = scenario.num_devices();
    let m = scenario.num_rbs;
    if realization.num_devices() != n || realization.num_rbs() != m {
        return Err(RrmError::DimensionMismatch(format!(
            "scenario is {n}x{m} but realization is {}x{}",
            realization.num_devices(),
            realization.num_rbs()
        )));
    }
    if power_w.len() != n {
        return Err(RrmError::DimensionMismatch(format!("{} powers for {n} devices", power_w.len())));
    }
    for (i, &p) in power_w.iter().enumerate() {
        if !(0.0..=scenario.p_max_w).contains(&p) {
            return Err(RrmError::PowerOutOfRange {
                device: i,
                power_w: p,
                p_max_w: scenario.p_max_w,
            });
        }
    }

    let noise = scenario.channel.noise_power_w;
    let bandwidth = scenario.channel.rb_bandwidth_hz;
    let mut sinr = Vec::with_capacity(n);
    let mut rates = Vec::with_capacity(n);
    for (gains, &p) in realization.gains.iter().zip(power_w) {
        let s_row: Vec<f64> = gains
            .iter()
            .zip(&realization.interference_w)
            .map(|(&g, &interference)| {
                channel::sinr(g, p, interference, noise).expect("noise power validated > 0")
            })
            .collect();
        rates.push(s_row.iter().map(|&s| channel::rate(bandwidth, s)).collect());
        sinr.push(s_row);
    }

    Ok(RrmProblem {
        device_ids: scenario.devices.iter().map(|d| d.id.clone()).collect(),
        rates_bps: rates,
        sinr,
        data_bits: scenario.devices.iter().map(|d| d.data_bits).collect(),
        beta: scenario.beta,
        power_w: power_w.to_vec(),
        p_max_w: scenario.p_max_w,
        sinr_screen: true,
        forbidden: BTreeSet::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrmSolution {
    pub device_ids: Vec<String>,
    /// `assignment[i][j]` is `b_ij`.
    pub assignment: Vec<Vec<bool>>,
    pub power_w: Vec<f64>,
    /// `f64::INFINITY` for a device without any RB.
    pub per_device_delay_s: Vec<f64>,
    pub max_delay_s: f64,
    pub feasible: bool,
    pub violations: Vec<ConstraintViolation>,
    /// Repair rounds, filled in by [`reflexion_solve`].
    pub history: Vec<RoundRecord>,
    pub solver: SolverKind,
}

impl RrmSolution {
    /// RBs held by `device`, ascending.
    pub fn rbs_of(&self, device: usize) -> Vec<usize> {
        self.assignment[device]
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
            .collect()
    }

    pub fn assigned_pairs(&self) -> Vec<(usize, usize)> {
        (0..self.assignment.len())
            .flat_map(|i| self.rbs_of(i).into_iter().map(move |j| (i, j)))
            .collect()
    }

    pub fn rounds(&self) -> usize {
        self.history.len()
    }

    pub fn to_report(&self) -> SolutionReport {
        SolutionReport {
            version: SOLUTION_FORMAT_VERSION,
            solver: self.solver,
            feasible: self.feasible,
            max_delay_s: finite(self.max_delay_s),
            assignment: self
                .assigned_pairs()
                .into_iter()
                .map(|(i, j)| AssignmentEntry {
                    device: self.device_ids[i].clone(),
                    device_index: i,
                    rb: j,
                })
                .collect(),
            devices: self
                .device_ids
                .iter()
                .enumerate()
                .map(|(i, id)| DeviceReport {
                    device: id.clone(),
                    power_w: self.power_w[i],
                    delay_s: finite(self.per_device_delay_s[i]),
                })
                .collect(),
            violations: self.violations.clone(),
            rounds: self.history.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_report()).expect("solution report serializes")
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub const SOLUTION_FORMAT_VERSION: u32 = 1;

/// JSON form of an [`RrmSolution`]. Non-finite delays are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub version: u32,
    pub solver: SolverKind,
    pub feasible: bool,
    pub max_delay_s: Option<f64>,
    pub assignment: Vec<AssignmentEntry>,
    pub devices: Vec<DeviceReport>,
    pub violations: Vec<ConstraintViolation>,
    pub rounds: Vec<RoundRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentEntry {
    pub device: String,
    pub device_index: usize,
    pub rb: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceReport {
    pub device: String,
    pub power_w: f64,
    pub delay_s: Option<f64>,
}

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{matching::Matching, RrmProblem, RrmSolution};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    PowerBound,
    SinrThreshold,
    RbExclusivity,
    UnservedDevice,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::PowerBound => "power-bound",
            ViolationKind::SinrThreshold => "sinr-threshold",
            ViolationKind::RbExclusivity => "rb-exclusivity",
            ViolationKind::UnservedDevice => "unserved-device",
        })
    }
}

/// One broken constraint. Which of device/RB is carried depends on the kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConstraintViolation {
    PowerBound { device: usize, power_w: f64, p_max_w: f64 },
    SinrThreshold { device: usize, rb: usize, sinr: f64, beta: f64 },
    RbExclusivity { rb: usize, devices: Vec<usize> },
    UnservedDevice { device: usize, reason: String },
}

impl ConstraintViolation {
    pub fn kind(&self) -> ViolationKind {
        match self {
            ConstraintViolation::PowerBound { .. } => ViolationKind::PowerBound,
            ConstraintViolation::SinrThreshold { .. } => ViolationKind::SinrThreshold,
            ConstraintViolation::RbExclusivity { .. } => ViolationKind::RbExclusivity,
            ConstraintViolation::UnservedDevice { .. } => ViolationKind::UnservedDevice,
        }
    }

    pub fn device(&self) -> Option<usize> {
        match *self {
            ConstraintViolation::PowerBound { device, .. }
            | ConstraintViolation::SinrThreshold { device, .. }
            | ConstraintViolation::UnservedDevice { device, .. } => Some(device),
            ConstraintViolation::RbExclusivity { .. } => None,
        }
    }

    pub fn rb(&self) -> Option<usize> {
        match *self {
            ConstraintViolation::SinrThreshold { rb, .. } | ConstraintViolation::RbExclusivity { rb, .. } => Some(rb),
            _ => None,
        }
    }

    /// Magnitude of the violation in words.
    pub fn detail(&self) -> String {
        match self {
            ConstraintViolation::PowerBound { power_w, p_max_w, .. } => {
                format!("power {power_w:.6e} W outside [0, {p_max_w:.6e}] W")
            }
            ConstraintViolation::SinrThreshold { sinr, beta, .. } => {
                format!("SINR {sinr:.4e} below threshold {beta:.4e} ({:.2} dB short)", 10.0 * (beta / sinr).log10())
            }
            ConstraintViolation::RbExclusivity { devices, .. } => {
                format!("shared by {} devices {devices:?}", devices.len())
            }
            ConstraintViolation::UnservedDevice { reason, .. } => reason.clone(),
        }
    }
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind())?;
        if let Some(d) = self.device() {
            write!(f, " device={d}")?;
        }
        if let Some(j) = self.rb() {
            write!(f, " rb={j}")?;
        }
        write!(f, ": {}", self.detail())
    }
}

/// Every violation of the power bound, the per-RB SINR threshold, RB exclusivity and
/// device coverage, in that order.
///
/// Limits are read from `scenario`; SINRs of assigned pairs from `problem`, scaled to the
/// solution's power when it differs from the problem's.
pub fn check_constraints(scenario: &Scenario, problem: &RrmProblem, solution: &RrmSolution) -> Vec<ConstraintViolation> {
    let mut out = Vec::new();
    let n = solution.assignment.len();

    for (device, &p) in solution.power_w.iter().enumerate() {
        if !(p >= 0.0 && p <= scenario.p_max_w) {
            out.push(ConstraintViolation::PowerBound {
                device,
                power_w: p,
                p_max_w: scenario.p_max_w,
            });
        }
    }

    for (device, row) in solution.assignment.iter().enumerate() {
        for (rb, &b) in row.iter().enumerate() {
            if !b {
                continue;
            }
            let mut sinr = problem.sinr[device][rb];
            let (p_sol, p_prob) = (solution.power_w[device], problem.power_w[device]);
            if p_prob > 0.0 && p_sol != p_prob {
                sinr *= p_sol / p_prob;
            }
            if !(sinr >= scenario.beta) {
                out.push(ConstraintViolation::SinrThreshold {
                    device,
                    rb,
                    sinr,
                    beta: scenario.beta,
                });
            }
        }
    }

    let m = solution.assignment.first().map_or(0, Vec::len);
    for rb in 0..m {
        let holders: Vec<usize> = (0..n).filter(|&i| solution.assignment[i][rb]).collect();
        if holders.len() > 1 {
            out.push(ConstraintViolation::RbExclusivity { rb, devices: holders });
        }
    }

    for (device, row) in solution.assignment.iter().enumerate() {
        if !row.iter().any(|&b| b) {
            out.push(ConstraintViolation::UnservedDevice {
                device,
                reason: "no resource block assigned".into(),
            });
        }
    }
    out
}

/// Explains why no assignment can serve every device under the problem's eligibility.
/// Empty when a one-RB-per-device matching exists.
pub(crate) fn diagnose_coverage(problem: &RrmProblem, eligible: &[Vec<bool>]) -> Vec<ConstraintViolation> {
    let n = problem.num_devices();
    let m = problem.num_rbs();
    let mut out = Vec::new();
    for (device, row) in eligible.iter().enumerate() {
        if row.iter().any(|&e| e) {
            continue;
        }
        let below = (0..m)
            .filter(|&j| problem.sinr[device][j] < problem.beta)
            .count();
        let forbidden = (0..m).filter(|&j| problem.forbidden.contains(&(device, j))).count();
        out.push(ConstraintViolation::UnservedDevice {
            device,
            reason: format!(
                "no eligible resource block: {below} of {m} below the SINR threshold, {forbidden} forbidden"
            ),
        });
    }
    if !out.is_empty() {
        return out;
    }
    let matching = Matching::maximum(eligible, &vec![true; m]);
    let eligible_rbs = (0..m).filter(|&j| (0..n).any(|i| eligible[i][j])).count();
    for device in 0..n {
        if matching.rb_of(device).is_none() {
            out.push(ConstraintViolation::UnservedDevice {
                device,
                reason: format!(
                    "resource blocks exhausted: {n} devices compete for {eligible_rbs} eligible RBs"
                ),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rrm::{solve_exact, RrmProblem};
    use crate::scenario::test_support::single_device_scenario;

    fn two_by_two() -> (Scenario, RrmProblem) {
        let mut s = single_device_scenario(100.0, 2);
        s.p_max_w = 0.2;
        s.beta = 1.0;
        let p = RrmProblem::from_matrices(
            vec![vec![2e6, 1e6], vec![1e6, 2e6]],
            vec![vec![5.0, 3.0], vec![3.0, 5.0]],
            vec![1e6, 1e6],
            1.0,
            vec![0.2, 0.2],
            0.2,
        )
        .unwrap();
        (s, p)
    }

    #[test]
    fn feasible_exact_output_is_clean() {
        let (s, p) = two_by_two();
        let sol = solve_exact(&p).unwrap();
        assert!(check_constraints(&s, &p, &sol).is_empty());
    }

    #[test]
    fn injected_power_fault() {
        let (s, p) = two_by_two();
        let mut sol = solve_exact(&p).unwrap();
        sol.power_w[0] = 2.0 * s.p_max_w;
        let v = check_constraints(&s, &p, &sol);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].kind(), ViolationKind::PowerBound);
        assert_eq!(v[0].device(), Some(0));
    }

    #[test]
    fn injected_exclusivity_fault() {
        let (s, p) = two_by_two();
        let mut sol = solve_exact(&p).unwrap();
        sol.assignment = vec![vec![false, true], vec![false, true]];
        let v = check_constraints(&s, &p, &sol);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].kind(), ViolationKind::RbExclusivity);
        assert_eq!(v[0].rb(), Some(1));
        assert_eq!(v[0].device(), None);
    }

    #[test]
    fn injected_sinr_and_unserved_faults() {
        let (s, mut p) = two_by_two();
        p.sinr[0][1] = 0.5;
        let mut sol = solve_exact(&p).unwrap();
        sol.assignment = vec![vec![false, true], vec![false, false]];
        let v = check_constraints(&s, &p, &sol);
        let kinds: Vec<_> = v.iter().map(ConstraintViolation::kind).collect();
        assert_eq!(kinds, vec![ViolationKind::SinrThreshold, ViolationKind::UnservedDevice]);
        assert_eq!((v[0].device(), v[0].rb()), (Some(0), Some(1)));
        assert_eq!(v[1].device(), Some(1));
        assert!(v[0].to_string().contains("sinr-threshold device=0 rb=1"));
    }

    #[test]
    fn violation_json_uses_kind_tag() {
        let v = ConstraintViolation::RbExclusivity { rb: 3, devices: vec![0, 2] };
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["kind"], "rb-exclusivity");
        assert_eq!(json["rb"], 3);
    }
}

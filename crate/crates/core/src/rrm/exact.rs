//! Exhaustive branch and bound over RB-to-device assignments.

use super::constraints::diagnose_coverage;
use super::{RrmError, RrmProblem, RrmSolution, SolverKind};

pub const MAX_EXACT_DEVICES: usize = 6;
pub const MAX_EXACT_RBS: usize = 12;

/// Relative slack on the pruning bound so rounding in the bound never discards an optimum.
const PRUNE_SLACK: f64 = 1e-9;

/// Optimal assignment by depth-first search over every RB, trying devices in index order and
/// "unassigned" last.
///
/// Returns the first optimum in that order, so ties go to the lowest device index on the
/// lowest RB. Infeasible instances come back with `feasible == false` and one
/// unserved-device violation per device that cannot be covered.
pub fn solve_exact(problem: &RrmProblem) -> Result<RrmSolution, RrmError> {
    let n = problem.num_devices();
    let m = problem.num_rbs();
    if n > MAX_EXACT_DEVICES || m > MAX_EXACT_RBS {
        return Err(RrmError::InstanceTooLarge {
            devices: n,
            rbs: m,
            max_devices: MAX_EXACT_DEVICES,
            max_rbs: MAX_EXACT_RBS,
        });
    }
    let eligible = problem.eligibility();
    let diagnosis = diagnose_coverage(problem, &eligible);
    if !diagnosis.is_empty() {
        return Ok(problem.infeasible(diagnosis, SolverKind::Exact));
    }

    // suffix[i][j]: eligible rate of device i over RBs j..m.
    let mut suffix = vec![vec![0.0; m + 1]; n];
    for i in 0..n {
        for j in (0..m).rev() {
            suffix[i][j] = suffix[i][j + 1] + if eligible[i][j] { problem.rates_bps[i][j] } else { 0.0 };
        }
    }

    let mut search = Search {
        problem,
        eligible: &eligible,
        suffix: &suffix,
        owner: vec![None; m],
        totals: vec![0.0; n],
        counts: vec![0; n],
        best_value: f64::INFINITY,
        best_owner: None,
    };
    search.descend(0);

    let owner = search
        .best_owner
        .expect("a covering matching exists, so some complete assignment was reached");
    let mut assignment = vec![vec![false; m]; n];
    for (j, o) in owner.iter().enumerate() {
        if let Some(i) = *o {
            assignment[i][j] = true;
        }
    }
    Ok(problem.solution(assignment, SolverKind::Exact))
}

struct Search<'a> {
    problem: &'a RrmProblem,
    eligible: &'a [Vec<bool>],
    suffix: &'a [Vec<f64>],
    owner: Vec<Option<usize>>,
    totals: Vec<f64>,
    counts: Vec<usize>,
    best_value: f64,
    best_owner: Option<Vec<Option<usize>>>,
}

impl Search<'_> {
    fn descend(&mut self, rb: usize) {
        let n = self.totals.len();
        let m = self.owner.len();
        if rb == m {
            if self.counts.contains(&0) {
                return;
            }
            let value = (0..n)
                .map(|i| self.problem.data_bits[i] / self.totals[i])
                .fold(0.0, f64::max);
            if value < self.best_value {
                self.best_value = value;
                self.best_owner = Some(self.owner.clone());
            }
            return;
        }
        if !self.promising(rb) {
            return;
        }
        for i in 0..n {
            if !self.eligible[i][rb] {
                continue;
            }
            let saved = self.totals[i];
            self.totals[i] = saved + self.problem.rates_bps[i][rb];
            self.counts[i] += 1;
            self.owner[rb] = Some(i);
            self.descend(rb + 1);
            self.owner[rb] = None;
            self.counts[i] -= 1;
            self.totals[i] = saved;
        }
        self.descend(rb + 1);
    }

    /// Whether RBs `rb..` can still complete a covering assignment that beats the incumbent.
    fn promising(&self, rb: usize) -> bool {
        let remaining = self.owner.len() - rb;
        let mut unserved = 0;
        let mut bound: f64 = 0.0;
        for i in 0..self.totals.len() {
            if self.counts[i] == 0 {
                unserved += 1;
                if self.suffix[i][rb] == 0.0 {
                    return false;
                }
            }
            bound = bound.max(self.problem.data_bits[i] / (self.totals[i] + self.suffix[i][rb]));
        }
        if unserved > remaining {
            return false;
        }
        !(self.best_value.is_finite() && bound > self.best_value * (1.0 + PRUNE_SLACK))
    }
}

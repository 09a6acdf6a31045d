//! Solve, check every constraint, repair, repeat.
//!
//! Each round solves the assignment model as formulated (rates and coverage only, without
//! the SINR screen) and then audits the result with [`check_constraints`]. Every (device, RB)
//! pair caught below the SINR threshold is forbidden for all later rounds. The loop stops
//! when a round is clean, when a round yields nothing that forbidding pairs could fix, or
//! after `max_rounds`.

use serde::{Deserialize, Serialize};

use super::{
    build_problem, check_constraints, solve_exact, solve_heuristic, ConstraintViolation, RrmError, RrmProblem,
    RrmSolution, ViolationKind, DEFAULT_TOLERANCE_S, MAX_EXACT_DEVICES, MAX_EXACT_RBS,
};
use crate::channel::ChannelRealization;
use crate::scenario::Scenario;

/// Largest `(N + 1)^M` search space the automatic choice hands to the exact solver.
const EXACT_AUTO_LIMIT: f64 = 2e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    /// Exact when the instance is small enough, otherwise the heuristic.
    #[default]
    Auto,
    Exact,
    Heuristic,
}

impl SolverChoice {
    fn solve(self, problem: &RrmProblem) -> Result<RrmSolution, RrmError> {
        let n = problem.num_devices();
        let m = problem.num_rbs();
        let use_exact = match self {
            SolverChoice::Exact => true,
            SolverChoice::Heuristic => false,
            SolverChoice::Auto => {
                n <= MAX_EXACT_DEVICES && m <= MAX_EXACT_RBS && ((n + 1) as f64).powi(m as i32) <= EXACT_AUTO_LIMIT
            }
        };
        if use_exact {
            solve_exact(problem)
        } else {
            solve_heuristic(problem, DEFAULT_TOLERANCE_S)
        }
    }
}

/// Outcome of one solve-and-check round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Objective of the round's solution, `None` when no device set could be covered.
    pub max_delay_s: Option<f64>,
    pub violations: Vec<ConstraintViolation>,
    /// Pairs forbidden as a result of this round.
    pub forbidden: Vec<(usize, usize)>,
}

/// Repair loop at full power with the automatic solver choice.
pub fn reflexion_solve(
    scenario: &Scenario,
    realization: &ChannelRealization,
    max_rounds: usize,
) -> Result<RrmSolution, RrmError> {
    reflexion_solve_with(scenario, realization, max_rounds, SolverChoice::Auto)
}

pub fn reflexion_solve_with(
    scenario: &Scenario,
    realization: &ChannelRealization,
    max_rounds: usize,
    solver: SolverChoice,
) -> Result<RrmSolution, RrmError> {
    if max_rounds < 1 {
        return Err(RrmError::InvalidArgument("max_rounds must be >= 1".into()));
    }
    let power = vec![scenario.p_max_w; scenario.num_devices()];
    let mut problem = build_problem(scenario, realization, &power)?;
    problem.sinr_screen = false;

    let mut history = Vec::new();
    for round in 1..=max_rounds {
        let mut solution = solver.solve(&problem)?;
        let violations = if solution.feasible {
            check_constraints(scenario, &problem, &solution)
        } else {
            solution.violations.clone()
        };
        let repairs: Vec<(usize, usize)> = violations
            .iter()
            .filter(|v| v.kind() == ViolationKind::SinrThreshold)
            .filter_map(|v| Some((v.device()?, v.rb()?)))
            .collect();
        problem.forbidden.extend(repairs.iter().copied());
        log::debug!(
            "reflexion round {round}: {} violations, {} pairs forbidden",
            violations.len(),
            repairs.len()
        );
        history.push(RoundRecord {
            round,
            max_delay_s: solution.max_delay_s.is_finite().then_some(solution.max_delay_s),
            violations: violations.clone(),
            forbidden: repairs.clone(),
        });

        let done = violations.is_empty() || repairs.is_empty() || round == max_rounds;
        if done {
            solution.feasible = violations.is_empty();
            solution.violations = violations;
            solution.history = history;
            return Ok(solution);
        }
    }
    unreachable!("the last round always returns")
}

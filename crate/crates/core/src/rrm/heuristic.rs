//! Bisection on the target delay with a greedy covering check, then swap local search.

use super::constraints::diagnose_coverage;
use super::matching::Matching;
use super::{solve_exact, RrmError, RrmProblem, RrmSolution, SolverKind};

pub const DEFAULT_TOLERANCE_S: f64 = 1e-4;

const RATE_SLACK: f64 = 1e-12;
const IMPROVEMENT: f64 = 1e-9;
const MAX_LOCAL_MOVES: usize = 100_000;
/// Largest RB pool handed to the exact solver when re-solving a device neighbourhood.
const NEIGHBOURHOOD_MAX_RBS: usize = 10;

/// Scalable approximate solver.
///
/// For a target delay `T` every device needs `sum_j R_ij >= D_i / T`. Devices are served in
/// order of decreasing scarcity `D_i / max_j R_ij`, each taking its fastest free eligible RBs
/// until its need is met, but never an RB whose loss would leave a later device without
/// any eligible RB (checked with a bipartite matching). Bisection over
/// `[0, max_i D_i / min_j R_ij]` finds the smallest target the greedy meets, left-over RBs go
/// to the current bottleneck, and relocate/swap moves run until none lowers the maximum delay.
/// When those stall, the bottleneck device and up to two others are re-solved exactly over
/// the RBs they hold, and the move search resumes.
///
/// The greedy runs twice, once taking RBs by raw rate and once by advantage over the best
/// competing device, and the better of the two results is returned.
pub fn solve_heuristic(problem: &RrmProblem, tolerance_s: f64) -> Result<RrmSolution, RrmError> {
    if !(tolerance_s > 0.0) {
        return Err(RrmError::InvalidArgument(format!("tolerance must be > 0 s, got {tolerance_s}")));
    }
    let eligible = problem.eligibility();
    let diagnosis = diagnose_coverage(problem, &eligible);
    if !diagnosis.is_empty() {
        return Ok(problem.infeasible(diagnosis, SolverKind::Heuristic));
    }

    let mut best: Option<RrmSolution> = None;
    for ranking in [Ranking::Rate, Ranking::Advantage] {
        let greedy = Greedy::new(problem, &eligible, ranking);
        let owner = greedy.bisect(tolerance_s);
        let mut improver = LocalSearch::new(problem, &eligible, owner);
        improver.fill_leftovers();
        improver.run();

        let mut assignment = vec![vec![false; problem.num_rbs()]; problem.num_devices()];
        for (j, o) in improver.owner.iter().enumerate() {
            if let Some(i) = *o {
                assignment[i][j] = true;
            }
        }
        let candidate = problem.solution(assignment, SolverKind::Heuristic);
        if best.as_ref().is_none_or(|b| candidate.max_delay_s < b.max_delay_s) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one ranking ran"))
}

/// Order in which a device claims its eligible RBs.
#[derive(Debug, Clone, Copy)]
enum Ranking {
    /// Fastest RB first.
    Rate,
    /// Largest ratio to the best competing device's rate on the same RB first.
    Advantage,
}

struct Greedy<'a> {
    problem: &'a RrmProblem,
    eligible: &'a [Vec<bool>],
    /// Devices by decreasing scarcity.
    order: Vec<usize>,
    /// Eligible RBs of each device by decreasing rate.
    ranked: Vec<Vec<usize>>,
}

impl<'a> Greedy<'a> {
    fn new(problem: &'a RrmProblem, eligible: &'a [Vec<bool>], ranking: Ranking) -> Self {
        let n = problem.num_devices();
        let rates = &problem.rates_bps;
        let key = |i: usize, j: usize| match ranking {
            Ranking::Rate => rates[i][j],
            Ranking::Advantage => {
                let rival = (0..n)
                    .filter(|&k| k != i && eligible[k][j])
                    .map(|k| rates[k][j])
                    .fold(0.0, f64::max);
                if rival > 0.0 {
                    rates[i][j] / rival
                } else {
                    f64::INFINITY
                }
            }
        };
        let ranked: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut rbs: Vec<usize> = (0..problem.num_rbs()).filter(|&j| eligible[i][j]).collect();
                rbs.sort_by(|&a, &b| {
                    key(i, b)
                        .total_cmp(&key(i, a))
                        .then(rates[i][b].total_cmp(&rates[i][a]))
                        .then(a.cmp(&b))
                });
                rbs
            })
            .collect();
        let scarcity: Vec<f64> = (0..n)
            .map(|i| {
                let best = ranked[i].iter().map(|&j| rates[i][j]).fold(0.0, f64::max);
                problem.data_bits[i] / best
            })
            .collect();
        let mut order: Vec<usize> = (0..problem.num_devices()).collect();
        order.sort_by(|&a, &b| scarcity[b].total_cmp(&scarcity[a]).then(a.cmp(&b)));
        Greedy {
            problem,
            eligible,
            order,
            ranked,
        }
    }

    /// `max_i D_i / (slowest eligible rate of i)`: one RB per device meets this target.
    fn upper_bound(&self) -> f64 {
        self.ranked
            .iter()
            .enumerate()
            .map(|(i, rbs)| {
                let slowest = rbs
                    .iter()
                    .map(|&j| self.problem.rates_bps[i][j])
                    .fold(f64::INFINITY, f64::min);
                self.problem.data_bits[i] / slowest
            })
            .fold(0.0, f64::max)
    }

    /// Smallest target within `tolerance_s` that [`Greedy::cover`] meets, with its cover.
    fn bisect(&self, tolerance_s: f64) -> Vec<Option<usize>> {
        let mut hi = self.upper_bound();
        let mut lo = 0.0;
        let mut owner = self.cover(hi).unwrap_or_else(|| self.matching_cover());
        while hi - lo > tolerance_s {
            let mid = 0.5 * (lo + hi);
            match self.cover(mid) {
                Some(o) => {
                    hi = mid;
                    owner = o;
                }
                None => lo = mid,
            }
        }
        owner
    }

    fn cover(&self, target_s: f64) -> Option<Vec<Option<usize>>> {
        if !(target_s > 0.0) {
            return None;
        }
        let m = self.problem.num_rbs();
        let mut available = vec![true; m];
        let mut matching = Matching::maximum(self.eligible, &available);
        let mut owner = vec![None; m];
        for &i in &self.order {
            matching.release_device(i);
            let need = self.problem.data_bits[i] / target_s * (1.0 - RATE_SLACK);
            let mut got = 0.0;
            for &j in &self.ranked[i] {
                if got >= need {
                    break;
                }
                if !available[j] {
                    continue;
                }
                available[j] = false;
                if !matching.try_claim(j, self.eligible, &available) {
                    available[j] = true;
                    continue;
                }
                owner[j] = Some(i);
                got += self.problem.rates_bps[i][j];
            }
            if got < need {
                return None;
            }
        }
        Some(owner)
    }

    /// One RB per device from a maximum matching.
    fn matching_cover(&self) -> Vec<Option<usize>> {
        let m = self.problem.num_rbs();
        let matching = Matching::maximum(self.eligible, &vec![true; m]);
        let mut owner = vec![None; m];
        for i in 0..self.problem.num_devices() {
            let j = matching.rb_of(i).expect("coverage checked");
            owner[j] = Some(i);
        }
        owner
    }
}

struct LocalSearch<'a> {
    problem: &'a RrmProblem,
    eligible: &'a [Vec<bool>],
    owner: Vec<Option<usize>>,
    totals: Vec<f64>,
    counts: Vec<usize>,
}

impl<'a> LocalSearch<'a> {
    fn new(problem: &'a RrmProblem, eligible: &'a [Vec<bool>], owner: Vec<Option<usize>>) -> Self {
        let n = problem.num_devices();
        let mut totals = vec![0.0; n];
        let mut counts = vec![0; n];
        for (j, o) in owner.iter().enumerate() {
            if let Some(i) = *o {
                totals[i] += problem.rates_bps[i][j];
                counts[i] += 1;
            }
        }
        LocalSearch {
            problem,
            eligible,
            owner,
            totals,
            counts,
        }
    }

    fn delay(&self, i: usize, total: f64) -> f64 {
        if total > 0.0 {
            self.problem.data_bits[i] / total
        } else {
            f64::INFINITY
        }
    }

    fn max_delay_with(&self, changed: &[(usize, f64)]) -> f64 {
        (0..self.totals.len())
            .map(|i| {
                let t = changed
                    .iter()
                    .find(|(d, _)| *d == i)
                    .map_or(self.totals[i], |(_, t)| *t);
                self.delay(i, t)
            })
            .fold(0.0, f64::max)
    }

    fn assign(&mut self, rb: usize, to: usize) {
        self.release(rb);
        self.totals[to] += self.problem.rates_bps[to][rb];
        self.counts[to] += 1;
        self.owner[rb] = Some(to);
    }

    /// Free RBs go, one by one, to the eligible device with the largest current delay.
    fn fill_leftovers(&mut self) {
        for j in 0..self.owner.len() {
            if self.owner[j].is_some() {
                continue;
            }
            let pick = (0..self.totals.len())
                .filter(|&i| self.eligible[i][j])
                .map(|i| (i, self.delay(i, self.totals[i])))
                .fold(None::<(usize, f64)>, |best, (i, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                });
            if let Some((i, _)) = pick {
                self.assign(j, i);
            }
        }
    }

    fn run(&mut self) {
        let mut moves = 0;
        loop {
            while moves < MAX_LOCAL_MOVES && self.improve_once() {
                moves += 1;
            }
            if moves >= MAX_LOCAL_MOVES {
                log::debug!("local search stopped at the move cap");
                return;
            }
            if !self.resolve_neighbourhood() {
                return;
            }
            moves += 1;
        }
    }

    fn bottleneck(&self) -> usize {
        (0..self.totals.len())
            .map(|i| (i, self.delay(i, self.totals[i])))
            .fold((0, f64::NEG_INFINITY), |best, (i, d)| if d > best.1 { (i, d) } else { best })
            .0
    }

    /// Re-solves the bottleneck device together with one or two others exactly, over the
    /// RBs they hold plus the free ones. Applies the first re-solve that lowers the maximum
    /// delay.
    fn resolve_neighbourhood(&mut self) -> bool {
        let n = self.totals.len();
        let b = self.bottleneck();
        let current = self.max_delay_with(&[]);
        let threshold = current * (1.0 - IMPROVEMENT);
        for a in 0..n {
            for c in a..n {
                if a == b || c == b {
                    continue;
                }
                let mut group = vec![b, a, c];
                group.sort_unstable();
                group.dedup();
                let outside = (0..n)
                    .filter(|i| !group.contains(i))
                    .map(|i| self.delay(i, self.totals[i]))
                    .fold(0.0, f64::max);
                if outside >= threshold {
                    continue;
                }
                let rbs: Vec<usize> = (0..self.owner.len())
                    .filter(|&j| match self.owner[j] {
                        Some(o) => group.contains(&o),
                        None => group.iter().any(|&i| self.eligible[i][j]),
                    })
                    .collect();
                if rbs.len() > NEIGHBOURHOOD_MAX_RBS {
                    continue;
                }
                let sub = self.subproblem(&group, &rbs);
                let Ok(solved) = solve_exact(&sub) else { continue };
                if !solved.feasible || solved.max_delay_s.max(outside) >= threshold {
                    continue;
                }
                for (local_j, &j) in rbs.iter().enumerate() {
                    let to = (0..group.len()).find(|&g| solved.assignment[g][local_j]);
                    match to {
                        Some(g) => self.assign(j, group[g]),
                        None => self.release(j),
                    }
                }
                return true;
            }
        }
        false
    }

    fn subproblem(&self, group: &[usize], rbs: &[usize]) -> RrmProblem {
        let p = self.problem;
        let pick = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            group.iter().map(|&i| rbs.iter().map(|&j| m[i][j]).collect()).collect()
        };
        RrmProblem {
            device_ids: group.iter().map(|&i| p.device_ids[i].clone()).collect(),
            rates_bps: pick(&p.rates_bps),
            sinr: pick(&p.sinr),
            data_bits: group.iter().map(|&i| p.data_bits[i]).collect(),
            beta: p.beta,
            power_w: group.iter().map(|&i| p.power_w[i]).collect(),
            p_max_w: p.p_max_w,
            sinr_screen: p.sinr_screen,
            forbidden: group
                .iter()
                .enumerate()
                .flat_map(|(g, &i)| {
                    rbs.iter()
                        .enumerate()
                        .filter(move |&(_, &j)| p.forbidden.contains(&(i, j)))
                        .map(move |(l, _)| (g, l))
                })
                .collect(),
        }
    }

    fn release(&mut self, rb: usize) {
        if let Some(from) = self.owner[rb].take() {
            self.totals[from] -= self.problem.rates_bps[from][rb];
            self.counts[from] -= 1;
        }
    }

    /// Applies the first relocate or swap move that lowers the maximum delay.
    fn improve_once(&mut self) -> bool {
        let rates = &self.problem.rates_bps;
        let current = self.max_delay_with(&[]);
        let threshold = current * (1.0 - IMPROVEMENT);
        let m = self.owner.len();

        for j in 0..m {
            let Some(a) = self.owner[j] else { continue };
            if self.counts[a] < 2 {
                continue;
            }
            for b in 0..self.totals.len() {
                if b == a || !self.eligible[b][j] {
                    continue;
                }
                let moved = [(a, self.totals[a] - rates[a][j]), (b, self.totals[b] + rates[b][j])];
                if self.max_delay_with(&moved) < threshold {
                    self.assign(j, b);
                    return true;
                }
            }
        }

        for j in 0..m {
            let Some(a) = self.owner[j] else { continue };
            for k in (j + 1)..m {
                let Some(b) = self.owner[k] else { continue };
                if a == b || !self.eligible[a][k] || !self.eligible[b][j] {
                    continue;
                }
                let swapped = [
                    (a, self.totals[a] - rates[a][j] + rates[a][k]),
                    (b, self.totals[b] - rates[b][k] + rates[b][j]),
                ];
                if self.max_delay_with(&swapped) < threshold {
                    self.assign(j, b);
                    self.assign(k, a);
                    return true;
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rrm::{solve_exact, ViolationKind};

    fn problem(rates: Vec<Vec<f64>>, data: Vec<f64>) -> RrmProblem {
        let n = rates.len();
        let sinr = rates.iter().map(|r| vec![10.0; r.len()]).collect();
        RrmProblem::from_matrices(rates, sinr, data, 1.0, vec![0.1; n], 0.2).unwrap()
    }

    #[test]
    fn diagonal_two_by_two_matches_exact() {
        let p = problem(vec![vec![2e6, 1e6], vec![1e6, 2e6]], vec![1e6, 1e6]);
        let h = solve_heuristic(&p, DEFAULT_TOLERANCE_S).unwrap();
        assert_eq!(h.max_delay_s, 0.5);
        assert_eq!(h.max_delay_s, solve_exact(&p).unwrap().max_delay_s);
    }

    #[test]
    fn greedy_keeps_scarce_device_coverable() {
        // d0 is scarcer and prefers RB 0, the only RB d1 can use.
        let p = problem(vec![vec![1e6, 0.9e6], vec![1e5, 0.0]], vec![4e6, 1e3]);
        let h = solve_heuristic(&p, DEFAULT_TOLERANCE_S).unwrap();
        assert!(h.feasible);
        assert_eq!(h.rbs_of(1), vec![0]);
        assert_eq!(h.rbs_of(0), vec![1]);
    }

    #[test]
    fn infeasible_instances_are_reported() {
        let p = problem(vec![vec![1e6], vec![1e6]], vec![1.0, 1.0]);
        let h = solve_heuristic(&p, DEFAULT_TOLERANCE_S).unwrap();
        assert!(!h.feasible);
        assert_eq!(h.violations[0].kind(), ViolationKind::UnservedDevice);
    }

    #[test]
    fn rejects_non_positive_tolerance() {
        let p = problem(vec![vec![1e6]], vec![1.0]);
        assert!(solve_heuristic(&p, 0.0).is_err());
    }

    #[test]
    fn scales_past_the_exact_guard() {
        let n = 20;
        let m = 60;
        let rates: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..m).map(|j| 1e5 * (1.0 + ((i * 7 + j * 13) % 17) as f64)).collect())
            .collect();
        let p = problem(rates, (0..n).map(|i| 1e6 * (1.0 + i as f64 % 3.0)).collect());
        let h = solve_heuristic(&p, DEFAULT_TOLERANCE_S).unwrap();
        assert!(h.feasible);
        assert!(h.per_device_delay_s.iter().all(|d| d.is_finite()));
    }
}

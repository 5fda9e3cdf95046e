use std::cmp::Ordering;
use std::time::{Duration, Instant};

use super::{heuristic_ffd, Allocation, PlacementProblem, SolveReport, SolveStatus, GAP_TOLERANCE};
use crate::domain::SHARE_TOLERANCE;
use crate::error::{Error, Result};

/// Depth-first search over individual VM → host assignments with a simple
/// additive lower bound. Exponential; meant as a reference for small problems.
pub fn solve_naive(problem: &PlacementProblem, time_limit: Option<Duration>) -> Result<SolveReport> {
    let start = Instant::now();
    if let Some(j) = problem.unplaceable_vm() {
        return Err(Error::InfeasiblePlacement {
            vm: problem.vms[j].id,
        });
    }
    let nh = problem.hosts.len();
    let nv = problem.vms.len();

    let size = |j: usize| (0..nh).map(|i| problem.cpu_share(j, i)).fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..nv).collect();
    order.sort_by(|&a, &b| {
        size(b)
            .partial_cmp(&size(a))
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });

    let min_load: Vec<f64> = (0..nv)
        .map(|j| {
            (0..nh)
                .filter(|&i| problem.fits(j, i))
                .map(|i| problem.load_cost(j, i))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut rest_bound = vec![0.0; nv + 1];
    for k in (0..nv).rev() {
        rest_bound[k] = rest_bound[k + 1] + min_load[order[k]];
    }
    let baseline: f64 = (0..nh).map(|i| problem.empty_cost(i)).sum();

    let mut search = Search {
        problem,
        order: &order,
        rest_bound: &rest_bound,
        cpu: vec![0.0; nh],
        ram: vec![0.0; nh],
        used: vec![0; nh],
        current: vec![usize::MAX; nv],
        best: None,
        best_cost: f64::INFINITY,
        nodes: 0,
        deadline: time_limit.map(|d| start + d),
        timed_out: false,
    };
    if let Ok(a) = heuristic_ffd(problem) {
        search.best_cost = a.energy_cost_rate - baseline;
        search.best = Some(a.assignment);
    }
    search.dfs(0, 0.0);

    let root_bound = baseline + rest_bound[0];
    let nodes = search.nodes;
    let timed_out = search.timed_out;
    let Some(assignment) = search.best else {
        return Err(match time_limit {
            Some(limit) if timed_out => Error::SolverLimit { limit },
            _ => Error::InfeasiblePlacement {
                vm: problem.vms.first().map_or(0, |v| v.id),
            },
        });
    };
    let allocation = Allocation::from_assignment(problem, assignment);
    let status = if timed_out {
        SolveStatus::TimeLimited {
            lower_bound: root_bound,
        }
    } else {
        SolveStatus::Optimal
    };
    Ok(SolveReport {
        allocation,
        status,
        nodes_explored: nodes,
        wall_time: start.elapsed(),
    })
}

struct Search<'a> {
    problem: &'a PlacementProblem,
    order: &'a [usize],
    rest_bound: &'a [f64],
    cpu: Vec<f64>,
    ram: Vec<f64>,
    used: Vec<usize>,
    current: Vec<usize>,
    best: Option<Vec<usize>>,
    /// Cost above the empty-host baseline.
    best_cost: f64,
    nodes: u64,
    deadline: Option<Instant>,
    timed_out: bool,
}

impl Search<'_> {
    fn dfs(&mut self, k: usize, partial: f64) {
        if self.timed_out {
            return;
        }
        self.nodes += 1;
        if self.nodes.is_multiple_of(1024) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.timed_out = true;
                    return;
                }
            }
        }
        if partial + self.rest_bound[k] >= self.best_cost - GAP_TOLERANCE {
            return;
        }
        if k == self.order.len() {
            self.best_cost = partial;
            self.best = Some(self.current.clone());
            return;
        }
        let p = self.problem;
        let j = self.order[k];
        for i in 0..p.hosts.len() {
            let a = p.cpu_share(j, i);
            let m = p.ram_share(j, i);
            if self.cpu[i] + a > 1.0 + SHARE_TOLERANCE || self.ram[i] + m > 1.0 + SHARE_TOLERANCE {
                continue;
            }
            let open = if self.used[i] == 0 { p.open_cost(i) } else { 0.0 };
            self.cpu[i] += a;
            self.ram[i] += m;
            self.used[i] += 1;
            self.current[j] = i;
            self.dfs(k + 1, partial + open + p.load_cost(j, i));
            self.cpu[i] -= a;
            self.ram[i] -= m;
            self.used[i] -= 1;
            if self.used[i] == 0 {
                self.cpu[i] = 0.0;
                self.ram[i] = 0.0;
            }
            self.current[j] = usize::MAX;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::objective_value;
    use crate::placement::testing::problem;
    use approx::assert_relative_eq;

    #[test]
    fn one_vm_one_host() {
        let p = problem(&[(143.0, 518.4, true)], &[(0.3, 0.0625)], 0.0004);
        let r = solve_naive(&p, None).unwrap();
        assert!(r.is_optimal());
        assert_eq!(r.allocation.assignment, vec![0]);
        assert_relative_eq!(r.objective(), 0.102_248, max_relative = 1e-9);
    }

    #[test]
    fn two_small_vms_share_one_host() {
        let hosts = [(143.0, 518.4, true); 2];
        let p = problem(&hosts, &[(0.3, 0.0625), (0.3, 0.0625)], 0.0004);
        let r = solve_naive(&p, None).unwrap();
        assert_eq!(r.allocation.powered_count(), 1);
        let e = objective_value(&p, &r.allocation).unwrap();
        assert_relative_eq!(e, (143.0 + 0.6 * 375.4) * 0.0004, max_relative = 1e-12);
    }

    #[test]
    fn prefers_the_cheaper_host() {
        let hosts = [(200.0, 400.0, true), (100.0, 300.0, true)];
        let p = problem(&hosts, &[(0.5, 0.5)], 0.001);
        let r = solve_naive(&p, None).unwrap();
        assert_eq!(r.allocation.assignment, vec![1]);
    }
}

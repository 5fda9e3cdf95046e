use std::cmp::Ordering;

use super::{Allocation, PlacementProblem};
use crate::domain::SHARE_TOLERANCE;
use crate::error::{Error, Result};

/// First-fit decreasing: VMs by descending CPU share, onto hosts ordered by
/// ascending `c_max · E / cpu_capacity`.
pub fn heuristic_ffd(problem: &PlacementProblem) -> Result<Allocation> {
    if let Some(j) = problem.unplaceable_vm() {
        return Err(Error::InfeasiblePlacement {
            vm: problem.vms[j].id,
        });
    }
    let nh = problem.hosts.len();
    let mut host_order: Vec<usize> = (0..nh).collect();
    let proxy = |i: usize| {
        let h = &problem.hosts[i];
        h.c_max * h.energy_price / h.cpu_capacity
    };
    host_order.sort_by(|&a, &b| {
        proxy(a)
            .partial_cmp(&proxy(b))
            .unwrap_or(Ordering::Equal)
            .then(problem.hosts[b].initially_on.cmp(&problem.hosts[a].initially_on))
            .then(a.cmp(&b))
    });

    let size = |j: usize| {
        (0..nh)
            .filter(|&i| problem.fits(j, i))
            .map(|i| problem.cpu_share(j, i))
            .fold(0.0, f64::max)
    };
    let mut vm_order: Vec<usize> = (0..problem.vms.len()).collect();
    vm_order.sort_by(|&a, &b| {
        size(b)
            .partial_cmp(&size(a))
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut cpu = vec![0.0; nh];
    let mut ram = vec![0.0; nh];
    let mut assignment = vec![usize::MAX; problem.vms.len()];
    for &j in &vm_order {
        let slot = host_order.iter().copied().find(|&i| {
            cpu[i] + problem.cpu_share(j, i) <= 1.0 + SHARE_TOLERANCE
                && ram[i] + problem.ram_share(j, i) <= 1.0 + SHARE_TOLERANCE
        });
        let Some(i) = slot else {
            return Err(Error::InfeasiblePlacement {
                vm: problem.vms[j].id,
            });
        };
        cpu[i] += problem.cpu_share(j, i);
        ram[i] += problem.ram_share(j, i);
        assignment[j] = i;
    }
    Ok(Allocation::from_assignment(problem, assignment))
}

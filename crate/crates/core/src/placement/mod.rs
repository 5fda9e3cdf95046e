//! Energy-cost-minimising VM placement for a coalition of providers.
//!
//! A [`PlacementProblem`] pools the hosts and workloads of a coalition. An
//! [`Allocation`] assigns every VM to one host; its hourly cost is
//!
//! ```text
//! sum over hosts i of  [ p_i c_min + a_i (c_max - c_min)
//!                        + p_i (1 - o_i) L / T + (1 - p_i) o_i S / T ] E_owner(i)
//! + sum over VMs j of  G(current provider of j, owner of host of j, class of j)
//! ```
//!
//! where `p_i` is the power state chosen for host `i`, `o_i` its initial state,
//! `a_i` its CPU utilisation, `L`/`S` the switch-on/off energy in Wh and `T`
//! the planning period. [`objective_value`] recomputes this from scratch and is
//! the audit for every solver.

mod heuristic;
mod lp;
mod naive;
mod symmetric;

use std::fmt;
use std::time::Duration;

use serde::Serialize;

use crate::coalition::Coalition;
use crate::domain::{HostId, ProviderId, Scenario, VmId, SHARE_TOLERANCE};
use crate::error::{Error, Result};

pub use heuristic::heuristic_ffd;
pub use lp::{LinearProgram, LpOutcome, Sense};
pub use naive::solve_naive;
pub use symmetric::solve_symmetric;

/// Absolute tolerance when comparing objective values of integer solutions.
pub const GAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HostSlot {
    pub id: HostId,
    pub owner: ProviderId,
    pub class: u32,
    pub class_index: usize,
    pub initially_on: bool,
    pub c_min: f64,
    pub c_max: f64,
    pub cpu_capacity: f64,
    /// Currency per Wh paid by the owner.
    pub energy_price: f64,
    /// Switch-on energy (Wh), one-shot.
    pub switch_on_wh: f64,
    /// Switch-off energy (Wh), one-shot.
    pub switch_off_wh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VmSlot {
    pub id: VmId,
    pub owner: ProviderId,
    pub class: u32,
    pub class_index: usize,
    /// Provider owning the VM's current host, if it has one.
    pub current_provider: Option<ProviderId>,
    pub revenue_rate: f64,
}

/// Hosts and VMs of a coalition with dense per-(VM, host) coefficients.
#[derive(Debug, Clone)]
pub struct PlacementProblem {
    pub hosts: Vec<HostSlot>,
    pub vms: Vec<VmSlot>,
    pub planning_period_hours: f64,
    cpu: Vec<f64>,
    ram: Vec<f64>,
    migration: Vec<f64>,
}

impl PlacementProblem {
    /// Assembles a problem from explicit parts. `coeff(vm, host)` returns
    /// (CPU share, RAM share, hourly migration rate).
    pub fn from_parts(
        hosts: Vec<HostSlot>,
        vms: Vec<VmSlot>,
        planning_period_hours: f64,
        mut coeff: impl FnMut(&VmSlot, &HostSlot) -> (f64, f64, f64),
    ) -> Self {
        let n = vms.len() * hosts.len();
        let (mut cpu, mut ram, mut migration) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for vm in &vms {
            for h in &hosts {
                let (a, m, g) = coeff(vm, h);
                cpu.push(a);
                ram.push(m);
                migration.push(g);
            }
        }
        PlacementProblem {
            hosts,
            vms,
            planning_period_hours,
            cpu,
            ram,
            migration,
        }
    }

    fn idx(&self, vm: usize, host: usize) -> usize {
        vm * self.hosts.len() + host
    }

    pub fn cpu_share(&self, vm: usize, host: usize) -> f64 {
        self.cpu[self.idx(vm, host)]
    }

    pub fn ram_share(&self, vm: usize, host: usize) -> f64 {
        self.ram[self.idx(vm, host)]
    }

    pub fn migration_rate(&self, vm: usize, host: usize) -> f64 {
        self.migration[self.idx(vm, host)]
    }

    /// Whether a VM alone fits on a host.
    pub fn fits(&self, vm: usize, host: usize) -> bool {
        self.cpu_share(vm, host) <= 1.0 + SHARE_TOLERANCE && self.ram_share(vm, host) <= 1.0 + SHARE_TOLERANCE
    }

    /// Hourly cost of a powered host before any load:
    /// `(c_min + (1 - o) L / T) E`.
    pub fn on_cost(&self, host: usize) -> f64 {
        let h = &self.hosts[host];
        let switch = if h.initially_on { 0.0 } else { h.switch_on_wh };
        (h.c_min + switch / self.planning_period_hours) * h.energy_price
    }

    /// Hourly cost of an unpowered host: `o S / T E`.
    pub fn off_cost(&self, host: usize) -> f64 {
        let h = &self.hosts[host];
        if h.initially_on {
            h.switch_off_wh / self.planning_period_hours * h.energy_price
        } else {
            0.0
        }
    }

    /// Whether a host carrying no VMs is cheaper kept on than off.
    pub fn idle_stays_on(&self, host: usize) -> bool {
        self.on_cost(host) < self.off_cost(host)
    }

    /// Cheapest cost of a host with no VMs.
    pub fn empty_cost(&self, host: usize) -> f64 {
        self.on_cost(host).min(self.off_cost(host))
    }

    /// Extra hourly cost of powering a host for load, relative to leaving it
    /// empty. Never negative.
    pub fn open_cost(&self, host: usize) -> f64 {
        self.on_cost(host) - self.empty_cost(host)
    }

    /// Hourly cost a VM adds to the host it runs on: CPU-proportional power
    /// plus migration.
    pub fn load_cost(&self, vm: usize, host: usize) -> f64 {
        let h = &self.hosts[host];
        self.cpu_share(vm, host) * (h.c_max - h.c_min) * h.energy_price + self.migration_rate(vm, host)
    }

    /// First VM that fits on no host at all.
    pub fn unplaceable_vm(&self) -> Option<usize> {
        (0..self.vms.len()).find(|&j| !(0..self.hosts.len()).any(|i| self.fits(j, i)))
    }

    pub fn revenue_rate(&self) -> f64 {
        self.vms.iter().map(|v| v.revenue_rate).sum()
    }
}

/// Pools the hosts and workloads of `coalition`.
pub fn build_problem(scenario: &Scenario, coalition: Coalition) -> Result<PlacementProblem> {
    if coalition.is_empty() {
        return Err(Error::EmptyCoalition);
    }
    let mut hosts = Vec::new();
    let mut vms = Vec::new();
    for id in coalition.members() {
        let p = scenario
            .provider(id)
            .ok_or_else(|| Error::Domain(format!("unknown provider {id}")))?;
        for h in &p.hosts {
            let g = scenario
                .host_class_index(h.class)
                .ok_or_else(|| Error::Domain(format!("host {} has unknown class", h.id)))?;
            let hc = &scenario.host_classes[g];
            hosts.push(HostSlot {
                id: h.id,
                owner: p.id,
                class: h.class,
                class_index: g,
                initially_on: h.initially_on,
                c_min: hc.c_min,
                c_max: hc.c_max,
                cpu_capacity: hc.cpu_capacity,
                energy_price: p.energy_price,
                switch_on_wh: hc.switch_energy_on,
                switch_off_wh: hc.switch_energy_off,
            });
        }
        for v in &p.workload {
            let q = scenario
                .vm_class_index(v.class)
                .ok_or_else(|| Error::Domain(format!("VM {} has unknown class", v.id)))?;
            let current_provider = match v.current_host {
                None => None,
                Some(hid) => Some(
                    scenario
                        .host(hid)
                        .ok_or_else(|| Error::Domain(format!("VM {} on unknown host", v.id)))?
                        .owner,
                ),
            };
            vms.push(VmSlot {
                id: v.id,
                owner: p.id,
                class: v.class,
                class_index: q,
                current_provider,
                revenue_rate: scenario.vm_classes[q].revenue_rate,
            });
        }
    }
    let hours = scenario.planning_period_hours;
    Ok(PlacementProblem::from_parts(hosts, vms, hours, |vm, h| {
        let (a, m) = scenario.shares(vm.class_index, h.class_index);
        let g = scenario
            .migration
            .hourly_rate(vm.class_index, vm.current_provider, h.owner, hours);
        (a, m, g)
    }))
}

/// The constraints every allocation must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Constraint {
    /// Each VM is hosted by exactly one host.
    SingleHost,
    /// Only powered hosts carry VMs.
    PoweredHost,
    /// CPU of a powered host is not exceeded and unpowered hosts use none.
    CpuCapacity,
    /// RAM of a powered host is not exceeded.
    RamCapacity,
    /// A host's utilisation equals the CPU shares of its VMs.
    CpuAccounting,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constraint::SingleHost => "each VM is hosted by exactly one host",
            Constraint::PoweredHost => "only powered-on hosts can carry VMs",
            Constraint::CpuCapacity => "CPU capacity of a powered-on host",
            Constraint::RamCapacity => "RAM capacity of a powered-on host",
            Constraint::CpuAccounting => "host utilization equals the CPU shares of its VMs",
        };
        f.write_str(s)
    }
}

/// Hourly cost components of an allocation (currency/hour).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub idle_power: f64,
    pub dynamic_power: f64,
    pub switch_cost: f64,
    pub migration_cost: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.idle_power + self.dynamic_power + self.switch_cost + self.migration_cost
    }
}

/// Assignment of every VM of a problem to a host (by position in
/// `problem.hosts` / `problem.vms`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub assignment: Vec<usize>,
    pub host_utilization: Vec<f64>,
    pub powered_on: Vec<bool>,
    pub energy_cost_rate: f64,
    pub breakdown: CostBreakdown,
}

/// Per-provider view of an allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProviderUsage {
    pub provider: ProviderId,
    pub powered_hosts: usize,
    /// Total draw of the provider's powered hosts (W).
    pub power_w: f64,
    /// Hourly energy bill of the provider's hosts, switch terms included.
    pub energy_cost: f64,
    /// VMs running on the provider's hosts.
    pub hosted_vms: usize,
}

impl Allocation {
    /// Builds an allocation from a VM → host assignment. Hosts without VMs are
    /// powered only when that is cheaper than switching them off.
    pub fn from_assignment(problem: &PlacementProblem, assignment: Vec<usize>) -> Self {
        let mut util = vec![0.0; problem.hosts.len()];
        let mut used = vec![false; problem.hosts.len()];
        for (j, &i) in assignment.iter().enumerate() {
            util[i] += problem.cpu_share(j, i);
            used[i] = true;
        }
        let powered: Vec<bool> = used
            .iter()
            .enumerate()
            .map(|(i, &u)| u || problem.idle_stays_on(i))
            .collect();
        let breakdown = cost_breakdown(problem, &assignment, &util, &powered);
        Allocation {
            assignment,
            host_utilization: util,
            powered_on: powered,
            energy_cost_rate: breakdown.total(),
            breakdown,
        }
    }

    /// Allocation of an empty workload.
    pub fn empty(problem: &PlacementProblem) -> Self {
        Self::from_assignment(problem, Vec::new())
    }

    pub fn powered_count(&self) -> usize {
        self.powered_on.iter().filter(|&&p| p).count()
    }

    /// Total power draw of powered hosts (W).
    pub fn power_w(&self, problem: &PlacementProblem) -> f64 {
        (0..problem.hosts.len())
            .filter(|&i| self.powered_on[i])
            .map(|i| host_power(problem, i, self.host_utilization[i]))
            .sum()
    }

    /// VMs assigned to host position `i`.
    pub fn vms_on(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, &h)| h == i)
            .map(|(j, _)| j)
    }

    pub fn per_provider(&self, problem: &PlacementProblem) -> Vec<ProviderUsage> {
        let mut owners: Vec<ProviderId> = problem.hosts.iter().map(|h| h.owner).collect();
        owners.extend(problem.vms.iter().map(|v| v.owner));
        owners.sort_unstable();
        owners.dedup();
        owners
            .into_iter()
            .map(|p| {
                let mut u = ProviderUsage {
                    provider: p,
                    powered_hosts: 0,
                    power_w: 0.0,
                    energy_cost: 0.0,
                    hosted_vms: 0,
                };
                for (i, h) in problem.hosts.iter().enumerate() {
                    if h.owner != p {
                        continue;
                    }
                    let (power, switch) =
                        host_terms(problem, i, self.powered_on[i], self.host_utilization[i]);
                    if self.powered_on[i] {
                        u.powered_hosts += 1;
                        u.power_w += power;
                    }
                    u.energy_cost += (power + switch) * h.energy_price;
                    u.hosted_vms += self.vms_on(i).count();
                }
                u
            })
            .collect()
    }
}

fn host_power(problem: &PlacementProblem, i: usize, util: f64) -> f64 {
    let h = &problem.hosts[i];
    h.c_min + util * (h.c_max - h.c_min)
}

/// (power W, amortised switch W) of host `i`.
fn host_terms(problem: &PlacementProblem, i: usize, powered: bool, util: f64) -> (f64, f64) {
    let h = &problem.hosts[i];
    let t = problem.planning_period_hours;
    match (powered, h.initially_on) {
        (true, true) => (host_power(problem, i, util), 0.0),
        (true, false) => (host_power(problem, i, util), h.switch_on_wh / t),
        (false, true) => (0.0, h.switch_off_wh / t),
        (false, false) => (0.0, 0.0),
    }
}

fn cost_breakdown(
    problem: &PlacementProblem,
    assignment: &[usize],
    util: &[f64],
    powered: &[bool],
) -> CostBreakdown {
    let mut b = CostBreakdown::default();
    for (i, h) in problem.hosts.iter().enumerate() {
        let (_, switch) = host_terms(problem, i, powered[i], util[i]);
        if powered[i] {
            b.idle_power += h.c_min * h.energy_price;
            b.dynamic_power += util[i] * (h.c_max - h.c_min) * h.energy_price;
        }
        b.switch_cost += switch * h.energy_price;
    }
    b.migration_cost = assignment
        .iter()
        .enumerate()
        .map(|(j, &i)| problem.migration_rate(j, i))
        .sum();
    b
}

/// Checks every structural constraint and recomputes the hourly cost from the
/// assignment, independently of any solver.
pub fn objective_value(problem: &PlacementProblem, alloc: &Allocation) -> Result<f64> {
    let nh = problem.hosts.len();
    let violation = |constraint, host: Option<usize>, vm: Option<usize>| Error::ConstraintViolation {
        constraint,
        host: host.map(|i| problem.hosts[i].id),
        vm: vm.map(|j| problem.vms[j].id),
    };
    if alloc.assignment.len() != problem.vms.len()
        || alloc.host_utilization.len() != nh
        || alloc.powered_on.len() != nh
    {
        return Err(violation(Constraint::SingleHost, None, None));
    }
    let mut cpu = vec![0.0; nh];
    let mut ram = vec![0.0; nh];
    for (j, &i) in alloc.assignment.iter().enumerate() {
        if i >= nh {
            return Err(violation(Constraint::SingleHost, None, Some(j)));
        }
        if !alloc.powered_on[i] {
            return Err(violation(Constraint::PoweredHost, Some(i), Some(j)));
        }
        cpu[i] += problem.cpu_share(j, i);
        ram[i] += problem.ram_share(j, i);
    }
    for i in 0..nh {
        let a = alloc.host_utilization[i];
        if (a - cpu[i]).abs() > 1e-12 {
            return Err(violation(Constraint::CpuAccounting, Some(i), None));
        }
        if a > 1.0 + SHARE_TOLERANCE || (!alloc.powered_on[i] && a != 0.0) || a < 0.0 {
            return Err(violation(Constraint::CpuCapacity, Some(i), None));
        }
        if ram[i] > 1.0 + SHARE_TOLERANCE {
            return Err(violation(Constraint::RamCapacity, Some(i), None));
        }
    }

    let t = problem.planning_period_hours;
    let mut e = 0.0;
    for (i, h) in problem.hosts.iter().enumerate() {
        let p = if alloc.powered_on[i] { 1.0 } else { 0.0 };
        let o = if h.initially_on { 1.0 } else { 0.0 };
        e += (p * h.c_min
            + alloc.host_utilization[i] * (h.c_max - h.c_min)
            + p * (1.0 - o) * h.switch_on_wh / t
            + (1.0 - p) * o * h.switch_off_wh / t)
            * h.energy_price;
    }
    for (j, &i) in alloc.assignment.iter().enumerate() {
        e += problem.migration_rate(j, i);
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SolveStatus {
    Optimal,
    Heuristic,
    TimeLimited { lower_bound: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub allocation: Allocation,
    pub status: SolveStatus,
    pub nodes_explored: u64,
    pub wall_time: Duration,
}

impl SolveReport {
    pub fn objective(&self) -> f64 {
        self.allocation.energy_cost_rate
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum SolverKind {
    Naive,
    #[default]
    Symmetric,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(SolverKind::Naive),
            "symmetric" => Ok(SolverKind::Symmetric),
            other => Err(Error::Parse(format!("unknown solver {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub time_limit: Option<Duration>,
}

pub fn solve(problem: &PlacementProblem, config: &SolverConfig) -> Result<SolveReport> {
    match config.kind {
        SolverKind::Naive => solve_naive(problem, config.time_limit),
        SolverKind::Symmetric => solve_symmetric(problem, config.time_limit),
    }
}

/// Host-oriented rendering of an allocation, used for text and JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct HostView {
    pub host: HostId,
    pub owner: ProviderId,
    pub class: u32,
    pub powered: bool,
    pub utilization: f64,
    pub vms: Vec<VmId>,
}

pub fn host_views(problem: &PlacementProblem, alloc: &Allocation) -> Vec<HostView> {
    problem
        .hosts
        .iter()
        .enumerate()
        .map(|(i, h)| HostView {
            host: h.id,
            owner: h.owner,
            class: h.class,
            powered: alloc.powered_on[i],
            utilization: alloc.host_utilization[i],
            vms: alloc.vms_on(i).map(|j| problem.vms[j].id).collect(),
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Small synthetic problem: `hosts` are (class c_min, c_max, on?) with one
    /// energy price; every VM has the same CPU/RAM share on every host.
    pub fn problem(hosts: &[(f64, f64, bool)], vm_shares: &[(f64, f64)], price: f64) -> PlacementProblem {
        let hs = hosts
            .iter()
            .enumerate()
            .map(|(k, &(cmin, cmax, on))| HostSlot {
                id: k as u32 + 1,
                owner: 1,
                class: 1,
                class_index: 0,
                initially_on: on,
                c_min: cmin,
                c_max: cmax,
                cpu_capacity: 1.0,
                energy_price: price,
                switch_on_wh: 0.0,
                switch_off_wh: 0.0,
            })
            .collect();
        let vs: Vec<VmSlot> = vm_shares
            .iter()
            .enumerate()
            .map(|(k, _)| VmSlot {
                id: k as u32 + 1,
                owner: 1,
                class: k as u32 + 1,
                class_index: k,
                current_provider: None,
                revenue_rate: 0.0,
            })
            .collect();
        let shares = vm_shares.to_vec();
        PlacementProblem::from_parts(hs, vs, 12.0, |vm, _| {
            let (a, m) = shares[vm.class_index];
            (a, m, 0.0)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::testing::problem;
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_vm_objective_by_hand() {
        // class-2 host (143 / 518.4 W), one class-2 VM at 0.3 share
        let p = problem(&[(143.0, 518.4, true)], &[(0.3, 0.0625)], 0.0004);
        let a = Allocation::from_assignment(&p, vec![0]);
        let e = objective_value(&p, &a).unwrap();
        assert_relative_eq!(e, (143.0 + 0.3 * 375.4) * 0.0004, max_relative = 1e-12);
        assert_relative_eq!(e, 0.102_248, max_relative = 1e-9);
        assert_relative_eq!(a.energy_cost_rate, e, max_relative = 1e-12);
    }

    #[test]
    fn empty_workload_all_off_costs_nothing() {
        let p = problem(&[(86.7, 274.9, false), (86.7, 274.9, false)], &[], 0.0004);
        let a = Allocation::empty(&p);
        assert_eq!(objective_value(&p, &a).unwrap(), 0.0);
        assert_eq!(a.powered_count(), 0);
    }

    #[test]
    fn audit_names_the_violated_constraint() {
        let p = problem(&[(86.7, 274.9, true)], &[(0.8, 0.1), (0.8, 0.1)], 0.0004);
        let a = Allocation::from_assignment(&p, vec![0, 0]);
        match objective_value(&p, &a) {
            Err(Error::ConstraintViolation { constraint, .. }) => {
                assert_eq!(constraint, Constraint::CpuCapacity)
            }
            other => panic!("expected violation, got {other:?}"),
        }
        let a = Allocation::from_assignment(&p, vec![0]);
        assert!(matches!(
            objective_value(&p, &a),
            Err(Error::ConstraintViolation {
                constraint: Constraint::SingleHost,
                ..
            })
        ));
        let p = problem(&[(86.7, 274.9, true)], &[(0.8, 0.1)], 0.0004);
        let mut a = Allocation::from_assignment(&p, vec![0]);
        a.powered_on[0] = false;
        assert!(matches!(
            objective_value(&p, &a),
            Err(Error::ConstraintViolation {
                constraint: Constraint::PoweredHost,
                ..
            })
        ));
    }

    #[test]
    fn idle_host_kept_on_when_switching_off_costs_more() {
        let mut p = problem(&[(10.0, 20.0, true)], &[], 1.0);
        p.hosts[0].switch_off_wh = 12.0 * 50.0;
        let a = Allocation::empty(&p);
        assert!(a.powered_on[0]);
        assert_relative_eq!(objective_value(&p, &a).unwrap(), 10.0);
    }
}

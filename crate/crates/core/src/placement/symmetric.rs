//! Exact solver exploiting interchangeable hosts and VMs.
//!
//! Hosts with identical cost and capacity coefficients form a host group and
//! VMs with identical coefficients form a VM group. A packing pattern is a
//! maximal vector of per-resource-type VM counts that fits on one host of a
//! group. The integer program chooses how many hosts of each group run each
//! pattern (`m`) and how many VMs of each group go to each host group (`x`):
//!
//! ```text
//! min  sum open_g m_gp + sum load_vg x_vg
//! s.t. sum_p m_gp = n_g <= hosts in g
//!      sum_{v of type t} x_vg <= sum_p k_pt m_gp      for every g, t
//!      sum_g x_vg = VMs in v
//! ```
//!
//! With `m` integral the remaining problem is a transportation problem, so
//! only host counts are branched on. Groups that differ only in their open
//! cost (hosts already on versus hosts that must be switched on) are tied by
//! a family total `sum n_g`; branching goes family totals, then group totals
//! `n_g`, then pattern counts. Every node also rounds its relaxation down to
//! whole hosts and completes the packing greedily to tighten the incumbent.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::ops::Range;
use std::time::{Duration, Instant};

use super::lp::{LinearProgram, LpOutcome, Sense};
use super::{heuristic_ffd, Allocation, PlacementProblem, SolveReport, SolveStatus, GAP_TOLERANCE};
use crate::domain::SHARE_TOLERANCE;
use crate::error::{Error, Result};

const INTEGRALITY_EPS: f64 = 1e-6;
const BOUND_GRID: f64 = 1e-9;

struct VmGroup {
    kind: usize,
    members: Vec<usize>,
}

struct HostGroup {
    members: Vec<usize>,
    patterns: Vec<Vec<u32>>,
}

struct Model {
    vm_groups: Vec<VmGroup>,
    host_groups: Vec<HostGroup>,
    kinds: usize,
    kind_of: Vec<usize>,
    /// Integer variables by branching priority.
    tiers: Vec<Range<usize>>,
    /// Variable index of `m_gp` for each group and pattern.
    m_index: Vec<Vec<usize>>,
    /// Variable index of `x_vg`, if VM group `v` fits on host group `g`.
    x_index: Vec<Vec<Option<usize>>>,
    /// VMs by decreasing largest CPU share.
    vm_order: Vec<usize>,
    lp: LinearProgram,
}

fn bits(xs: impl Iterator<Item = f64>) -> Vec<u64> {
    xs.map(f64::to_bits).collect()
}

/// Groups `0..n` by key in order of first appearance.
fn group_by<K: std::hash::Hash + Eq>(n: usize, key: impl Fn(usize) -> K) -> Vec<Vec<usize>> {
    let mut index: HashMap<K, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for e in 0..n {
        let g = *index.entry(key(e)).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(e);
    }
    groups
}

fn maximal_patterns(cpu: &[f64], ram: &[f64], cap: &[u32]) -> Vec<Vec<u32>> {
    fn rec(
        t: usize,
        cpu: &[f64],
        ram: &[f64],
        cap: &[u32],
        cur: &mut Vec<u32>,
        used: (f64, f64),
        out: &mut Vec<Vec<u32>>,
    ) {
        let limit = 1.0 + SHARE_TOLERANCE;
        if t == cap.len() {
            if cur.iter().all(|&k| k == 0) {
                return;
            }
            let maximal = (0..cap.len())
                .all(|s| cur[s] == cap[s] || used.0 + cpu[s] > limit || used.1 + ram[s] > limit);
            if maximal {
                out.push(cur.clone());
            }
            return;
        }
        let mut most = 0;
        while most < cap[t]
            && used.0 + (most + 1) as f64 * cpu[t] <= limit
            && used.1 + (most + 1) as f64 * ram[t] <= limit
        {
            most += 1;
        }
        for k in (0..=most).rev() {
            cur[t] = k;
            let u = (used.0 + k as f64 * cpu[t], used.1 + k as f64 * ram[t]);
            rec(t + 1, cpu, ram, cap, cur, u, out);
        }
        cur[t] = 0;
    }
    let mut out = Vec::new();
    let mut cur = vec![0; cap.len()];
    rec(0, cpu, ram, cap, &mut cur, (0.0, 0.0), &mut out);
    out
}

impl Model {
    fn build(p: &PlacementProblem) -> Model {
        let nh = p.hosts.len();
        let nv = p.vms.len();
        let kind_groups = group_by(nv, |j| {
            (
                bits((0..nh).map(|i| p.cpu_share(j, i))),
                bits((0..nh).map(|i| p.ram_share(j, i))),
            )
        });
        let mut kind_of = vec![0; nv];
        for (t, g) in kind_groups.iter().enumerate() {
            for &j in g {
                kind_of[j] = t;
            }
        }
        let vm_groups: Vec<VmGroup> =
            group_by(nv, |j| (kind_of[j], bits((0..nh).map(|i| p.load_cost(j, i)))))
                .into_iter()
                .map(|members| VmGroup {
                    kind: kind_of[members[0]],
                    members,
                })
                .collect();
        let kinds = kind_groups.len();
        let reps: Vec<usize> = kind_groups.iter().map(|g| g[0]).collect();
        let vm_reps: Vec<usize> = vm_groups.iter().map(|g| g.members[0]).collect();
        let cap: Vec<u32> = kind_groups.iter().map(|g| g.len() as u32).collect();

        let shape = |i: usize| {
            (
                bits(reps.iter().map(|&j| p.cpu_share(j, i))),
                bits(reps.iter().map(|&j| p.ram_share(j, i))),
                bits(vm_reps.iter().map(|&j| p.load_cost(j, i))),
            )
        };
        let host_groups: Vec<HostGroup> = group_by(nh, |i| (p.open_cost(i).to_bits(), shape(i)))
            .into_iter()
            .map(|members| {
                let i = members[0];
                let cpu: Vec<f64> = reps.iter().map(|&j| p.cpu_share(j, i)).collect();
                let ram: Vec<f64> = reps.iter().map(|&j| p.ram_share(j, i)).collect();
                HostGroup {
                    patterns: maximal_patterns(&cpu, &ram, &cap),
                    members,
                }
            })
            .collect();
        let usable: Vec<usize> = (0..host_groups.len())
            .filter(|&g| !host_groups[g].patterns.is_empty())
            .collect();
        let families: Vec<Vec<usize>> = group_by(usable.len(), |k| shape(host_groups[usable[k]].members[0]))
            .into_iter()
            .filter(|f| f.len() > 1)
            .map(|f| f.into_iter().map(|k| usable[k]).collect())
            .collect();

        let mut objective = Vec::new();
        let mut upper = Vec::new();
        let mut family_index = Vec::new();
        for f in &families {
            family_index.push(objective.len());
            objective.push(0.0);
            upper.push(f.iter().map(|&g| host_groups[g].members.len() as f64).sum());
        }
        let family_vars = 0..objective.len();
        let mut count_index = vec![None; host_groups.len()];
        for &g in &usable {
            count_index[g] = Some(objective.len());
            objective.push(0.0);
            upper.push(host_groups[g].members.len() as f64);
        }
        let count_vars = family_vars.end..objective.len();
        let mut m_index = Vec::new();
        for g in &host_groups {
            let open = p.open_cost(g.members[0]);
            let mut idx = Vec::new();
            for _ in &g.patterns {
                idx.push(objective.len());
                objective.push(open);
                upper.push(g.members.len() as f64);
            }
            m_index.push(idx);
        }
        let pattern_vars = count_vars.end..objective.len();
        let mut x_index = Vec::new();
        for v in &vm_groups {
            let j = v.members[0];
            let mut idx = Vec::new();
            for g in &host_groups {
                let i = g.members[0];
                if p.fits(j, i) && !g.patterns.is_empty() {
                    idx.push(Some(objective.len()));
                    objective.push(p.load_cost(j, i));
                    upper.push(v.members.len() as f64);
                } else {
                    idx.push(None);
                }
            }
            x_index.push(idx);
        }

        let mut lp = LinearProgram::new(objective);
        lp.upper = upper;
        for (f, members) in families.iter().enumerate() {
            let mut row: Vec<(usize, f64)> = members
                .iter()
                .map(|&g| (count_index[g].expect("usable group"), 1.0))
                .collect();
            row.push((family_index[f], -1.0));
            lp.add_row(row, Sense::Eq, 0.0);
        }
        for (g, hg) in host_groups.iter().enumerate() {
            if let Some(c) = count_index[g] {
                let mut row: Vec<(usize, f64)> = m_index[g].iter().map(|&k| (k, 1.0)).collect();
                row.push((c, -1.0));
                lp.add_row(row, Sense::Eq, 0.0);
            }
            for t in 0..kinds {
                let mut row: Vec<(usize, f64)> = Vec::new();
                for (v, vg) in vm_groups.iter().enumerate() {
                    if vg.kind == t {
                        if let Some(k) = x_index[v][g] {
                            row.push((k, 1.0));
                        }
                    }
                }
                if row.is_empty() {
                    continue;
                }
                for (pi, pat) in hg.patterns.iter().enumerate() {
                    if pat[t] > 0 {
                        row.push((m_index[g][pi], -(pat[t] as f64)));
                    }
                }
                lp.add_row(row, Sense::Le, 0.0);
            }
        }
        for (v, vg) in vm_groups.iter().enumerate() {
            let row = x_index[v].iter().flatten().map(|&k| (k, 1.0)).collect();
            lp.add_row(row, Sense::Eq, vg.members.len() as f64);
        }

        let size = |j: usize| {
            (0..nh)
                .filter(|&i| p.fits(j, i))
                .map(|i| p.cpu_share(j, i))
                .fold(0.0, f64::max)
        };
        let mut vm_order: Vec<usize> = (0..nv).collect();
        vm_order.sort_by(|&a, &b| size(b).total_cmp(&size(a)).then(a.cmp(&b)));

        Model {
            vm_groups,
            host_groups,
            kinds,
            kind_of,
            tiers: vec![family_vars, count_vars, pattern_vars],
            m_index,
            x_index,
            vm_order,
            lp,
        }
    }

    /// Turns integral multiplicities back into a per-VM assignment.
    fn expand(&self, values: &[f64]) -> Vec<usize> {
        let round = |k: usize| values[k].round().max(0.0) as u32;
        let mut assignment = vec![usize::MAX; self.kind_of.len()];
        for (g, hg) in self.host_groups.iter().enumerate() {
            let mut slots = self.slots(g, values, f64::round);
            for (v, vg) in self.vm_groups.iter().enumerate() {
                let Some(k) = self.x_index[v][g] else { continue };
                let mut need = round(k);
                for &j in &vg.members {
                    if need == 0 {
                        break;
                    }
                    if assignment[j] != usize::MAX {
                        continue;
                    }
                    if let Some(slot) = slots.iter_mut().find(|s| s.1[vg.kind] > 0) {
                        slot.1[vg.kind] -= 1;
                        assignment[j] = slot.0;
                        need -= 1;
                    }
                }
            }
            debug_assert!(hg.members.len() >= slots.len());
        }
        assignment
    }

    /// Hosts of group `g` with the free pattern slots `to_int(m_gp)` assigns
    /// them, filled in member order.
    fn slots(&self, g: usize, values: &[f64], to_int: fn(f64) -> f64) -> Vec<(usize, Vec<u32>)> {
        let hg = &self.host_groups[g];
        let mut slots = Vec::new();
        let mut hosts = hg.members.iter();
        for (pi, pat) in hg.patterns.iter().enumerate() {
            let k = to_int(values[self.m_index[g][pi]] + INTEGRALITY_EPS).max(0.0) as usize;
            for _ in 0..k {
                if let Some(&i) = hosts.next() {
                    slots.push((i, pat.clone()));
                }
            }
        }
        slots
    }

    /// Rounds the pattern counts of a relaxation down, fills those hosts by
    /// cheapest load, and places the rest greedily. `None` when the greedy
    /// completion gets stuck.
    fn round_down(&self, p: &PlacementProblem, values: &[f64]) -> Option<Vec<usize>> {
        let nh = p.hosts.len();
        let mut slots: Vec<(usize, Vec<u32>)> = (0..self.host_groups.len())
            .flat_map(|g| self.slots(g, values, f64::floor))
            .collect();
        let mut open = vec![false; nh];
        for s in &slots {
            open[s.0] = true;
        }
        let mut cpu = vec![0.0; nh];
        let mut ram = vec![0.0; nh];
        let mut assignment = vec![usize::MAX; self.kind_of.len()];
        let place = |j: usize, i: usize, a: &mut Vec<usize>, cpu: &mut Vec<f64>, ram: &mut Vec<f64>| {
            cpu[i] += p.cpu_share(j, i);
            ram[i] += p.ram_share(j, i);
            a[j] = i;
        };
        for &j in &self.vm_order {
            let t = self.kind_of[j];
            let best = slots
                .iter_mut()
                .filter(|s| s.1[t] > 0)
                .min_by(|a, b| p.load_cost(j, a.0).total_cmp(&p.load_cost(j, b.0)));
            if let Some(s) = best {
                s.1[t] -= 1;
                let i = s.0;
                place(j, i, &mut assignment, &mut cpu, &mut ram);
            }
        }
        let limit = 1.0 + SHARE_TOLERANCE;
        for &j in &self.vm_order {
            if assignment[j] != usize::MAX {
                continue;
            }
            let mut best: Option<(f64, usize)> = None;
            for i in 0..nh {
                if cpu[i] + p.cpu_share(j, i) > limit || ram[i] + p.ram_share(j, i) > limit {
                    continue;
                }
                let extra = if open[i] { 0.0 } else { p.open_cost(i) };
                let c = extra + p.load_cost(j, i);
                if best.is_none_or(|(bc, _)| c < bc) {
                    best = Some((c, i));
                }
            }
            let (_, i) = best?;
            open[i] = true;
            place(j, i, &mut assignment, &mut cpu, &mut ram);
        }
        Some(assignment)
    }
}

struct Node {
    bound: f64,
    /// `bound` rounded to a fixed grid so near-equal bounds compare equal.
    key: i64,
    id: u64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

fn bound_key(bound: f64) -> i64 {
    if bound.is_finite() {
        (bound / BOUND_GRID).round() as i64
    } else {
        i64::MIN
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smallest bound first, then newest node (dive)
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.cmp(&self.key).then(self.id.cmp(&other.id))
    }
}

/// Fractional variable to branch on: earliest tier first, fractional part
/// closest to 0.5 within a tier, lowest index on ties.
fn branch_variable(x: &[f64], tiers: &[Range<usize>]) -> Option<usize> {
    let pick = |range: Range<usize>| {
        let mut best: Option<(usize, f64)> = None;
        for k in range {
            let f = x[k] - x[k].floor();
            if f <= INTEGRALITY_EPS || f >= 1.0 - INTEGRALITY_EPS {
                continue;
            }
            let d = (f - 0.5).abs();
            if best.is_none_or(|(_, bd)| d < bd - 1e-12) {
                best = Some((k, d));
            }
        }
        best.map(|b| b.0)
    };
    tiers.iter().find_map(|r| pick(r.clone()))
}

/// Exact solver over pattern multiplicities; see the module docs.
pub fn solve_symmetric(problem: &PlacementProblem, time_limit: Option<Duration>) -> Result<SolveReport> {
    let start = Instant::now();
    if let Some(j) = problem.unplaceable_vm() {
        return Err(Error::InfeasiblePlacement {
            vm: problem.vms[j].id,
        });
    }
    let deadline = time_limit.map(|d| start + d);
    let baseline: f64 = (0..problem.hosts.len()).map(|i| problem.empty_cost(i)).sum();
    if problem.vms.is_empty() {
        return Ok(SolveReport {
            allocation: Allocation::empty(problem),
            status: SolveStatus::Optimal,
            nodes_explored: 0,
            wall_time: start.elapsed(),
        });
    }

    let model = Model::build(problem);
    debug_assert!(model.kinds > 0);

    let mut best: Option<Allocation> = heuristic_ffd(problem).ok();
    let mut best_cost = best
        .as_ref()
        .map_or(f64::INFINITY, |a| a.energy_cost_rate - baseline);
    let offer = |assignment: Vec<usize>, best: &mut Option<Allocation>, best_cost: &mut f64| {
        if assignment.contains(&usize::MAX) {
            return;
        }
        let a = Allocation::from_assignment(problem, assignment);
        let cost = a.energy_cost_rate - baseline;
        if cost < *best_cost - GAP_TOLERANCE {
            log::trace!("incumbent {cost:.9}");
            *best_cost = cost;
            *best = Some(a);
        }
    };

    let mut heap = BinaryHeap::new();
    let mut next_id = 0u64;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        key: i64::MIN,
        id: next_id,
        lower: model.lp.lower.clone(),
        upper: model.lp.upper.clone(),
    });
    next_id += 1;
    let mut nodes = 0u64;
    let mut timed_out_bound = None;

    while let Some(node) = heap.pop() {
        if node.bound >= best_cost - GAP_TOLERANCE {
            break;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            timed_out_bound = Some(node.bound);
            break;
        }
        nodes += 1;
        let mut lp = model.lp.clone();
        lp.lower = node.lower.clone();
        lp.upper = node.upper.clone();
        let (x, obj) = match lp.solve() {
            LpOutcome::Optimal { x, objective } => (x, objective),
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded | LpOutcome::IterationLimit => {
                return Err(Error::Domain("placement relaxation failed to solve".into()))
            }
        };
        if obj >= best_cost - GAP_TOLERANCE {
            continue;
        }
        match branch_variable(&x, &model.tiers) {
            None => offer(model.expand(&x), &mut best, &mut best_cost),
            Some(k) => {
                if let Some(a) = model.round_down(problem, &x) {
                    offer(a, &mut best, &mut best_cost);
                }
                if obj >= best_cost - GAP_TOLERANCE {
                    continue;
                }
                let mut down_upper = node.upper.clone();
                down_upper[k] = x[k].floor();
                let mut up_lower = node.lower.clone();
                up_lower[k] = x[k].ceil();
                for (lower, upper) in [(node.lower.clone(), down_upper), (up_lower, node.upper.clone())] {
                    heap.push(Node {
                        bound: obj,
                        key: bound_key(obj),
                        id: next_id,
                        lower,
                        upper,
                    });
                    next_id += 1;
                }
            }
        }
    }

    let allocation = match best {
        Some(a) => a,
        None if timed_out_bound.is_some() => {
            return Err(Error::SolverLimit {
                limit: time_limit.unwrap_or_default(),
            })
        }
        None => {
            return Err(Error::InfeasiblePlacement {
                vm: problem.vms[0].id,
            })
        }
    };
    let status = match timed_out_bound {
        Some(b) => SolveStatus::TimeLimited {
            lower_bound: baseline + b.max(0.0),
        },
        None => SolveStatus::Optimal,
    };
    Ok(SolveReport {
        allocation,
        status,
        nodes_explored: nodes,
        wall_time: start.elapsed(),
    })
}

//! Hedonic coalition formation: providers repeatedly move to the coalition
//! that pays them most (their Shapley share inside it), never returning to a
//! coalition they already left, until nobody wants to move.

mod partitions;
mod stability;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coalition::{Coalition, Partition};
use crate::coalitional::{shapley_payoffs, Game};
use crate::domain::ProviderId;
use crate::error::{Error, Result};

pub use partitions::{bell_number, enumerate_partitions, PartitionIter, PARTITION_CAP};
pub use stability::{
    is_individually_stable, is_nash_stable, partition_summary, PartitionSummary, StabilityVerdict,
};

/// Two payoffs closer than this are treated as equal.
pub const PREFERENCE_EPS: f64 = 1e-9;

/// How much provider `i` likes a coalition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Preference {
    /// Already left once, or the coalition's workload cannot be placed.
    Forbidden,
    Payoff(f64),
}

impl Preference {
    /// Strict improvement; `Forbidden` is below every payoff.
    pub fn beats(self, other: Preference) -> bool {
        match (self, other) {
            (Preference::Forbidden, _) => false,
            (Preference::Payoff(_), Preference::Forbidden) => true,
            (Preference::Payoff(a), Preference::Payoff(b)) => a > b + PREFERENCE_EPS,
        }
    }

    /// Weak preference: not strictly worse.
    pub fn at_least(self, other: Preference) -> bool {
        !other.beats(self)
    }

    pub fn payoff(self) -> Option<f64> {
        match self {
            Preference::Forbidden => None,
            Preference::Payoff(x) => Some(x),
        }
    }
}

impl fmt::Display for Preference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preference::Forbidden => f.write_str("forbidden"),
            Preference::Payoff(x) => write!(f, "{x:.4}"),
        }
    }
}

/// Coalitions each provider has left, stored with the provider as a member.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HistorySet {
    left: BTreeMap<ProviderId, BTreeSet<Coalition>>,
}

impl HistorySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, i: ProviderId, coalition: Coalition) {
        debug_assert!(coalition.contains(i));
        self.left.entry(i).or_default().insert(coalition);
    }

    pub fn contains(&self, i: ProviderId, coalition: Coalition) -> bool {
        self.left.get(&i).is_some_and(|s| s.contains(&coalition))
    }

    pub fn of(&self, i: ProviderId) -> impl Iterator<Item = Coalition> + '_ {
        self.left.get(&i).into_iter().flatten().copied()
    }
}

/// Preference of `i` for coalition `s` (which must contain `i`).
pub fn preference<G: Game + ?Sized>(
    game: &G,
    i: ProviderId,
    s: Coalition,
    history: &HistorySet,
) -> Result<Preference> {
    if !s.contains(i) {
        return Err(Error::Domain(format!("provider {i} is not a member of {s}")));
    }
    if history.contains(i, s) {
        return Ok(Preference::Forbidden);
    }
    match shapley_payoffs(game, s) {
        Ok(p) => Ok(Preference::Payoff(p.get(i).expect("member payoff"))),
        Err(Error::InfeasibleCoalition { .. }) => Ok(Preference::Forbidden),
        Err(e) => Err(e),
    }
}

/// The move `i` would make from `partition`, if any: the block it would join
/// (`Coalition::EMPTY` meaning "go alone"). Picks the most preferred strict
/// improvement; ties go to the lexicographically smallest resulting coalition.
pub fn find_shift<G: Game + ?Sized>(
    game: &G,
    i: ProviderId,
    partition: &Partition,
    history: &HistorySet,
) -> Result<Option<Coalition>> {
    let current = partition
        .block_of(i)
        .ok_or_else(|| Error::Domain(format!("provider {i} is not in the partition")))?;
    let here = preference(game, i, current, history)?;
    let mut best: Option<(Coalition, Coalition, Preference)> = None;
    let targets = partition
        .blocks()
        .iter()
        .copied()
        .filter(|&b| b != current)
        .chain((current.len() > 1).then_some(Coalition::EMPTY));
    for target in targets {
        let joined = target.with(i);
        let pref = preference(game, i, joined, history)?;
        if !pref.beats(here) {
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, best_joined, best_pref)) => {
                pref.beats(*best_pref) || (!best_pref.beats(pref) && joined < *best_joined)
            }
        };
        if better {
            best = Some((target, joined, pref));
        }
    }
    Ok(best.map(|b| b.0))
}

/// Moves `i` into `target` (or alone for `Coalition::EMPTY`) and records the
/// coalition it left in `history`.
pub fn apply_shift(
    partition: &Partition,
    i: ProviderId,
    target: Coalition,
    history: &mut HistorySet,
) -> Result<Partition> {
    let from = partition
        .block_of(i)
        .ok_or_else(|| Error::Domain(format!("provider {i} is not in the partition")))?;
    if target.contains(i) {
        return Err(Error::Domain(format!("provider {i} already belongs to {target}")));
    }
    if !target.is_empty() && !partition.contains_block(target) {
        return Err(Error::Domain(format!("{target} is not a block of {partition}")));
    }
    if target.is_empty() && from.len() == 1 {
        return Err(Error::Domain(format!("provider {i} is already alone")));
    }
    let mut blocks: Vec<Coalition> = partition
        .blocks()
        .iter()
        .copied()
        .filter(|&b| b != from && b != target)
        .collect();
    let rest = from.without(i);
    if !rest.is_empty() {
        blocks.push(rest);
    }
    blocks.push(target.with(i));
    history.record(i, from);
    Partition::new(blocks)
}

/// Order in which providers get the chance to move within a round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SchedulePolicy {
    /// `1, 2, ..., n` every round.
    #[default]
    RoundRobin,
    /// A fresh shuffle every round, from a seeded generator.
    RandomOrder { seed: u64 },
    /// The given order every round; must list every provider.
    FixedOrder(Vec<ProviderId>),
}

impl SchedulePolicy {
    fn rounds(&self, n: usize) -> Result<Box<dyn FnMut() -> Vec<ProviderId>>> {
        let all: Vec<ProviderId> = (1..=n as ProviderId).collect();
        match self {
            SchedulePolicy::RoundRobin => Ok(Box::new(move || all.clone())),
            SchedulePolicy::RandomOrder { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(Box::new(move || {
                    let mut order = all.clone();
                    order.shuffle(&mut rng);
                    order
                }))
            }
            SchedulePolicy::FixedOrder(order) => {
                let mut sorted = order.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted != all {
                    return Err(Error::Domain(format!(
                        "fixed order {order:?} must list providers 1..={n}"
                    )));
                }
                let order = order.clone();
                Ok(Box::new(move || order.clone()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftStep {
    pub provider: ProviderId,
    pub from: Coalition,
    /// The coalition the provider ends up in.
    pub to: Coalition,
    /// `None` when the provider's old coalition had become forbidden to it.
    pub payoff_before: Option<f64>,
    pub payoff_after: f64,
    pub partition_after: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationTrace {
    pub initial: Partition,
    pub policy: SchedulePolicy,
    pub steps: Vec<ShiftStep>,
    pub final_partition: Partition,
    /// Rounds run, including the final quiet one.
    pub rounds: usize,
    pub activations: usize,
}

/// Round budget for `n` providers: ten times the number of partitions.
pub fn default_max_rounds(n: usize) -> usize {
    (10 * bell_number(n.min(PARTITION_CAP)))
        .try_into()
        .unwrap_or(usize::MAX)
}

/// Runs the formation process until a full round passes without a shift.
pub fn run_formation<G: Game + ?Sized>(
    game: &G,
    initial: Partition,
    policy: &SchedulePolicy,
    max_rounds: usize,
) -> Result<FormationTrace> {
    let n = game.players();
    if !initial.covers(n) {
        return Err(Error::Domain(format!(
            "initial partition {initial} does not cover providers 1..={n}"
        )));
    }
    let mut next_round = policy.rounds(n)?;
    let mut history = HistorySet::new();
    let mut partition = initial.clone();
    let mut steps = Vec::new();
    let mut activations = 0;
    let mut rounds = 0;
    loop {
        if rounds >= max_rounds {
            return Err(Error::ConvergenceFailure { rounds });
        }
        rounds += 1;
        let mut moved = false;
        for i in next_round() {
            activations += 1;
            let Some(target) = find_shift(game, i, &partition, &history)? else {
                continue;
            };
            let from = partition.block_of(i).expect("member");
            let before = preference(game, i, from, &history)?;
            let to = target.with(i);
            let after = preference(game, i, to, &history)?;
            partition = apply_shift(&partition, i, target, &mut history)?;
            log::debug!("provider {i}: {from} -> {to}, now {partition}");
            steps.push(ShiftStep {
                provider: i,
                from,
                to,
                payoff_before: before.payoff(),
                payoff_after: after.payoff().expect("a shift ends in an allowed coalition"),
                partition_after: partition.clone(),
            });
            moved = true;
        }
        if !moved {
            break;
        }
    }
    Ok(FormationTrace {
        initial,
        policy: policy.clone(),
        steps,
        final_partition: partition,
        rounds,
        activations,
    })
}

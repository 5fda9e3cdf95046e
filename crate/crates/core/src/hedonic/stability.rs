use serde::Serialize;

use super::{preference, HistorySet};
use crate::coalition::{Coalition, Partition};
use crate::coalitional::{shapley_payoffs, Game, PayoffVector};
use crate::domain::ProviderId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    /// A provider and the block it would profitably join (`{}` = alone).
    pub witness: Option<(ProviderId, Coalition)>,
}

impl StabilityVerdict {
    fn stable() -> Self {
        StabilityVerdict {
            stable: true,
            witness: None,
        }
    }

    fn broken(i: ProviderId, target: Coalition) -> Self {
        StabilityVerdict {
            stable: false,
            witness: Some((i, target)),
        }
    }
}

/// Unilateral moves of every provider: (provider, its block, target block).
fn moves(partition: &Partition) -> impl Iterator<Item = (ProviderId, Coalition, Coalition)> + '_ {
    partition.blocks().iter().flat_map(move |&own| {
        own.members().flat_map(move |i| {
            partition
                .blocks()
                .iter()
                .copied()
                .filter(move |&b| b != own)
                .chain((own.len() > 1).then_some(Coalition::EMPTY))
                .map(move |t| (i, own, t))
        })
    })
}

/// No provider strictly gains by moving to another block or going alone.
pub fn is_nash_stable<G: Game + ?Sized>(game: &G, partition: &Partition) -> Result<StabilityVerdict> {
    let h = HistorySet::new();
    for (i, own, target) in moves(partition) {
        if preference(game, i, target.with(i), &h)?.beats(preference(game, i, own, &h)?) {
            return Ok(StabilityVerdict::broken(i, target));
        }
    }
    Ok(StabilityVerdict::stable())
}

/// No provider strictly gains by a move that leaves every member of the
/// receiving block at least as well off.
pub fn is_individually_stable<G: Game + ?Sized>(game: &G, partition: &Partition) -> Result<StabilityVerdict> {
    let h = HistorySet::new();
    for (i, own, target) in moves(partition) {
        let joined = target.with(i);
        if !preference(game, i, joined, &h)?.beats(preference(game, i, own, &h)?) {
            continue;
        }
        let mut welcome = true;
        for j in target.members() {
            if !preference(game, j, joined, &h)?.at_least(preference(game, j, target, &h)?) {
                welcome = false;
                break;
            }
        }
        if welcome {
            return Ok(StabilityVerdict::broken(i, target));
        }
    }
    Ok(StabilityVerdict::stable())
}

/// One row of the all-partitions table.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionSummary {
    pub partition: Partition,
    /// Per block; `None` when the block cannot place its workload.
    pub values: Vec<Option<f64>>,
    pub total: Option<f64>,
    pub payoffs: Vec<Option<PayoffVector>>,
    pub nash_stable: StabilityVerdict,
    pub individually_stable: StabilityVerdict,
}

pub fn partition_summary<G: Game + ?Sized>(game: &G, partition: &Partition) -> Result<PartitionSummary> {
    let mut values = Vec::new();
    let mut payoffs = Vec::new();
    for &b in partition.blocks() {
        match game.value(b) {
            Ok(v) => values.push(Some(v)),
            Err(Error::InfeasibleCoalition { .. }) => values.push(None),
            Err(e) => return Err(e),
        }
        match shapley_payoffs(game, b) {
            Ok(p) => payoffs.push(Some(p)),
            Err(Error::InfeasibleCoalition { .. }) => payoffs.push(None),
            Err(e) => return Err(e),
        }
    }
    let total = values.iter().copied().sum::<Option<f64>>();
    Ok(PartitionSummary {
        partition: partition.clone(),
        values,
        total,
        payoffs,
        nash_stable: is_nash_stable(game, partition)?,
        individually_stable: is_individually_stable(game, partition)?,
    })
}

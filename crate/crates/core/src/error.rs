use std::time::Duration;

use crate::coalition::Coalition;
use crate::domain::{HostId, ProviderId, VmId};
use crate::placement::Constraint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("VM class {vm_class} does not fit host class {host_class}: {resource} share {share} > 1")]
    InfeasibleClass {
        vm_class: u32,
        host_class: u32,
        resource: &'static str,
        share: f64,
    },

    #[error("invalid scenario:\n{0}")]
    InvalidScenario(String),

    #[error("coalition must not be empty")]
    EmptyCoalition,

    #[error("no feasible placement: VM {vm} cannot be placed")]
    InfeasiblePlacement { vm: VmId },

    #[error("coalition {coalition} is infeasible: its workload exceeds its joint capacity")]
    InfeasibleCoalition { coalition: Coalition },

    #[error("allocation violates constraint: {constraint} (host {host:?}, VM {vm:?})")]
    ConstraintViolation {
        constraint: Constraint,
        host: Option<HostId>,
        vm: Option<VmId>,
    },

    #[error("{what} size {size} exceeds cap {cap}")]
    SizeCap {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("solver hit its time limit of {limit:?} without any feasible allocation")]
    SolverLimit { limit: Duration },

    #[error("coalition formation did not converge within {rounds} rounds")]
    ConvergenceFailure { rounds: usize },

    #[error("unbalanced weights: player {player} has total weight {total}")]
    Unbalanced { player: ProviderId, total: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

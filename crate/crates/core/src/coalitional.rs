//! Coalition values and their division by the Shapley value restricted to the
//! coalition (Aumann-Drèze).

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::coalition::Coalition;
use crate::domain::{ProviderId, Scenario};
use crate::error::{Error, Result};
use crate::placement::{build_problem, solve, PlacementProblem, SolveReport, SolverConfig};

/// Default largest coalition for exact Shapley enumeration.
pub const SHAPLEY_CAP: usize = 12;

/// A TU game over players `1..=players()` with `v(∅) = 0`.
pub trait Game: Sync {
    fn players(&self) -> usize;
    fn value(&self, coalition: Coalition) -> Result<f64>;

    fn grand(&self) -> Coalition {
        Coalition::grand(self.players())
    }
}

/// Game given by an explicit value table.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularGame {
    n: usize,
    values: HashMap<Coalition, f64>,
}

impl TabularGame {
    /// Every nonempty subset of `{1..n}` must have a value.
    pub fn new(n: usize, values: HashMap<Coalition, f64>) -> Result<Self> {
        if let Some(s) = Coalition::grand(n)
            .nonempty_subsets()
            .find(|s| !values.contains_key(s))
        {
            return Err(Error::Domain(format!("missing value for coalition {s}")));
        }
        Ok(TabularGame { n, values })
    }

    /// Values listed in the order of `Coalition::grand(n).nonempty_subsets()`.
    pub fn from_fn(n: usize, f: impl Fn(Coalition) -> f64) -> Self {
        let values = Coalition::grand(n)
            .nonempty_subsets()
            .map(|s| (s, f(s)))
            .collect();
        TabularGame { n, values }
    }

    pub fn values(&self) -> &HashMap<Coalition, f64> {
        &self.values
    }
}

impl Game for TabularGame {
    fn players(&self) -> usize {
        self.n
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        if coalition.is_empty() {
            return Ok(0.0);
        }
        self.values
            .get(&coalition)
            .copied()
            .ok_or_else(|| Error::Domain(format!("no value for coalition {coalition}")))
    }
}

/// Solved placement of one coalition.
#[derive(Debug, Clone, Serialize)]
pub struct CoalitionEntry {
    pub coalition: Coalition,
    pub revenue: f64,
    pub energy_cost: f64,
    pub value: f64,
    pub report: SolveReport,
}

/// Lazily solved, memoised characteristic function of a scenario.
pub struct CharacteristicTable {
    scenario: Arc<Scenario>,
    config: SolverConfig,
    /// `None` marks a coalition whose joint workload cannot be placed.
    memo: RwLock<HashMap<Coalition, Option<Arc<CoalitionEntry>>>>,
}

impl CharacteristicTable {
    pub fn new(scenario: Scenario) -> Self {
        Self::with_config(scenario, SolverConfig::default())
    }

    pub fn with_config(scenario: Scenario, config: SolverConfig) -> Self {
        CharacteristicTable {
            scenario: Arc::new(scenario),
            config,
            memo: RwLock::new(HashMap::new()),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn problem(&self, coalition: Coalition) -> Result<PlacementProblem> {
        build_problem(&self.scenario, coalition)
    }

    pub fn entry(&self, coalition: Coalition) -> Result<Arc<CoalitionEntry>> {
        if coalition.is_empty() {
            return Err(Error::EmptyCoalition);
        }
        if let Some(hit) = self.memo.read().expect("memo lock").get(&coalition) {
            return hit.clone().ok_or(Error::InfeasibleCoalition { coalition });
        }
        let problem = build_problem(&self.scenario, coalition)?;
        let solved = match solve(&problem, &self.config) {
            Ok(report) => {
                let revenue = problem.revenue_rate();
                let energy_cost = report.objective();
                Some(Arc::new(CoalitionEntry {
                    coalition,
                    revenue,
                    energy_cost,
                    value: revenue - energy_cost,
                    report,
                }))
            }
            Err(Error::InfeasiblePlacement { .. }) => None,
            Err(e) => return Err(e),
        };
        let mut memo = self.memo.write().expect("memo lock");
        let stored = memo.entry(coalition).or_insert(solved).clone();
        stored.ok_or(Error::InfeasibleCoalition { coalition })
    }

    /// Solves every nonempty coalition, in parallel.
    pub fn warm_all(&self) -> Result<()> {
        let all: Vec<Coalition> = self.grand().nonempty_subsets().collect();
        all.par_iter().try_for_each(|&s| match self.entry(s) {
            Ok(_) | Err(Error::InfeasibleCoalition { .. }) => Ok(()),
            Err(e) => Err(e),
        })
    }

    pub fn clear(&self) {
        self.memo.write().expect("memo lock").clear();
    }

    pub fn cached(&self) -> usize {
        self.memo.read().expect("memo lock").len()
    }

    /// True when every solve so far was proven optimal.
    pub fn all_optimal(&self) -> bool {
        self.memo
            .read()
            .expect("memo lock")
            .values()
            .flatten()
            .all(|e| e.report.is_optimal())
    }

    /// Snapshot of all feasible values computed so far.
    pub fn to_tabular(&self) -> Result<TabularGame> {
        self.warm_all()?;
        let n = self.players();
        let mut values = HashMap::new();
        for s in Coalition::grand(n).nonempty_subsets() {
            values.insert(s, self.value(s)?);
        }
        TabularGame::new(n, values)
    }
}

impl Game for CharacteristicTable {
    fn players(&self) -> usize {
        self.scenario.provider_count()
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        if coalition.is_empty() {
            return Ok(0.0);
        }
        Ok(self.entry(coalition)?.value)
    }
}

pub fn coalition_value<G: Game + ?Sized>(game: &G, coalition: Coalition) -> Result<f64> {
    game.value(coalition)
}

/// Payoff of every member of one coalition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffVector {
    pub coalition: Coalition,
    pub payoffs: BTreeMap<ProviderId, f64>,
}

impl PayoffVector {
    pub fn get(&self, i: ProviderId) -> Option<f64> {
        self.payoffs.get(&i).copied()
    }

    pub fn total(&self) -> f64 {
        self.payoffs.values().sum()
    }

    pub fn values(&self) -> Vec<f64> {
        self.payoffs.values().copied().collect()
    }
}

/// `v(S ∪ {i}) − v(S)`.
pub fn marginal_contribution<G: Game + ?Sized>(game: &G, s: Coalition, i: ProviderId) -> Result<f64> {
    if s.contains(i) {
        return Err(Error::Domain(format!("provider {i} already belongs to {s}")));
    }
    Ok(game.value(s.with(i))? - game.value(s)?)
}

pub fn shapley_payoffs<G: Game + ?Sized>(game: &G, s: Coalition) -> Result<PayoffVector> {
    shapley_payoffs_capped(game, s, SHAPLEY_CAP)
}

/// Shapley value of the subgame on `s`, by enumerating all subsets.
pub fn shapley_payoffs_capped<G: Game + ?Sized>(game: &G, s: Coalition, cap: usize) -> Result<PayoffVector> {
    let k = s.len();
    if k == 0 {
        return Err(Error::EmptyCoalition);
    }
    if k > cap {
        return Err(Error::SizeCap {
            what: "Shapley coalition",
            size: k,
            cap,
        });
    }
    let mut values: HashMap<Coalition, f64> = HashMap::with_capacity(1 << k);
    for t in s.subsets() {
        values.insert(t, game.value(t)?);
    }
    // weight[t] = t! (k - t - 1)! / k!
    let mut weight = vec![0.0; k];
    for (t, w) in weight.iter_mut().enumerate() {
        let mut x = 1.0 / k as f64;
        // 1/k * 1/C(k-1, t)
        let mut binom = 1.0;
        for r in 0..t {
            binom = binom * (k - 1 - r) as f64 / (r + 1) as f64;
        }
        x /= binom;
        *w = x;
    }
    let mut payoffs = BTreeMap::new();
    for i in s.members() {
        let rest = s.without(i);
        let mut phi = 0.0;
        for t in rest.subsets() {
            phi += weight[t.len()] * (values[&t.with(i)] - values[&t]);
        }
        payoffs.insert(i, phi);
    }
    Ok(PayoffVector {
        coalition: s,
        payoffs,
    })
}

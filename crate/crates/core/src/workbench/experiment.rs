//! Single runs against the no-federation baseline, batches of generated runs,
//! and their CSV form.

use std::io::{Read, Write};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use super::generator::{generate_scenario, GeneratorConfig};
use crate::coalition::{Coalition, Partition};
use crate::coalitional::{shapley_payoffs, CharacteristicTable, Game};
use crate::domain::{ProviderId, Scenario};
use crate::error::{Error, Result};
use crate::hedonic::{default_max_rounds, run_formation, SchedulePolicy};
use crate::placement::SolverConfig;

/// Outcome of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run_index: u64,
    pub seed: u64,
    pub n_shifts: usize,
    pub partition: Partition,
    /// Total draw of powered hosts when every provider works alone (kW).
    pub energy_nofed_kw: f64,
    /// Total draw of powered hosts under the final partition (kW).
    pub energy_fed_kw: f64,
    pub profit_nofed: f64,
    pub profit_fed: f64,
    /// Federated payoff per provider, in provider order.
    pub payoffs: Vec<f64>,
    /// Standalone value per provider, in provider order.
    pub standalone: Vec<f64>,
    /// Whether every placement behind the record was solved to optimality.
    pub optimal: bool,
    /// Not written to CSV; zero after parsing.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunRecord {
    pub fn energy_reduction_pct(&self) -> f64 {
        pct(self.energy_nofed_kw - self.energy_fed_kw, self.energy_nofed_kw)
    }

    pub fn profit_increase_pct(&self) -> f64 {
        pct(self.profit_fed - self.profit_nofed, self.profit_nofed)
    }
}

fn pct(delta: f64, base: f64) -> f64 {
    if base.abs() <= f64::EPSILON {
        0.0
    } else {
        100.0 * delta / base.abs()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub policy: SchedulePolicy,
    pub solver: SolverConfig,
    /// Defaults to ten times the number of partitions.
    pub max_rounds: Option<usize>,
}

fn coalition_power_kw(table: &CharacteristicTable, s: Coalition) -> Result<f64> {
    let entry = table.entry(s)?;
    let problem = table.problem(s)?;
    Ok(entry.report.allocation.power_w(&problem) / 1000.0)
}

/// Forms coalitions from singletons and compares against every provider
/// working alone.
pub fn evaluate_run(
    scenario: Scenario,
    run_index: u64,
    seed: u64,
    options: &RunOptions,
) -> Result<RunRecord> {
    let start = Instant::now();
    let n = scenario.provider_count();
    let table = CharacteristicTable::with_config(scenario, options.solver);
    let max_rounds = options.max_rounds.unwrap_or_else(|| default_max_rounds(n));
    let trace = run_formation(&table, Partition::singletons(n), &options.policy, max_rounds)?;

    let mut standalone = Vec::with_capacity(n);
    let mut energy_nofed_kw = 0.0;
    for i in 1..=n as ProviderId {
        let s = Coalition::singleton(i);
        standalone.push(table.value(s)?);
        energy_nofed_kw += coalition_power_kw(&table, s)?;
    }
    let mut payoffs = vec![0.0; n];
    let mut energy_fed_kw = 0.0;
    let mut profit_fed = 0.0;
    for &b in trace.final_partition.blocks() {
        profit_fed += table.value(b)?;
        energy_fed_kw += coalition_power_kw(&table, b)?;
        for (i, phi) in shapley_payoffs(&table, b)?.payoffs {
            payoffs[i as usize - 1] = phi;
        }
    }
    Ok(RunRecord {
        run_index,
        seed,
        n_shifts: trace.steps.len(),
        partition: trace.final_partition,
        energy_nofed_kw,
        energy_fed_kw,
        profit_nofed: standalone.iter().sum(),
        profit_fed,
        payoffs,
        standalone,
        optimal: table.all_optimal(),
        wall_time: start.elapsed(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl Stats {
    fn of(xs: impl Iterator<Item = f64>) -> Option<Stats> {
        let mut n = 0usize;
        let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for x in xs {
            n += 1;
            min = min.min(x);
            max = max.max(x);
            sum += x;
        }
        (n > 0).then(|| Stats {
            min,
            max,
            mean: sum / n as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub run_index: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub runs: usize,
    pub completed: usize,
    pub failures: Vec<RunFailure>,
    pub energy_reduction_pct: Option<Stats>,
    pub profit_increase_pct: Option<Stats>,
    /// Mean payoff increase over standalone value, per provider; `None` for
    /// a provider whose standalone value was never positive.
    pub provider_profit_increase_pct: Vec<Option<f64>>,
}

impl BatchSummary {
    pub fn of(runs: usize, records: &[RunRecord], failures: Vec<RunFailure>) -> Self {
        let n = records.iter().map(|r| r.payoffs.len()).max().unwrap_or(0);
        let provider_profit_increase_pct = (0..n)
            .map(|i| {
                Stats::of(
                    records
                        .iter()
                        .filter(|r| r.standalone.get(i).is_some_and(|&v| v > 0.0))
                        .map(|r| pct(r.payoffs[i] - r.standalone[i], r.standalone[i])),
                )
                .map(|s| s.mean)
            })
            .collect();
        BatchSummary {
            runs,
            completed: records.len(),
            failures,
            energy_reduction_pct: Stats::of(records.iter().map(RunRecord::energy_reduction_pct)),
            profit_increase_pct: Stats::of(records.iter().map(RunRecord::profit_increase_pct)),
            provider_profit_increase_pct,
        }
    }
}

impl std::fmt::Display for BatchSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "runs: {} completed, {} failed",
            self.completed,
            self.failures.len()
        )?;
        for (label, s) in [
            ("energy reduction", self.energy_reduction_pct),
            ("profit increase", self.profit_increase_pct),
        ] {
            if let Some(s) = s {
                writeln!(
                    f,
                    "{label} %: min {:.2}  mean {:.2}  max {:.2}",
                    s.min, s.mean, s.max
                )?;
            }
        }
        for (i, p) in self.provider_profit_increase_pct.iter().enumerate() {
            match p {
                Some(p) => writeln!(f, "provider {} mean profit increase %: {p:.2}", i + 1)?,
                None => writeln!(f, "provider {} mean profit increase %: n/a", i + 1)?,
            }
        }
        for e in &self.failures {
            writeln!(f, "run {} failed: {}", e.run_index, e.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BatchOutput {
    /// Completed runs in run-index order.
    pub records: Vec<RunRecord>,
    pub summary: BatchSummary,
}

/// Generates and evaluates runs `0..runs` on `workers` threads (0 = rayon's
/// default). A failing run is reported in the summary and the batch goes on.
pub fn run_batch(
    config: &GeneratorConfig,
    runs: u64,
    workers: usize,
    options: &RunOptions,
) -> Result<BatchOutput> {
    if runs == 0 {
        return Err(Error::Domain("a batch needs at least one run".into()));
    }
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<(u64, Result<RunRecord>)> = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|k| {
                let r = generate_scenario(config, k).and_then(|s| evaluate_run(s, k, config.seed, options));
                if let Err(e) = &r {
                    log::warn!("run {k} failed: {e}");
                }
                (k, r)
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (k, r) in outcomes {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(RunFailure {
                run_index: k,
                message: e.to_string(),
            }),
        }
    }
    let summary = BatchSummary::of(runs as usize, &records, failures);
    Ok(BatchOutput { records, summary })
}

const FIXED_COLUMNS: [&str; 8] = [
    "run_index",
    "seed",
    "n_shifts",
    "partition",
    "energy_nofed_kw",
    "energy_fed_kw",
    "profit_nofed",
    "profit_fed",
];

/// Writes the fixed columns, then `payoff_i` and `standalone_i` for every
/// provider, then `optimal`. Floats use the shortest exact representation.
pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let n = records.iter().map(|r| r.payoffs.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=n).map(|i| format!("payoff_{i}")));
    header.extend((1..=n).map(|i| format!("standalone_{i}")));
    header.push("optimal".into());
    w.write_record(&header)?;
    for r in records {
        if r.payoffs.len() != n || r.standalone.len() != n {
            return Err(Error::Domain(format!(
                "run {} has {} providers, expected {n}",
                r.run_index,
                r.payoffs.len()
            )));
        }
        let mut row = vec![
            r.run_index.to_string(),
            r.seed.to_string(),
            r.n_shifts.to_string(),
            r.partition.to_string(),
            r.energy_nofed_kw.to_string(),
            r.energy_fed_kw.to_string(),
            r.profit_nofed.to_string(),
            r.profit_fed.to_string(),
        ];
        row.extend(r.payoffs.iter().map(f64::to_string));
        row.extend(r.standalone.iter().map(f64::to_string));
        row.push(r.optimal.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    let width = header.len();
    if width < FIXED_COLUMNS.len() + 1 || !(width - FIXED_COLUMNS.len() - 1).is_multiple_of(2) {
        return Err(Error::Parse(format!(
            "unexpected CSV header with {width} columns"
        )));
    }
    for (k, name) in FIXED_COLUMNS.iter().enumerate() {
        if &header[k] != *name {
            return Err(Error::Parse(format!(
                "column {k} is {:?}, expected {name:?}",
                &header[k]
            )));
        }
    }
    let n = (width - FIXED_COLUMNS.len() - 1) / 2;
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let field = |k: usize| &row[k];
        let num = |k: usize| -> Result<f64> {
            field(k)
                .parse()
                .map_err(|_| Error::Parse(format!("column {}: not a number: {:?}", &header[k], field(k))))
        };
        let int = |k: usize| -> Result<u64> {
            field(k)
                .parse()
                .map_err(|_| Error::Parse(format!("column {}: not an integer: {:?}", &header[k], field(k))))
        };
        let base = FIXED_COLUMNS.len();
        out.push(RunRecord {
            run_index: int(0)?,
            seed: int(1)?,
            n_shifts: int(2)? as usize,
            partition: field(3).parse()?,
            energy_nofed_kw: num(4)?,
            energy_fed_kw: num(5)?,
            profit_nofed: num(6)?,
            profit_fed: num(7)?,
            payoffs: (base..base + n).map(num).collect::<Result<_>>()?,
            standalone: (base + n..base + 2 * n).map(num).collect::<Result<_>>()?,
            optimal: field(width - 1)
                .parse()
                .map_err(|_| Error::Parse(format!("optimal: not a bool: {:?}", field(width - 1))))?,
            wall_time: Duration::ZERO,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workbench::fixtures;

    #[test]
    fn scenario1_run_forms_the_grand_coalition() {
        let r = evaluate_run(fixtures::scenario1(), 0, 0, &RunOptions::default()).unwrap();
        assert_eq!(r.partition, Partition::grand(3));
        assert!(
            (r.energy_reduction_pct() - 28.0).abs() < 0.5,
            "{}",
            r.energy_reduction_pct()
        );
        assert!(r.optimal);
        let sum: f64 = r.payoffs.iter().sum();
        assert!((sum - r.profit_fed).abs() < 1e-9);
    }

    #[test]
    fn empty_workloads_stay_alone_at_zero() {
        let s = fixtures::from_counts(&[[2, 0, 0], [0, 1, 0]], &[[0, 0, 0], [0, 0, 0]]);
        let r = evaluate_run(s, 0, 0, &RunOptions::default()).unwrap();
        assert_eq!(r.partition, Partition::singletons(2));
        assert_eq!((r.energy_nofed_kw, r.energy_fed_kw), (0.0, 0.0));
        assert_eq!((r.profit_nofed, r.profit_fed), (0.0, 0.0));
        assert_eq!(r.n_shifts, 0);
    }

    #[test]
    fn single_run_summary_collapses() {
        let config = GeneratorConfig {
            providers: vec![[6, 0, 0], [0, 6, 0]],
            vm_count_range: [0, 3],
            ..Default::default()
        };
        let out = run_batch(&config, 1, 1, &RunOptions::default()).unwrap();
        assert!(out.summary.failures.is_empty(), "{}", out.summary);
        let e = out.summary.energy_reduction_pct.unwrap();
        assert_eq!(e.min, e.max);
        assert_eq!(e.min, e.mean);
        assert!(run_batch(&config, 0, 1, &RunOptions::default()).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let config = GeneratorConfig {
            providers: vec![[6, 0, 0], [0, 6, 0], [2, 2, 2]],
            vm_count_range: [0, 4],
            seed: 3,
            ..Default::default()
        };
        let out = run_batch(&config, 4, 2, &RunOptions::default()).unwrap();
        assert_eq!(out.records.len(), 4, "{}", out.summary);
        let mut buf = Vec::new();
        write_csv(&out.records, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        let zeroed: Vec<RunRecord> = out
            .records
            .iter()
            .cloned()
            .map(|mut r| {
                r.wall_time = Duration::ZERO;
                r
            })
            .collect();
        assert_eq!(back, zeroed);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "run_index,seed,n_shifts,partition,energy_nofed_kw,energy_fed_kw,profit_nofed,profit_fed,payoff_1"
        ));
    }

    #[test]
    fn bad_csv_is_rejected() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}

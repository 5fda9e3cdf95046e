use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use cloudfed::coalitional::{shapley_payoffs, CharacteristicTable, Game};
use cloudfed::core_analysis::{bondareva_violation, check_core, half_on_pairs, load_values, CoreProblem};
use cloudfed::domain::{load_scenario, validate_scenario, Scenario};
use cloudfed::hedonic::{
    default_max_rounds, enumerate_partitions, partition_summary, run_formation, PartitionSummary,
    SchedulePolicy,
};
use cloudfed::placement::{host_views, SolveStatus, SolverConfig, SolverKind};
use cloudfed::workbench::{self, fixtures, GeneratorConfig, RunOptions, Target};
use cloudfed::{Coalition, Partition};

/// Appends to the output buffer; writing to a `String` cannot fail.
macro_rules! outln {
    ($o:expr) => {
        $o.push('\n')
    };
    ($o:expr, $($t:tt)*) => {{
        let _ = writeln!($o, $($t)*);
    }};
}

macro_rules! out {
    ($o:expr, $($t:tt)*) => {{
        let _ = write!($o, $($t)*);
    }};
}

const EXIT_MISMATCH: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_SOLVER_LIMIT: u8 = 3;

/// Energy-aware cloud federation formation.
#[derive(Parser)]
#[command(name = "cloudfed", version)]
struct Cli {
    /// Machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum-energy placement of one coalition's workload.
    Solve {
        #[command(flatten)]
        source: Source,
        /// Members, e.g. `1,2,3`; defaults to every provider.
        #[arg(long)]
        coalition: Option<String>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Coalition values and Shapley payoffs.
    Value {
        #[command(flatten)]
        source: Source,
        #[arg(long, conflicts_with = "all")]
        coalition: Option<String>,
        /// Every nonempty coalition.
        #[arg(long)]
        all: bool,
        /// Also write the table as CSV.
        #[arg(long, requires = "all")]
        csv: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Runs hedonic coalition formation.
    Form {
        #[command(flatten)]
        source: Source,
        /// `round-robin`, `random`, or an explicit order such as `3,2,4,1`.
        #[arg(long, default_value = "round-robin")]
        order: String,
        /// Seed of the `random` order.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `singletons` or a partition such as `{1,3}{2,4}`.
        #[arg(long, default_value = "singletons")]
        initial: String,
        #[arg(long)]
        max_rounds: Option<usize>,
        /// Write the full shift trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Stability of one partition, or of every partition.
    Stable {
        #[command(flatten)]
        source: Source,
        #[arg(long, conflicts_with = "enumerate", required_unless_present = "enumerate")]
        partition: Option<String>,
        #[arg(long)]
        enumerate: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Decides whether the core of the grand coalition is empty.
    Core {
        #[command(flatten)]
        source: OptionalSource,
        /// Raw characteristic function, one `{1,2} 12.08` line per coalition.
        #[arg(long, conflicts_with_all = ["scenario", "fixture"])]
        values: Option<PathBuf>,
        /// Also evaluate the balancedness condition with weight 1/2 on every
        /// pair (three providers only).
        #[arg(long)]
        half_on_pairs: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Batch of random scenarios, one CSV row per run.
    Batch {
        /// Generator configuration (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        runs: u64,
        /// Overrides the configuration's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value = "round-robin")]
        order: String,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Recomputes a published table and compares every cell.
    Reproduce {
        /// `scenario1`, `scenario2`, `casestudy`, `appendix` or `all`.
        target: String,
    },
}

#[derive(Args)]
struct Source {
    /// Scenario file (TOML or JSON).
    #[arg(long, required_unless_present = "fixture")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: `scenario1`, `scenario2`, `casestudy`, `appendix`.
    #[arg(long, conflicts_with = "scenario")]
    fixture: Option<String>,
}

#[derive(Args)]
struct OptionalSource {
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, conflicts_with = "scenario")]
    fixture: Option<String>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "symmetric")]
    solver: String,
    /// Seconds per placement solve.
    #[arg(long)]
    time_limit: Option<f64>,
}

impl SolverArgs {
    fn config(&self) -> anyhow::Result<SolverConfig> {
        let kind: SolverKind = self.solver.parse()?;
        let time_limit = match self.time_limit {
            Some(s) if !(s.is_finite() && s > 0.0) => bail!("time limit must be positive, got {s}"),
            Some(s) => Some(Duration::from_secs_f64(s)),
            None => None,
        };
        Ok(SolverConfig { kind, time_limit })
    }
}

fn fixture(name: &str) -> anyhow::Result<Scenario> {
    Ok(match name.parse::<Target>()? {
        Target::Scenario1 => fixtures::scenario1(),
        Target::Scenario2 => fixtures::scenario2(),
        Target::CaseStudy => fixtures::case_study(),
        Target::Appendix => fixtures::appendix(),
    })
}

fn load(scenario: Option<&Path>, fixture_name: Option<&str>) -> anyhow::Result<Scenario> {
    let s = match (scenario, fixture_name) {
        (Some(p), _) => load_scenario(p).with_context(|| format!("loading {}", p.display()))?,
        (None, Some(name)) => fixture(name)?,
        (None, None) => bail!("either --scenario or --fixture is required"),
    };
    let report = validate_scenario(&s);
    if !report.is_ok() {
        bail!(cloudfed::Error::InvalidScenario(report.to_string()));
    }
    Ok(s)
}

fn table(source: &Source, solver: &SolverArgs) -> anyhow::Result<CharacteristicTable> {
    let s = load(source.scenario.as_deref(), source.fixture.as_deref())?;
    Ok(CharacteristicTable::with_config(s, solver.config()?))
}

fn coalition_arg(text: Option<&str>, n: usize) -> anyhow::Result<Coalition> {
    let c = match text {
        Some(t) => t.parse::<Coalition>()?,
        None => Coalition::grand(n),
    };
    if c.is_empty() {
        bail!(cloudfed::Error::EmptyCoalition);
    }
    if !c.is_subset(Coalition::grand(n)) {
        bail!("coalition {c} names a provider outside 1..={n}");
    }
    Ok(c)
}

fn policy(order: &str, seed: u64) -> anyhow::Result<SchedulePolicy> {
    Ok(match order {
        "round-robin" => SchedulePolicy::RoundRobin,
        "random" => SchedulePolicy::RandomOrder { seed },
        list => SchedulePolicy::FixedOrder(
            list.split(',')
                .map(|t| t.trim().parse().with_context(|| format!("bad order {list:?}")))
                .collect::<anyhow::Result<_>>()?,
        ),
    })
}

fn print_json(buf: &mut String, value: &impl serde::Serialize) -> anyhow::Result<()> {
    outln!(buf, "{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("infeasible".into(), |v| format!("{v:.4}"))
}

fn solve_cmd(
    buf: &mut String,
    json: bool,
    source: &Source,
    coalition: Option<&str>,
    solver: &SolverArgs,
) -> anyhow::Result<u8> {
    let table = table(source, solver)?;
    let c = coalition_arg(coalition, table.players())?;
    let entry = table.entry(c)?;
    let problem = table.problem(c)?;
    let alloc = &entry.report.allocation;
    let hosts = host_views(&problem, alloc);
    let providers = alloc.per_provider(&problem);
    let exit = match entry.report.status {
        SolveStatus::TimeLimited { .. } => EXIT_SOLVER_LIMIT,
        _ => 0,
    };
    if json {
        print_json(
            buf,
            &json!({
                "coalition": c,
                "status": entry.report.status,
                "objective": entry.energy_cost,
                "revenue": entry.revenue,
                "value": entry.value,
                "breakdown": alloc.breakdown,
                "power_w": alloc.power_w(&problem),
                "nodes_explored": entry.report.nodes_explored,
                "providers": providers,
                "hosts": hosts,
            }),
        )?;
        return Ok(exit);
    }
    let b = &alloc.breakdown;
    outln!(
        buf,
        "coalition {c}: {:?}, {} nodes",
        entry.report.status,
        entry.report.nodes_explored
    );
    outln!(buf, "energy cost  {:.6} /h", entry.energy_cost);
    outln!(buf, "  idle       {:.6}", b.idle_power);
    outln!(buf, "  dynamic    {:.6}", b.dynamic_power);
    outln!(buf, "  switching  {:.6}", b.switch_cost);
    outln!(buf, "  migration  {:.6}", b.migration_cost);
    outln!(buf, "revenue      {:.6} /h", entry.revenue);
    outln!(buf, "value        {:.6} /h", entry.value);
    outln!(
        buf,
        "power        {:.2} W on {} hosts",
        alloc.power_w(&problem),
        alloc.powered_count()
    );
    outln!(buf);
    for u in &providers {
        outln!(
            buf,
            "CP{}: {} hosts on, {:.2} W, {:.4} /h, {} VMs",
            u.provider,
            u.powered_hosts,
            u.power_w,
            u.energy_cost,
            u.hosted_vms
        );
    }
    outln!(buf);
    for h in &hosts {
        let vms: Vec<String> = h.vms.iter().map(u32::to_string).collect();
        outln!(
            buf,
            "host {:>4} CP{} class {} {} util {:.4} vms [{}]",
            h.host,
            h.owner,
            h.class,
            if h.powered { "on " } else { "off" },
            h.utilization,
            vms.join(",")
        );
    }
    Ok(exit)
}

fn value_cmd(
    buf: &mut String,
    json: bool,
    source: &Source,
    coalition: Option<&str>,
    all: bool,
    csv: Option<&Path>,
    solver: &SolverArgs,
) -> anyhow::Result<u8> {
    let table = table(source, solver)?;
    let n = table.players();
    let wanted: Vec<Coalition> = if all {
        table.warm_all()?;
        let mut v: Vec<Coalition> = Coalition::grand(n).nonempty_subsets().collect();
        v.sort_by_key(|c| (c.len(), c.to_vec()));
        v
    } else {
        vec![coalition_arg(coalition, n)?]
    };
    let mut rows = Vec::new();
    for c in wanted {
        match table.value(c) {
            Ok(v) => rows.push((c, Some(v), Some(shapley_payoffs(&table, c)?))),
            Err(cloudfed::Error::InfeasibleCoalition { .. }) => rows.push((c, None, None)),
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(path) = csv {
        let mut w = csv_writer(path)?;
        let mut header = vec!["coalition".to_string(), "value".to_string()];
        header.extend((1..=n).map(|i| format!("payoff_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for (c, v, p) in &rows {
            let mut line = vec![format!("\"{c}\""), v.map_or(String::new(), |v| v.to_string())];
            line.extend((1..=n as u32).map(|i| {
                p.as_ref()
                    .and_then(|p| p.get(i))
                    .map_or(String::new(), |x| x.to_string())
            }));
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
    }
    if json {
        let out: Vec<_> = rows
            .iter()
            .map(|(c, v, p)| json!({"coalition": c, "value": v, "payoffs": p.as_ref().map(|p| &p.payoffs)}))
            .collect();
        print_json(buf, &out)?;
    } else {
        outln!(buf, "{:<14} {:>10}  payoffs", "coalition", "value");
        for (c, v, p) in &rows {
            let phi = p.as_ref().map_or(String::new(), |p| {
                p.payoffs
                    .iter()
                    .map(|(i, x)| format!("CP{i}={x:.4}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            });
            outln!(buf, "{:<14} {:>10}  {phi}", c.to_string(), fmt_opt(*v));
        }
    }
    Ok(0)
}

fn csv_writer(path: &Path) -> anyhow::Result<std::io::BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

#[allow(clippy::too_many_arguments)]
fn form_cmd(
    buf: &mut String,
    json: bool,
    source: &Source,
    order: &str,
    seed: u64,
    initial: &str,
    max_rounds: Option<usize>,
    trace_path: Option<&Path>,
    solver: &SolverArgs,
) -> anyhow::Result<u8> {
    let table = table(source, solver)?;
    let n = table.players();
    let start = if initial == "singletons" {
        Partition::singletons(n)
    } else {
        initial.parse::<Partition>()?
    };
    let policy = policy(order, seed)?;
    let trace = run_formation(
        &table,
        start,
        &policy,
        max_rounds.unwrap_or_else(|| default_max_rounds(n)),
    )?;
    if let Some(path) = trace_path {
        fs::write(path, serde_json::to_string_pretty(&trace)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = partition_summary(&table, &trace.final_partition)?;
    if json {
        print_json(buf, &json!({"trace": trace, "final": summary}))?;
        return Ok(0);
    }
    outln!(buf, "start {}", trace.initial);
    for (k, s) in trace.steps.iter().enumerate() {
        outln!(
            buf,
            "{:>3}. CP{} {} -> {}: {} -> {:.4}, now {}",
            k + 1,
            s.provider,
            s.from,
            s.to,
            fmt_opt(s.payoff_before),
            s.payoff_after,
            s.partition_after
        );
    }
    outln!(
        buf,
        "final {} after {} rounds, {} shifts",
        trace.final_partition,
        trace.rounds,
        trace.steps.len()
    );
    print_summary_line(buf, &summary);
    Ok(0)
}

fn print_summary_line(buf: &mut String, s: &PartitionSummary) {
    let values: Vec<String> = s.values.iter().map(|v| fmt_opt(*v)).collect();
    let payoffs: Vec<String> = s
        .payoffs
        .iter()
        .flatten()
        .flat_map(|p| p.payoffs.iter().map(|(i, x)| format!("CP{i}={x:.4}")))
        .collect();
    outln!(
        buf,
        "{:<18} values [{}] total {} payoffs {} nash {} individual {}",
        s.partition.to_string(),
        values.join(", "),
        fmt_opt(s.total),
        payoffs.join(" "),
        if s.nash_stable.stable { "yes" } else { "no" },
        if s.individually_stable.stable { "yes" } else { "no" },
    );
}

fn stable_cmd(
    buf: &mut String,
    json: bool,
    source: &Source,
    partition: Option<&str>,
    enumerate: bool,
    solver: &SolverArgs,
) -> anyhow::Result<u8> {
    let table = table(source, solver)?;
    let n = table.players();
    let partitions: Vec<Partition> = if enumerate {
        table.warm_all()?;
        enumerate_partitions(n)?.collect()
    } else {
        let p: Partition = partition.expect("clap requires one").parse()?;
        if !p.covers(n) {
            bail!("partition {p} does not cover providers 1..={n}");
        }
        vec![p]
    };
    let summaries = partitions
        .iter()
        .map(|p| partition_summary(&table, p))
        .collect::<cloudfed::Result<Vec<_>>>()?;
    if json {
        print_json(buf, &summaries)?;
        return Ok(0);
    }
    for s in &summaries {
        print_summary_line(buf, s);
        if let Some((i, t)) = s.nash_stable.witness {
            outln!(buf, "{:<18} CP{i} prefers joining {t}", "");
        }
    }
    if enumerate {
        let stable: Vec<String> = summaries
            .iter()
            .filter(|s| s.nash_stable.stable)
            .map(|s| s.partition.to_string())
            .collect();
        outln!(buf, "Nash-stable: {}", stable.join(" "));
    }
    Ok(0)
}

fn core_cmd(
    buf: &mut String,
    json: bool,
    source: &OptionalSource,
    values: Option<&Path>,
    half: bool,
    solver: &SolverArgs,
) -> anyhow::Result<u8> {
    let problem = match values {
        Some(p) => load_values(p).with_context(|| format!("loading {}", p.display()))?,
        None => {
            let s = load(source.scenario.as_deref(), source.fixture.as_deref())?;
            let table = CharacteristicTable::with_config(s, solver.config()?);
            table.warm_all()?;
            CoreProblem::from_game(&table)?
        }
    };
    let result = check_core(&problem)?;
    let bondareva = if half {
        Some(bondareva_violation(&problem, &half_on_pairs())?)
    } else {
        None
    };
    if json {
        print_json(buf, &json!({"core": result, "half_on_pairs": bondareva}))?;
    } else {
        out!(buf, "{result}");
        if let Some(b) = bondareva {
            outln!(buf, "weights 1/2 on pairs: {b}");
        }
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn batch_cmd(
    buf: &mut String,
    json: bool,
    config: Option<&Path>,
    runs: u64,
    seed: Option<u64>,
    out: Option<&Path>,
    workers: usize,
    order: &str,
    solver: &SolverArgs,
) -> anyhow::Result<u8> {
    let mut cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            GeneratorConfig::from_toml(&text)?
        }
        None => GeneratorConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let options = RunOptions {
        policy: policy(order, cfg.seed)?,
        solver: solver.config()?,
        max_rounds: None,
    };
    let output = workbench::run_batch(&cfg, runs, workers.max(1), &options)?;
    if let Some(path) = out {
        let mut w = csv_writer(path)?;
        workbench::write_csv(&output.records, &mut w)?;
        w.flush()?;
    }
    if json {
        print_json(
            buf,
            &json!({"summary": output.summary, "records": output.records}),
        )?;
    } else {
        outln!(buf, "{}", output.summary);
    }
    let limited = !output.summary.failures.is_empty() || output.records.iter().any(|r| !r.optimal);
    Ok(if limited { EXIT_SOLVER_LIMIT } else { 0 })
}

fn reproduce_cmd(buf: &mut String, json: bool, target: &str) -> anyhow::Result<u8> {
    let targets: Vec<Target> = if target == "all" {
        Target::ALL.to_vec()
    } else {
        vec![target.parse()?]
    };
    let reports = targets
        .into_iter()
        .map(workbench::reproduce)
        .collect::<cloudfed::Result<Vec<_>>>()?;
    if json {
        print_json(buf, &reports)?;
    } else {
        for r in &reports {
            outln!(buf, "{r}\n");
        }
    }
    Ok(if reports.iter().all(|r| r.passed()) {
        0
    } else {
        EXIT_MISMATCH
    })
}

fn run(cli: Cli, buf: &mut String) -> anyhow::Result<u8> {
    let json = cli.json;
    match &cli.command {
        Command::Solve {
            source,
            coalition,
            solver,
        } => solve_cmd(buf, json, source, coalition.as_deref(), solver),
        Command::Value {
            source,
            coalition,
            all,
            csv,
            solver,
        } => value_cmd(
            buf,
            json,
            source,
            coalition.as_deref(),
            *all,
            csv.as_deref(),
            solver,
        ),
        Command::Form {
            source,
            order,
            seed,
            initial,
            max_rounds,
            trace,
            solver,
        } => form_cmd(
            buf,
            json,
            source,
            order,
            *seed,
            initial,
            *max_rounds,
            trace.as_deref(),
            solver,
        ),
        Command::Stable {
            source,
            partition,
            enumerate,
            solver,
        } => stable_cmd(buf, json, source, partition.as_deref(), *enumerate, solver),
        Command::Core {
            source,
            values,
            half_on_pairs,
            solver,
        } => core_cmd(buf, json, source, values.as_deref(), *half_on_pairs, solver),
        Command::Batch {
            config,
            runs,
            seed,
            out,
            workers,
            order,
            solver,
        } => batch_cmd(
            buf,
            json,
            config.as_deref(),
            *runs,
            *seed,
            out.as_deref(),
            *workers,
            order,
            solver,
        ),
        Command::Reproduce { target } => reproduce_cmd(buf, json, target),
    }
}

/// Solver and convergence limits get their own exit code; everything else
/// the user can fix by changing the input.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<cloudfed::Error>() {
        Some(cloudfed::Error::SolverLimit { .. } | cloudfed::Error::ConvergenceFailure { .. }) => {
            EXIT_SOLVER_LIMIT
        }
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let mut buf = String::new();
    let code = match run(cli, &mut buf) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    };
    // a closed pipe (`| head`) is not an error
    match std::io::stdout().lock().write_all(buf.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
        _ => ExitCode::from(code),
    }
}

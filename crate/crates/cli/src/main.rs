//! `agvq`: simulate fleets, solve dumped instances, benchmark solvers.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;

use agvq_core::bench::{self, bench_cell, p0_csv, tts_csv};
use agvq_core::control::{round_candidates, run_simulation, Backend, Controller, SimState};
use agvq_core::metrics::{waiting_report, working_rate};
use agvq_core::plant::{lint_scenario, read_scenario, validate_scenario, Scenario, Topology};
use agvq_core::qubo::{build_qubo, PenaltyWeights, QuboInstance};
use agvq_core::routing::{build_route_db, TaskKey};
use agvq_core::solvers::{
    brute_force, ground_state_probability, parallel_trial_sa, simulated_annealing, AnnealSchedule,
    DynamicOffsetParams, BRUTE_FORCE_LIMIT,
};

#[derive(Parser)]
#[command(name = "agvq", version, about = "AGV route planning as a QUBO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replanning simulator and write trace and waiting reports.
    Simulate(SimulateArgs),
    /// Sample a QUBO instance stored in the sparse text format.
    Solve(SolveArgs),
    /// Measure P0 and per-sample time on the contention family.
    Bench(BenchArgs),
    /// Check a scenario and print every violation.
    Validate(ScenarioArg),
    /// Print the shortest path and candidate templates of every task.
    Routes(ScenarioArg),
    /// Write the first planning round of a scenario as a QUBO instance.
    Compile(CompileArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ControllerName {
    #[value(name = "rule_based")]
    RuleBased,
    Qubo,
    /// Exact search with the follower bonus.
    Priority,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverName {
    Brute,
    Sa,
    Ptsa,
    Exact,
}

impl SolverName {
    fn backend(self, sweeps: usize) -> Backend {
        match self {
            SolverName::Brute => Backend::Brute,
            SolverName::Sa => Backend::Sa { sweeps },
            SolverName::Ptsa => Backend::Ptsa { sweeps },
            SolverName::Exact => Backend::Exact,
        }
    }
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario file, or `loop_plant` for the bundled fixture.
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum)]
    controller: ControllerName,
    /// Required with `--controller qubo`.
    #[arg(long, value_enum, required_if_eq("controller", "qubo"))]
    solver: Option<SolverName>,
    /// One cell per seed; defaults to the scenario's seed.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    duration: Option<u32>,
    /// Reads per planning round for the stochastic solvers.
    #[arg(long)]
    samples: Option<u32>,
    #[arg(long, default_value_t = Backend::DEFAULT_SWEEPS)]
    sweeps: usize,
    #[arg(long)]
    period: Option<u32>,
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    solver: SolverName,
    #[arg(long, default_value_t = 1000)]
    reads: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = bench::BENCH_SWEEPS)]
    sweeps: usize,
    /// Also write `samples.tsv` and `timing.txt` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML manifest; flags override its fields.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    reads: Option<usize>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default = "default_sizes")]
    sizes: Vec<usize>,
    #[serde(default = "default_solvers")]
    solvers: Vec<String>,
    #[serde(default = "default_instances")]
    instances: usize,
    #[serde(default = "default_reads")]
    reads: usize,
    #[serde(default = "default_sweeps")]
    sweeps: usize,
    #[serde(default)]
    seed: u64,
}

fn default_sizes() -> Vec<usize> {
    bench::SIZES.to_vec()
}

fn default_solvers() -> Vec<String> {
    vec!["sa".into(), "ptsa".into(), "exact".into()]
}

fn default_instances() -> usize {
    10
}

fn default_reads() -> usize {
    100
}

fn default_sweeps() -> usize {
    bench::BENCH_SWEEPS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => run_bench(a),
        Command::Validate(a) => validate(&a.scenario),
        Command::Routes(a) => routes(&a.scenario),
        Command::Compile(a) => compile(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("cannot start worker threads")
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_valid(path: &Path) -> Result<Scenario> {
    let s = read_scenario(path)?;
    check(&s)?;
    Ok(s)
}

fn check(s: &Scenario) -> Result<()> {
    let violations = validate_scenario(s);
    if violations.is_empty() {
        return Ok(());
    }
    for v in &violations {
        eprintln!("violation: {v}");
    }
    bail!("scenario has {} violation(s)", violations.len())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let controller = match (a.controller, a.solver) {
        (ControllerName::RuleBased, None) => Controller::RuleBased,
        (ControllerName::Qubo, Some(solver)) => Controller::Qubo(solver.backend(a.sweeps)),
        (ControllerName::Priority, None) => Controller::Priority { epsilon: a.epsilon },
        (_, Some(_)) => Cli::command()
            .error(
                ErrorKind::ArgumentConflict,
                "--solver only applies to --controller qubo",
            )
            .exit(),
        (ControllerName::Qubo, None) => unreachable!("clap requires --solver with qubo"),
    };
    let mut s = read_scenario(&a.scenario)?;
    let p = &mut s.params;
    if let Some(v) = a.samples {
        p.samples = v;
    }
    if let Some(v) = a.period {
        p.period_steps = v;
    }
    if let Some(v) = a.horizon {
        p.horizon_steps = v;
    }
    if let Some(v) = a.lambda1 {
        p.lambda1 = v;
    }
    if let Some(v) = a.lambda2 {
        p.lambda2 = v;
    }
    if let Some(v) = a.duration {
        p.sim_duration_steps = v;
    }
    check(&s)?;
    let seeds = if a.seed.is_empty() {
        vec![s.params.seed]
    } else {
        a.seed.clone()
    };
    let duration = s.params.sim_duration_steps as usize;
    let cells: Vec<(u64, PathBuf)> = seeds
        .iter()
        .map(|&seed| {
            let dir = if seeds.len() == 1 {
                a.out.clone()
            } else {
                a.out.join(format!("seed_{seed}"))
            };
            (seed, dir)
        })
        .collect();

    let lines = pool(a.jobs)?.install(|| {
        cells
            .par_iter()
            .map(|(seed, dir)| simulate_cell(&s, controller, a.solver, duration, *seed, dir))
            .collect::<Result<Vec<String>>>()
    })?;
    for line in lines {
        println!("{line}");
    }
    Ok(())
}

fn simulate_cell(
    s: &Scenario,
    controller: Controller,
    solver: Option<SolverName>,
    duration: usize,
    seed: u64,
    dir: &Path,
) -> Result<String> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let start = Instant::now();
    let trace = run_simulation(s, controller, duration, seed)?;
    let wall = start.elapsed().as_secs_f64();
    let report = waiting_report(&trace);
    let solver = match (controller, solver) {
        (Controller::Priority { .. }, _) => "exact",
        (_, Some(sv)) => sv.backend(1).name(),
        _ => "none",
    };
    let summary = format!(
        "controller={} solver={} seed={} steps={} working_rate={:.2} waiting_rate={:.4} last_half_waiting_rate={:.4} seconds_per_step={} fingerprint={}",
        trace.controller,
        solver,
        seed,
        trace.records.len(),
        working_rate(&report),
        report.time_average,
        report.last_half_average,
        s.seconds_per_step(),
        trace.fingerprint,
    );
    write(dir, "trace.csv", &trace.to_csv())?;
    write(dir, "waiting.csv", &report.series_csv())?;
    write(dir, "accumulation.csv", &report.accumulation_csv())?;
    write(dir, "summary.txt", &format!("{summary}\n"))?;
    write(dir, "timing.txt", &format!("wall_seconds {wall:.3}\n"))?;
    Ok(summary)
}

fn solve(a: SolveArgs) -> Result<()> {
    let text = fs::read_to_string(&a.instance)
        .with_context(|| format!("cannot read {}", a.instance.display()))?;
    let inst = QuboInstance::from_text(&text)?;
    let backend = match a.solver {
        SolverName::Exact => bail!("exact search needs route candidates; use brute, sa or ptsa"),
        other => other.backend(a.sweeps),
    };
    let ss = match backend {
        Backend::Brute => brute_force(&inst)?,
        Backend::Sa { sweeps } => simulated_annealing(
            &inst,
            &AnnealSchedule::for_instance(&inst, sweeps),
            a.reads,
            a.seed,
        ),
        Backend::Ptsa { sweeps } => parallel_trial_sa(
            &inst,
            &AnnealSchedule::for_instance(&inst, sweeps),
            &DynamicOffsetParams::for_instance(&inst),
            a.reads,
            a.seed,
        ),
        Backend::Exact => unreachable!(),
    };
    let (ground, reference) = if inst.n() <= BRUTE_FORCE_LIMIT {
        let g = brute_force(&inst)?.samples[0].energy;
        (g, "brute_force")
    } else {
        let g = ss.lowest().map_or(f64::INFINITY, |s| s.energy);
        (g, "best_found")
    };
    let tol = 1e-9 * (1.0 + ground.abs());
    let p0 = ground_state_probability(&ss, ground, tol);
    let table = ss.to_table();
    let p0_line = format!("p0 {p0:?} ground_energy {ground:?} reference {reference}");
    print!("{table}");
    println!("{p0_line}");
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        write(dir, "samples.tsv", &table)?;
        write(dir, "p0.txt", &format!("{p0_line}\n"))?;
        write(
            dir,
            "timing.txt",
            &format!("wall_seconds {:.6}\n", ss.wall_time),
        )?;
    }
    Ok(())
}

fn run_bench(a: BenchArgs) -> Result<()> {
    let mut m: Manifest = match &a.manifest {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("bad manifest {}", path.display()))?
        }
        None => toml::from_str("").expect("empty manifest takes defaults"),
    };
    m.reads = a.reads.unwrap_or(m.reads);
    m.instances = a.instances.unwrap_or(m.instances);
    m.sweeps = a.sweeps.unwrap_or(m.sweeps);
    m.seed = a.seed.unwrap_or(m.seed);
    if let Some(&bad) = m.sizes.iter().find(|&&n| n < 3 || n % 3 != 0) {
        bail!("size {bad} is not a positive multiple of 3");
    }
    let mut cells = Vec::new();
    for name in &m.solvers {
        let backend = Backend::from_name(name, m.sweeps)
            .with_context(|| format!("unknown solver {name:?}"))?;
        for &n in &m.sizes {
            if backend == Backend::Brute && n > BRUTE_FORCE_LIMIT {
                bail!(
                    "brute force is limited to {BRUTE_FORCE_LIMIT} variables, size {n} requested"
                );
            }
            cells.push((n, backend));
        }
    }
    fs::create_dir_all(&a.out)?;
    let rows = pool(a.jobs)?.install(|| {
        cells
            .par_iter()
            .map(|&(n, backend)| bench_cell(n, backend, m.instances, m.reads, m.seed))
            .collect::<Result<Vec<_>, _>>()
    })?;
    write(&a.out, "p0.csv", &p0_csv(&rows))?;
    let tts = tts_csv(&rows);
    write(&a.out, "tts.csv", &tts)?;
    print!("{tts}");
    Ok(())
}

fn validate(path: &Path) -> Result<()> {
    let s = read_scenario(path)?;
    for w in lint_scenario(&s) {
        eprintln!("warning: {w}");
    }
    check(&s)?;
    println!(
        "ok: {} nodes, {} edges, {} AGVs, fingerprint {}",
        s.graph.nodes.len(),
        s.graph.edges.len(),
        s.agvs.len(),
        s.fingerprint()
    );
    Ok(())
}

fn task_keys(state: &SimState) -> Vec<TaskKey> {
    state
        .vehicles
        .iter()
        .flat_map(|v| v.tasks.iter().copied())
        .collect()
}

fn routes(path: &Path) -> Result<()> {
    let s = load_valid(path)?;
    let topo = Topology::new(&s.graph);
    let state = SimState::new(&s, &topo, s.params.seed);
    let db = build_route_db(&topo, &task_keys(&state), s.params.horizon_steps as usize)?;
    print!("{}", db.listing(&topo));
    Ok(())
}

fn compile(a: CompileArgs) -> Result<()> {
    let s = load_valid(&a.scenario)?;
    let topo = Topology::new(&s.graph);
    let state = SimState::new(&s, &topo, s.params.seed);
    let horizon = s.params.horizon_steps as usize;
    let db = build_route_db(&topo, &task_keys(&state), horizon)?;
    let candidates = round_candidates(&state, &db, &topo, horizon)?;
    let w = PenaltyWeights {
        lambda1: s.params.lambda1,
        lambda2: s.params.lambda2,
    };
    let inst = build_qubo(&candidates, w, horizon)?;
    fs::write(&a.out, inst.to_text())
        .with_context(|| format!("cannot write {}", a.out.display()))?;
    println!("{} variables written to {}", inst.n(), a.out.display());
    Ok(())
}

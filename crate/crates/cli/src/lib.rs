//! Experiment commands behind the `iov-offload` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use iov_offload::constraints::ViolationCounts;
use iov_offload::ga::{self, GaParams, GaTrace, GenerationStats, KnownOptimum, Mode};
use iov_offload::oracle::{self, OracleResult};
use iov_offload::workload::{
    generate_scenario, generate_with_vehicles, ingest_trajectories, IngestOptions, WorkloadSpec,
    DEADLINE_GRID_S, LATENCY_GRID_S, PROC_GRID_S, REQUEST_GRID,
};
use iov_offload::{Evaluator, OffloadError, Scenario};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type Result<T> = std::result::Result<T, OffloadError>;

pub const THREADS_ENV: &str = "IOV_OFFLOAD_THREADS";

#[derive(Debug, Parser)]
#[command(name = "iov-offload", version, about = "Vehicular edge-cloud offloading experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    SlaAware,
    QosGa,
    Random,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::SlaAware => Mode::SlaAware,
            ModeArg::QosGa => Mode::QosOnly,
            ModeArg::Random => Mode::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Vary {
    Latency,
    Proc,
    Deadline,
    Requests,
}

impl Vary {
    fn as_str(self) -> &'static str {
        match self {
            Vary::Latency => "latency",
            Vary::Proc => "proc",
            Vary::Deadline => "deadline",
            Vary::Requests => "requests",
        }
    }
}

/// Where the scenario comes from.
#[derive(Debug, Clone, clap::Args)]
pub struct ScenarioArgs {
    /// Workload spec (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Existing scenario file; takes precedence over --config.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Seed for scenario generation (defaults to --seed).
    #[arg(long)]
    pub scenario_seed: Option<u64>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct GaArgs {
    #[arg(long, default_value_t = GaParams::DEFAULT_MAX_GENERATIONS)]
    pub max_generations: usize,
    #[arg(long, default_value_t = GaParams::DEFAULT_CROSSOVER_RATE)]
    pub crossover_rate: f64,
    #[arg(long, default_value_t = GaParams::DEFAULT_MUTATION_RATE)]
    pub mutation_rate: f64,
    /// Population size as a multiple of the request count.
    #[arg(long, default_value_t = 2)]
    pub population_factor: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a scenario generated from a workload spec.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Vehicle trajectories (CSV with x_est, y_est and an agent id).
        #[arg(long)]
        trajectories: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        trajectory_scale: f64,
        #[arg(long, default_value_t = 0.1)]
        trajectory_period: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one optimizer and write its trace and summary.
    Optimize {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        ga: GaArgs,
        #[arg(long, value_enum, default_value = "sla-aware")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Oracle output to stop at.
        #[arg(long)]
        known_optimum: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustively solve a small scenario.
    Oracle {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = oracle::DEFAULT_LIMIT)]
        limit: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Vary one SLA bound or the request count across modes and seeds.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        vary: Vary,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// First seed; runs use seed, seed + 1, ...
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        ga: GaArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Three-step search over crossover rate, mutation rate and population.
    Converge {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = GaParams::DEFAULT_MAX_GENERATIONS)]
        max_generations: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Caps the global worker pool from `IOV_OFFLOAD_THREADS` when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| OffloadError::InvalidParams(format!("{THREADS_ENV}={v:?} is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| OffloadError::InvalidParams(e.to_string()))?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            config,
            seed,
            trajectories,
            trajectory_scale,
            trajectory_period,
            out,
        } => cmd_generate(
            &load_spec(config.as_deref())?,
            seed,
            trajectories.as_deref(),
            IngestOptions {
                period_s: trajectory_period,
                scale: trajectory_scale,
                ..IngestOptions::default()
            },
            &out,
        ),
        Command::Optimize {
            scenario,
            ga,
            mode,
            seed,
            known_optimum,
            out,
        } => cmd_optimize(&scenario, &ga, mode.into(), seed, known_optimum.as_deref(), &out),
        Command::Oracle {
            scenario,
            seed,
            limit,
            out,
        } => cmd_oracle(&scenario, seed, limit, &out),
        Command::Sweep {
            config,
            vary,
            seeds,
            seed,
            ga,
            out,
        } => cmd_sweep(&load_spec(config.as_deref())?, vary, seed, seeds, &ga, &out),
        Command::Converge {
            config,
            seeds,
            seed,
            max_generations,
            out,
        } => cmd_converge(&load_spec(config.as_deref())?, seed, seeds, max_generations, &out),
    }
}

fn load_spec(path: Option<&Path>) -> Result<WorkloadSpec> {
    path.map_or_else(|| Ok(WorkloadSpec::default()), WorkloadSpec::load)
}

fn load_scenario(args: &ScenarioArgs, seed: u64) -> Result<Scenario> {
    match &args.scenario {
        Some(p) => Scenario::load(p),
        None => generate_scenario(&load_spec(args.config.as_deref())?, args.scenario_seed.unwrap_or(seed)),
    }
}

fn params(ga: &GaArgs, requests: usize, mode: Mode, seed: u64) -> GaParams {
    GaParams {
        crossover_rate: ga.crossover_rate,
        mutation_rate: ga.mutation_rate,
        population_size: (ga.population_factor * requests).max(2),
        max_generations: ga.max_generations,
        rng_seed: seed,
        mode,
        known_optimum: None,
    }
}

/// Comment lines written above every CSV.
fn provenance(w: &mut impl Write, fields: &[(&str, String)]) -> Result<()> {
    writeln!(w, "# iov-offload {}", env!("CARGO_PKG_VERSION"))?;
    for (k, v) in fields {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn cmd_generate(
    spec: &WorkloadSpec,
    seed: u64,
    trajectories: Option<&Path>,
    opts: IngestOptions,
    out: &Path,
) -> Result<()> {
    fs::create_dir_all(out)?;
    let s = match trajectories {
        Some(path) => {
            let t = ingest_trajectories(fs::File::open(path)?, &opts)?;
            write_json(&out.join("trajectory_map.json"), &t.map)?;
            generate_with_vehicles(spec, seed, &t.vehicles)?
        }
        None => generate_scenario(spec, seed)?,
    };
    s.save(out.join("scenario.toml"))
}

/// Outcome of one optimizer run as written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub scenario_seed: u64,
    pub ga_seed: u64,
    pub params: GaParams,
    pub total_time_s: f64,
    pub feasible: bool,
    pub violations: ViolationCounts,
    pub assignment: String,
    pub generations: usize,
    pub hit_generation: Option<usize>,
}

impl RunSummary {
    fn new(trace: &GaTrace, params: &GaParams, scenario_seed: u64) -> Self {
        Self {
            mode: trace.mode,
            scenario_seed,
            ga_seed: trace.seed,
            params: GaParams {
                known_optimum: None,
                ..params.clone()
            },
            total_time_s: trace.report.objective.total_time_s,
            feasible: trace.report.feasible,
            violations: trace.report.violations.counts,
            assignment: trace.best.to_string(),
            generations: trace.generations.len(),
            hit_generation: trace.hit_generation,
        }
    }
}

pub fn cmd_optimize(
    args: &ScenarioArgs,
    ga: &GaArgs,
    mode: Mode,
    seed: u64,
    known_optimum: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let s = load_scenario(args, seed)?;
    let mut p = params(ga, s.requests.len(), mode, seed);
    if let Some(path) = known_optimum {
        p.known_optimum = Some(known_optimum_from(path, mode)?);
    }
    let trace = ga::run(&s, &p)?;
    fs::create_dir_all(out)?;
    let mut csv = Vec::new();
    provenance(
        &mut csv,
        &[
            ("command", "optimize".into()),
            ("mode", mode.to_string()),
            ("scenario_seed", s.seed.to_string()),
            ("ga_seed", seed.to_string()),
            (
                "params",
                format!(
                    "crossover_rate={} mutation_rate={} population={} max_generations={}",
                    p.crossover_rate, p.mutation_rate, p.population_size, p.max_generations
                ),
            ),
        ],
    )?;
    trace.write_csv(&mut csv)?;
    fs::write(out.join("trace.csv"), csv)?;
    write_json(&out.join("summary.json"), &RunSummary::new(&trace, &p, s.seed))
}

pub fn cmd_oracle(args: &ScenarioArgs, seed: u64, limit: u64, out: &Path) -> Result<()> {
    let s = load_scenario(args, seed)?;
    let result = oracle::solve_exhaustive(&s, limit)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("oracle.json"), &result)
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub vary: String,
    pub grid_point: f64,
    pub mode: Mode,
    pub seed: u64,
    pub requests: usize,
    pub max_latency_s: f64,
    pub max_proc_s: f64,
    pub max_deadline_s: f64,
    pub total_time_s: f64,
    pub feasible: bool,
    pub violating_requests: u32,
    pub lat_violations: u32,
    pub proc_violations: u32,
    pub deadline_violations: u32,
    pub cpu_violations: u32,
    pub mem_violations: u32,
}

/// Workload specs for each grid point of a sweep.
pub fn sweep_grid(base: &WorkloadSpec, vary: Vary) -> Vec<(f64, WorkloadSpec)> {
    let minima = WorkloadSpec {
        max_latency_s: LATENCY_GRID_S[0],
        max_proc_s: PROC_GRID_S[0],
        max_deadline_s: DEADLINE_GRID_S[0],
        ..base.clone()
    };
    match vary {
        Vary::Latency => LATENCY_GRID_S
            .iter()
            .zip(DEADLINE_GRID_S)
            .map(|(&l, d)| (l, WorkloadSpec { max_latency_s: l, max_deadline_s: d, ..minima.clone() }))
            .collect(),
        Vary::Proc => PROC_GRID_S
            .iter()
            .zip(DEADLINE_GRID_S)
            .map(|(&p, d)| (p, WorkloadSpec { max_proc_s: p, max_deadline_s: d, ..minima.clone() }))
            .collect(),
        Vary::Deadline => DEADLINE_GRID_S
            .iter()
            .map(|&d| (d, WorkloadSpec { max_deadline_s: d, ..minima.clone() }))
            .collect(),
        Vary::Requests => REQUEST_GRID
            .iter()
            .map(|&n| (n as f64, WorkloadSpec { requests: n, ..minima.clone() }))
            .collect(),
    }
}

pub fn cmd_sweep(
    base: &WorkloadSpec,
    vary: Vary,
    first_seed: u64,
    seeds: u64,
    ga: &GaArgs,
    out: &Path,
) -> Result<()> {
    let grid = sweep_grid(base, vary);
    let mut jobs = Vec::new();
    for (point, spec) in &grid {
        for mode in Mode::ALL {
            for seed in first_seed..first_seed + seeds {
                jobs.push((*point, spec, mode, seed));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(point, spec, mode, seed)| {
            let s = generate_scenario(spec, seed)?;
            let p = params(ga, s.requests.len(), mode, seed);
            let trace = ga::run(&s, &p)?;
            let c = trace.report.violations.counts;
            Ok(SweepRow {
                vary: vary.as_str().into(),
                grid_point: point,
                mode,
                seed,
                requests: spec.requests,
                max_latency_s: spec.max_latency_s,
                max_proc_s: spec.max_proc_s,
                max_deadline_s: spec.max_deadline_s,
                total_time_s: trace.report.objective.total_time_s,
                feasible: trace.report.feasible,
                violating_requests: c.distinct,
                lat_violations: c.lat,
                proc_violations: c.proc,
                deadline_violations: c.deadline,
                cpu_violations: c.cpu,
                mem_violations: c.mem,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    fs::create_dir_all(out)?;
    let mut buf = Vec::new();
    provenance(
        &mut buf,
        &[
            ("command", "sweep".into()),
            ("vary", vary.as_str().into()),
            ("grid", grid.iter().map(|(p, _)| p.to_string()).collect::<Vec<_>>().join(" ")),
            ("seeds", format!("{first_seed}..{}", first_seed + seeds)),
            ("scenario_seed", "equal to seed column".into()),
            ("ga_seed", "equal to seed column".into()),
            (
                "params",
                format!(
                    "crossover_rate={} mutation_rate={} population_factor={} max_generations={}",
                    ga.crossover_rate, ga.mutation_rate, ga.population_factor, ga.max_generations
                ),
            ),
        ],
    )?;
    let mut w = csv::Writer::from_writer(&mut buf);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    drop(w);
    fs::write(out.join(format!("sweep_{}.csv", vary.as_str())), buf)?;
    Ok(())
}

pub const CROSSOVER_GRID: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];
pub const MUTATION_GRID: [f64; 10] = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10];
pub const POPULATION_FACTORS: [usize; 5] = [2, 4, 6, 8, 10];

/// One run of the convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeRow {
    pub step: u8,
    pub parameter: String,
    pub value: f64,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub population_size: usize,
    pub seed: u64,
    pub final_best_f: f64,
    pub settled_generation: usize,
    pub best_total_time_s: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeTraceRow {
    pub step: u8,
    pub value: f64,
    pub seed: u64,
    pub generation: usize,
    pub best_f: f64,
    pub mean_f: f64,
    pub n_f: usize,
    pub best_feasible_time_s: Option<f64>,
    pub best_so_far_time_s: f64,
}

/// Mean outcome of one candidate value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub value: f64,
    pub mean_final_best_f: f64,
    pub mean_settled_generation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeSummary {
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub population_factor: usize,
    pub crossover_candidates: Vec<Candidate>,
    pub mutation_candidates: Vec<Candidate>,
    pub population_candidates: Vec<Candidate>,
}

/// Highest mean final fitness, then earliest mean settling, then grid order.
pub fn select(candidates: &[Candidate]) -> usize {
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let b = &candidates[best];
        let better = c.mean_final_best_f > b.mean_final_best_f + 1e-12
            || ((c.mean_final_best_f - b.mean_final_best_f).abs() <= 1e-12
                && c.mean_settled_generation < b.mean_settled_generation);
        if better {
            best = i;
        }
    }
    best
}

struct StepResult {
    rows: Vec<ConvergeRow>,
    traces: Vec<ConvergeTraceRow>,
    candidates: Vec<Candidate>,
}

fn converge_step(
    ev: &Evaluator<'_>,
    step: u8,
    parameter: &str,
    values: &[(f64, f64, f64, usize)],
    seeds: &[u64],
    max_generations: usize,
) -> Result<StepResult> {
    let requests = ev.requests();
    let jobs: Vec<(f64, f64, f64, usize, u64)> = values
        .iter()
        .flat_map(|&(v, c, m, f)| seeds.iter().map(move |&s| (v, c, m, f, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(value, c, m, f, seed)| {
            let p = GaParams {
                crossover_rate: c,
                mutation_rate: m,
                population_size: f * requests,
                max_generations,
                rng_seed: seed,
                mode: Mode::SlaAware,
                known_optimum: None,
            };
            let trace = ga::run_with(ev, &p)?;
            Ok((value, p, seed, trace))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for (value, p, seed, trace) in runs {
        rows.push(ConvergeRow {
            step,
            parameter: parameter.into(),
            value,
            crossover_rate: p.crossover_rate,
            mutation_rate: p.mutation_rate,
            population_size: p.population_size,
            seed,
            final_best_f: trace.generations.last().map_or(0.0, |g| g.best_fitness),
            settled_generation: GenerationStats::settled_at(&trace.generations),
            best_total_time_s: trace.report.objective.total_time_s,
            feasible: trace.report.feasible,
        });
        traces.extend(trace.generations.into_iter().map(|g| ConvergeTraceRow {
            step,
            value,
            seed,
            generation: g.generation,
            best_f: g.best_fitness,
            mean_f: g.mean_fitness,
            n_f: g.n_f,
            best_feasible_time_s: g.best_feasible_time_s,
            best_so_far_time_s: g.best_so_far_time_s,
        }));
    }
    let candidates = values
        .iter()
        .map(|&(value, ..)| {
            let mine: Vec<&ConvergeRow> = rows.iter().filter(|r| r.value == value).collect();
            let n = mine.len() as f64;
            Candidate {
                value,
                mean_final_best_f: mine.iter().map(|r| r.final_best_f).sum::<f64>() / n,
                mean_settled_generation: mine.iter().map(|r| r.settled_generation as f64).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(StepResult {
        rows,
        traces,
        candidates,
    })
}

pub fn cmd_converge(
    spec: &WorkloadSpec,
    first_seed: u64,
    seeds: u64,
    max_generations: usize,
    out: &Path,
) -> Result<()> {
    let s = generate_scenario(spec, first_seed)?;
    let ev = Evaluator::new(&s)?;
    let seed_list: Vec<u64> = (first_seed..first_seed + seeds).collect();
    let m0 = GaParams::DEFAULT_MUTATION_RATE;

    let values: Vec<_> = CROSSOVER_GRID.iter().map(|&c| (c, c, m0, 2)).collect();
    let s1 = converge_step(&ev, 1, "crossover_rate", &values, &seed_list, max_generations)?;
    let c = CROSSOVER_GRID[select(&s1.candidates)];

    let values: Vec<_> = MUTATION_GRID.iter().map(|&m| (m, c, m, 2)).collect();
    let s2 = converge_step(&ev, 2, "mutation_rate", &values, &seed_list, max_generations)?;
    let m = MUTATION_GRID[select(&s2.candidates)];

    let values: Vec<_> = POPULATION_FACTORS.iter().map(|&f| (f as f64, c, m, f)).collect();
    let s3 = converge_step(&ev, 3, "population_factor", &values, &seed_list, max_generations)?;
    let f = POPULATION_FACTORS[select(&s3.candidates)];

    fs::create_dir_all(out)?;
    let header = [
        ("command", "converge".to_string()),
        ("scenario_seed", s.seed.to_string()),
        ("ga_seed", "equal to seed column".into()),
        ("requests", s.requests.len().to_string()),
        ("max_generations", max_generations.to_string()),
    ];
    let mut buf = Vec::new();
    provenance(&mut buf, &header)?;
    let mut w = csv::Writer::from_writer(&mut buf);
    for r in s1.rows.iter().chain(&s2.rows).chain(&s3.rows) {
        w.serialize(r)?;
    }
    w.flush()?;
    drop(w);
    fs::write(out.join("converge.csv"), buf)?;

    let mut buf = Vec::new();
    provenance(&mut buf, &header)?;
    let mut w = csv::Writer::from_writer(&mut buf);
    for r in s1.traces.iter().chain(&s2.traces).chain(&s3.traces) {
        w.serialize(r)?;
    }
    w.flush()?;
    drop(w);
    fs::write(out.join("converge_trace.csv"), buf)?;

    write_json(
        &out.join("converge.json"),
        &ConvergeSummary {
            crossover_rate: c,
            mutation_rate: m,
            population_factor: f,
            crossover_candidates: s1.candidates,
            mutation_candidates: s2.candidates,
            population_candidates: s3.candidates,
        },
    )
}

/// Reads an oracle result and turns it into an early-stop target.
pub fn known_optimum_from(path: &Path, mode: Mode) -> Result<KnownOptimum> {
    let o: OracleResult = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(o.known_optimum(mode))
}

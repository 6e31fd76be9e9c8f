//! Command-line front end for the asynchronous coordinate descent toolkit.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acd::async_sim::lower_bound::stall_overlap;
use acd::async_sim::{check_progress_lemmas, run_async_sim, stall_demo, DelayPolicy};
use acd::harness::{run_check_suite, run_experiment, ExperimentConfig, GammaRule, GeneratorSpec, ProblemSource, SolverSelection};
use acd::parallel_rt::{run_parallel, verify_write_chains, RuntimeConfig};
use acd::{ProblemInstance, SolverConfig};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

const THREADS_ENV: &str = "ASYNC_CD_THREADS";

#[derive(Parser)]
#[command(name = "acd", version, about = "Asynchronous coordinate descent: solvers, simulator and checks")]
#[command(after_help = "Exit status: 0 when every check passes, 2 when a check fails, 1 on usage or I/O errors.\n\
                        ASYNC_CD_THREADS caps the worker pool used for seed-parallel runs.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config, or a plain sequential solve.
    Solve(SolveArgs),
    /// Simulate stale reads under a delay policy and write per-seed traces.
    Simulate(SimulateArgs),
    /// Run the shared-memory multithreaded solver.
    Bench(BenchArgs),
    /// Compare the adversarial policy with random staleness on the hard instance.
    StallDemo(StallArgs),
    /// Run the built-in invariant suite.
    Check {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write a generated problem as JSON.
    Gen(GenArgs),
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Experiment config (JSON). Other flags are ignored when given, except --out.
    #[arg(long, conflicts_with_all = ["problem", "gamma", "steps", "seeds"])]
    config: Option<PathBuf>,
    /// Problem file (JSON).
    #[arg(long, required_unless_present = "config")]
    problem: Option<PathBuf>,
    /// Step parameter; defaults to the problem's L_max.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    /// Number of seeds, run as 0..seeds.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    /// Output directory (overrides the config's).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Sync,
    Rand,
    Scv,
    Adversarial,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    problem: PathBuf,
    /// Step parameter; defaults to the problem's L_max.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    steps: usize,
    #[arg(long, value_enum, default_value = "rand")]
    policy: PolicyKind,
    /// Overlap bound for the policy.
    #[arg(long, default_value_t = 1)]
    q: usize,
    /// Number of seeds, run as 0..seeds.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Drift from the start value the adversary tolerates before interfering.
    #[arg(long, default_value_t = 0.0)]
    amplitude: f64,
    /// Starting point (JSON array); defaults to the origin.
    #[arg(long)]
    x0: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long)]
    problem: PathBuf,
    /// Step parameter; defaults to the problem's L_max.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 4)]
    threads: usize,
    #[arg(long)]
    updates: usize,
    /// Atomic adds instead of per-coordinate locks (zero regularizers only).
    #[arg(long)]
    smooth_only: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record every write and verify per-coordinate write chains.
    #[arg(long)]
    log_writes: bool,
    /// Starting point (JSON array); defaults to the origin.
    #[arg(long)]
    x0: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct StallArgs {
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    /// Adversary overlap; defaults to ⌈√(n ln n)⌉.
    #[arg(long)]
    q: Option<usize>,
    /// Updates per run; defaults to 10n.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pairs: u64,
    #[arg(long, default_value_t = 0.0)]
    amplitude: f64,
    /// Write the report JSON here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Quadratic,
    Lasso,
    LowerBound,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(value_enum)]
    kind: GenKind,
    /// Coordinates.
    #[arg(long)]
    n: usize,
    /// Nonzeros per row (quadratic).
    #[arg(long, default_value_t = 5)]
    row_nnz: usize,
    /// Strong convexity modulus (quadratic).
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    /// Largest diagonal entry (quadratic).
    #[arg(long, default_value_t = 1.0)]
    lmax: f64,
    /// Rows of the design matrix (lasso).
    #[arg(long)]
    m: Option<usize>,
    /// Design density (lasso).
    #[arg(long, default_value_t = 0.1)]
    density: f64,
    /// L1 weight (lasso).
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Off-diagonal constant (lower-bound).
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Problem file to write. A non-zero start point goes next to it as `<stem>.x0.json`.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match configure_pool().and_then(|()| run(cli.command)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Prints a line, ignoring a closed stdout (for example when piped into `head`).
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn configure_pool() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let threads: usize = raw.trim().parse().with_context(|| format!("{THREADS_ENV}={raw:?} is not a count"))?;
    if threads == 0 {
        bail!("{THREADS_ENV} must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

/// Returns whether every check passed.
fn run(command: Command) -> Result<bool> {
    match command {
        Command::Solve(a) => solve(a),
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
        Command::StallDemo(a) => stall(a),
        Command::Check { seed } => {
            let rep = run_check_suite(seed)?;
            for c in &rep.checks {
                emit(&format!("{:<18} {}  {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail));
            }
            Ok(rep.pass)
        }
        Command::Gen(a) => generate(a).map(|()| true),
    }
}

fn load_problem(path: &Path) -> Result<ProblemInstance> {
    ProblemInstance::load(path).with_context(|| format!("reading problem {}", path.display()))
}

fn load_x0(path: Option<&Path>, n: usize) -> Result<Vec<f64>> {
    let Some(path) = path else { return Ok(vec![0.0; n]) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let x0: Vec<f64> = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if x0.len() != n {
        bail!("start point has {} entries for a problem with n = {n}", x0.len());
    }
    Ok(x0)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn solve(a: SolveArgs) -> Result<bool> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))?,
        None => ExperimentConfig {
            problem: ProblemSource::File(a.problem.clone().expect("required by clap")),
            solver: SolverSelection::Sequential,
            gamma: a.gamma.map_or(GammaRule::LMax, |value| GammaRule::Explicit { value }),
            iterations: a.steps,
            seeds: (0..a.seeds).collect(),
            output_dir: a.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            record_every: a.record_every,
            bound_slack: 1.10,
        },
    };
    if let Some(out) = a.out {
        cfg.output_dir = out;
    }
    let summary = run_experiment(&cfg)?;
    let last = summary.mean_trajectory.last().map(|&(_, f)| f);
    emit(&serde_json::to_string_pretty(&json!({
            "pass": summary.pass,
            "gamma": summary.gamma,
            "f_initial": summary.f_initial,
            "mean_f_final": last,
            "f_star": summary.f_star,
            "bound_check": summary.bound_check,
            "output_dir": cfg.output_dir,
        }))?.to_string());
    Ok(summary.pass)
}

fn simulate(a: SimulateArgs) -> Result<bool> {
    let p = load_problem(&a.problem)?;
    let gamma = a.gamma.unwrap_or_else(|| p.l_max());
    let policy = match a.policy {
        PolicyKind::Sync => DelayPolicy::Synchronous,
        PolicyKind::Rand => DelayPolicy::UniformRandom { q: a.q },
        PolicyKind::Scv => DelayPolicy::ScvUniform { q: a.q },
        PolicyKind::Adversarial => acd::async_sim::adversarial_policy(a.q, a.amplitude),
    };
    let x0 = load_x0(a.x0.as_deref(), p.n())?;
    std::fs::create_dir_all(&a.out)?;
    let mut runs = Vec::new();
    let mut pass = true;
    for seed in 0..a.seeds {
        let cfg = SolverConfig::new(gamma, a.steps, seed, p.n()).with_x0(x0.clone()).with_record_every(a.record_every);
        let tr = run_async_sim(&p, &cfg, &policy)?;
        tr.save_csv(&a.out.join(format!("trace_seed{seed}.csv")))?;
        let lemmas = if a.record_every == 1 { Some(check_progress_lemmas(&tr.trace, &p, gamma)?) } else { None };
        pass &= lemmas.as_ref().is_none_or(|r| r.pass);
        runs.push(json!({
            "seed": seed,
            "f_initial": tr.trace.f_initial,
            "f_final": tr.trace.f_final,
            "lemmas": lemmas,
        }));
    }
    let summary = json!({ "policy": policy, "gamma": gamma, "steps": a.steps, "runs": runs, "pass": pass });
    write_json(&a.out.join("summary.json"), &summary)?;
    emit(&serde_json::to_string_pretty(&summary)?);
    Ok(pass)
}

fn bench(a: BenchArgs) -> Result<bool> {
    let p = load_problem(&a.problem)?;
    let mut cfg = RuntimeConfig::new(a.threads, a.gamma.unwrap_or_else(|| p.l_max()), a.updates, a.seed, p.n());
    cfg.smooth_only = a.smooth_only;
    cfg.log_writes = a.log_writes;
    cfg.x0 = load_x0(a.x0.as_deref(), p.n())?;
    let r = run_parallel(&p, &cfg)?;
    std::fs::create_dir_all(&a.out)?;
    let summary = r.summary_json()?;
    std::fs::write(a.out.join("run.json"), &summary)?;
    emit(&summary.to_string());
    let Some(log) = r.write_log.as_deref() else { return Ok(true) };
    let chains = verify_write_chains(&cfg.x0, &r.final_x, log);
    write_json(&a.out.join("write_chains.json"), &chains)?;
    if !chains.ok {
        eprintln!("write chains broken on {} coordinates", chains.broken.len());
    }
    Ok(chains.ok)
}

fn stall(a: StallArgs) -> Result<bool> {
    let q = a.q.unwrap_or_else(|| stall_overlap(a.n));
    let steps = a.steps.unwrap_or(10 * a.n);
    let seeds: Vec<u64> = (0..a.pairs).collect();
    let rep = stall_demo(a.n, a.c, q, steps, &seeds, a.amplitude)?;
    if let Some(out) = &a.out {
        write_json(out, &rep)?;
    }
    emit(&serde_json::to_string_pretty(&rep)?);
    Ok(rep.pass)
}

fn generate(a: GenArgs) -> Result<()> {
    let spec = match a.kind {
        GenKind::Quadratic => {
            GeneratorSpec::RandomQuadratic { n: a.n, row_nnz: a.row_nnz, mu: a.mu, lmax: a.lmax, seed: a.seed }
        }
        GenKind::Lasso => GeneratorSpec::Lasso {
            m: a.m.unwrap_or(a.n),
            n: a.n,
            density: a.density,
            lambda: a.lambda,
            seed: a.seed,
        },
        GenKind::LowerBound => GeneratorSpec::LowerBound { n: a.n, c: a.c, seed: a.seed },
    };
    let g = spec.generate()?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    g.problem.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if g.x0.iter().any(|&v| v != 0.0) {
        write_json(&a.out.with_extension("x0.json"), &g.x0)?;
    }
    eprintln!("wrote {} (n = {}, L_max = {})", a.out.display(), g.problem.n(), g.problem.l_max());
    Ok(())
}

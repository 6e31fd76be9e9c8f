//! Shared-memory multithreaded coordinate descent.
//!
//! Workers share one coordinate vector stored as `f64` bit patterns in
//! `AtomicU64`s. Reads are relaxed and unsynchronized, so a worker may see a
//! mix of old and new values; that inconsistency is the model being run.
//! Smooth-only problems apply the step with an atomic add. Problems with a
//! non-zero regularizer take a striped lock for the coordinate, re-read its
//! latest value and apply the proximal step to it.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::objective::ProblemInstance;
use crate::prox::step_unchecked;
use crate::rng::KeyedRng;

const LOCK_STRIPES: usize = 1024;

/// Makes one worker sleep between its reads and its write.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StallHook {
    pub thread: usize,
    /// Stall on every `every`-th update of that thread.
    pub every: usize,
    pub pause: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeConfig {
    pub threads: usize,
    pub gamma: f64,
    pub total_updates: usize,
    pub seed: u64,
    /// Use atomic adds; only valid when every regularizer is zero.
    pub smooth_only: bool,
    /// Sample `F` every this many commits; `0` disables sampling.
    pub snapshot_stride: usize,
    pub x0: Vec<f64>,
    /// Keep a log of every write for linearizability checks.
    pub log_writes: bool,
    pub stall: Option<StallHook>,
}

impl RuntimeConfig {
    pub fn new(threads: usize, gamma: f64, total_updates: usize, seed: u64, n: usize) -> Self {
        Self {
            threads,
            gamma,
            total_updates,
            seed,
            smooth_only: false,
            snapshot_stride: 0,
            x0: vec![0.0; n],
            log_writes: false,
            stall: None,
        }
    }

    fn validate(&self, p: &ProblemInstance) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::NonPositiveGamma(self.gamma));
        }
        if self.gamma < p.l_max() {
            return Err(Error::StepTooSmall { gamma: self.gamma, l_max: p.l_max() });
        }
        if self.smooth_only && !p.is_smooth_only() {
            return Err(Error::Config("smooth_only requires every regularizer to be zero".into()));
        }
        if self.x0.len() != p.n() {
            return Err(Error::Dimension(format!("x0 has length {} for n = {}", self.x0.len(), p.n())));
        }
        if matches!(self.stall, Some(StallHook { every: 0, .. })) {
            return Err(Error::Config("stall hook needs every >= 1".into()));
        }
        Ok(())
    }
}

/// One write to the shared vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WriteEntry {
    pub coord: usize,
    pub pre: f64,
    pub post: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub final_x: Vec<f64>,
    pub final_f: f64,
    /// `(commits so far, F of an unsynchronized snapshot)`; approximate
    /// in-flight values.
    pub f_samples: Vec<(usize, f64)>,
    pub wall_ms: f64,
    pub updates: usize,
    /// Largest number of other commits observed during one update.
    pub q_emp: usize,
    pub per_thread: Vec<usize>,
    pub threads: usize,
    #[serde(skip)]
    pub write_log: Option<Vec<WriteEntry>>,
}

#[derive(Serialize)]
struct Summary {
    #[serde(rename = "final_F")]
    final_f: f64,
    wall_ms: f64,
    q_emp: usize,
    threads: usize,
    updates: usize,
}

impl RunResult {
    /// `{final_F, wall_ms, q_emp, threads, updates}`.
    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Summary {
            final_f: self.final_f,
            wall_ms: self.wall_ms,
            q_emp: self.q_emp,
            threads: self.threads,
            updates: self.updates,
        })?)
    }
}

#[inline]
fn load(x: &[AtomicU64], i: usize) -> f64 {
    f64::from_bits(x[i].load(Ordering::Relaxed))
}

fn snapshot(x: &[AtomicU64]) -> Vec<f64> {
    (0..x.len()).map(|i| load(x, i)).collect()
}

struct WorkerOutput {
    updates: usize,
    q_emp: usize,
    log: Vec<WriteEntry>,
}

pub fn run_parallel(p: &ProblemInstance, cfg: &RuntimeConfig) -> Result<RunResult> {
    cfg.validate(p)?;
    let n = p.n();
    let x: Vec<AtomicU64> = cfg.x0.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
    let locks: Vec<Mutex<()>> = (0..LOCK_STRIPES.min(n).max(1)).map(|_| Mutex::new(())).collect();
    let claimed = AtomicUsize::new(0);
    let commits = AtomicUsize::new(0);
    let samples: Mutex<Vec<(usize, f64)>> = Mutex::new(Vec::new());
    if cfg.snapshot_stride > 0 {
        samples.lock().expect("fresh mutex").push((0, p.objective_unchecked(&cfg.x0)));
    }

    let started = Instant::now();
    let outputs: Vec<WorkerOutput> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.threads)
            .map(|id| {
                let (x, locks, claimed, commits, samples) = (&x, &locks, &claimed, &commits, &samples);
                scope.spawn(move || worker(p, cfg, id, x, locks, claimed, commits, samples))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;

    let final_x = snapshot(&x);
    let final_f = p.objective_unchecked(&final_x);
    let mut f_samples = samples.into_inner().expect("workers joined");
    f_samples.sort_by_key(|s| s.0);
    let per_thread: Vec<usize> = outputs.iter().map(|o| o.updates).collect();
    let write_log = cfg.log_writes.then(|| outputs.iter().flat_map(|o| o.log.iter().copied()).collect());
    Ok(RunResult {
        final_x,
        final_f,
        f_samples,
        wall_ms,
        updates: per_thread.iter().sum(),
        q_emp: outputs.iter().map(|o| o.q_emp).max().unwrap_or(0),
        per_thread,
        threads: cfg.threads,
        write_log,
    })
}

#[allow(clippy::too_many_arguments)]
fn worker(
    p: &ProblemInstance,
    cfg: &RuntimeConfig,
    id: usize,
    x: &[AtomicU64],
    locks: &[Mutex<()>],
    claimed: &AtomicUsize,
    commits: &AtomicUsize,
    samples: &Mutex<Vec<(usize, f64)>>,
) -> WorkerOutput {
    let n = p.n();
    let smooth = p.smooth();
    let mut rng = KeyedRng::new(cfg.seed);
    let mut out = WorkerOutput { updates: 0, q_emp: 0, log: Vec::new() };
    let mut counter = id as u64;
    while claimed.fetch_add(1, Ordering::Relaxed) < cfg.total_updates {
        let k = rng.coordinate(counter, n);
        counter += cfg.threads as u64;
        let start = commits.load(Ordering::Acquire);
        let g_tilde = smooth.grad_coord_with(k, |i| load(x, i));
        if let Some(h) = cfg.stall {
            if h.thread == id && (out.updates + 1).is_multiple_of(h.every) {
                std::thread::sleep(h.pause);
            }
        }

        let reg = p.reg(k);
        let (pre, post) = if cfg.smooth_only {
            let dx = step_unchecked(cfg.gamma, reg, load(x, k), g_tilde);
            let mut cur = x[k].load(Ordering::Relaxed);
            loop {
                let next = (f64::from_bits(cur) + dx).to_bits();
                match x[k].compare_exchange_weak(cur, next, Ordering::AcqRel, Ordering::Relaxed) {
                    Ok(_) => break (f64::from_bits(cur), f64::from_bits(next)),
                    Err(seen) => cur = seen,
                }
            }
        } else {
            let _guard = locks[k % locks.len()].lock().expect("lock poisoned");
            let cur = load(x, k);
            let next = cur + step_unchecked(cfg.gamma, reg, cur, g_tilde);
            x[k].store(next.to_bits(), Ordering::Release);
            (cur, next)
        };

        let committed = commits.fetch_add(1, Ordering::AcqRel);
        out.q_emp = out.q_emp.max(committed - start);
        out.updates += 1;
        if cfg.log_writes {
            out.log.push(WriteEntry { coord: k, pre, post, delta: post - pre });
        }
        if cfg.snapshot_stride > 0 && (committed + 1).is_multiple_of(cfg.snapshot_stride) {
            let f = p.objective_unchecked(&snapshot(x));
            samples.lock().expect("lock poisoned").push((committed + 1, f));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WriteChainReport {
    pub coords_written: usize,
    /// Coordinates whose writes do not chain from `x0` to the final value.
    pub broken: Vec<usize>,
    /// Largest `|x0_j + Σ delta − final_j|` over coordinates.
    pub max_sum_residual: f64,
    pub ok: bool,
}

/// Checks that, per coordinate, the logged writes form one chain from the
/// start value to the final value: the multiset of values written over
/// (`pre`s plus the final value) equals the multiset of values produced
/// (`post`s plus the start value). Lost or torn updates break this.
pub fn verify_write_chains(x0: &[f64], final_x: &[f64], log: &[WriteEntry]) -> WriteChainReport {
    let n = x0.len();
    let mut by_coord: Vec<Vec<&WriteEntry>> = vec![Vec::new(); n];
    for e in log {
        by_coord[e.coord].push(e);
    }
    let mut broken = Vec::new();
    let mut max_sum_residual: f64 = 0.0;
    let mut coords_written = 0;
    for (j, entries) in by_coord.iter().enumerate() {
        if entries.is_empty() {
            if x0[j].to_bits() != final_x[j].to_bits() {
                broken.push(j);
            }
            continue;
        }
        coords_written += 1;
        let mut consumed: Vec<u64> = entries.iter().map(|e| e.pre.to_bits()).collect();
        consumed.push(final_x[j].to_bits());
        let mut produced: Vec<u64> = entries.iter().map(|e| e.post.to_bits()).collect();
        produced.push(x0[j].to_bits());
        consumed.sort_unstable();
        produced.sort_unstable();
        if consumed != produced {
            broken.push(j);
        }
        let sum: f64 = entries.iter().map(|e| e.delta).sum();
        max_sum_residual = max_sum_residual.max((x0[j] + sum - final_x[j]).abs());
    }
    let ok = broken.is_empty();
    WriteChainReport { coords_written, broken, max_sum_residual, ok }
}

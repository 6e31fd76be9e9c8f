//! Deterministic replay of asynchronous updates with inconsistent reads.
//!
//! Updates are numbered `t = 0, 1, …` in commit order and `x^t` is the state
//! after `t` commits. The update at `t` reads coordinate `j` at staleness
//! `c ∈ [1, q + 1]`, meaning it sees `x_j^{max(0, t + 1 − c)}`: `c = 1` is
//! the current value and `c = q + 1` misses the last `q` commits. The step
//! is then applied to the latest `x_k`.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{ProblemInstance, SmoothPart};
use crate::prox::{step_unchecked, w_hat_unchecked};
use crate::rng::{KeyedRng, STALENESS_STREAM};
use crate::seq_solver::{ObjectiveTracker, SolverConfig, Trace, UpdateRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayPolicy {
    /// Every read is current.
    Synchronous,
    /// Staleness uniform on `[1, q + 1]`, drawn per `(t, k_t, j)`: the values
    /// read may depend on which coordinate is being updated.
    UniformRandom { q: usize },
    /// Staleness uniform on `[1, q + 1]`, drawn per `(t, j)` independently of
    /// the coordinate chosen at `t`.
    ScvUniform { q: usize },
    /// Greedy stale-read selection that keeps the updated coordinate close to
    /// its starting value. Updates that already stay within
    /// `target_amplitude` of the start read fresh values.
    Adversarial { q: usize, target_amplitude: f64 },
}

impl DelayPolicy {
    pub fn q(&self) -> usize {
        match *self {
            DelayPolicy::Synchronous => 0,
            DelayPolicy::UniformRandom { q }
            | DelayPolicy::ScvUniform { q }
            | DelayPolicy::Adversarial { q, .. } => q,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DelayPolicy::Synchronous => "sync",
            DelayPolicy::UniformRandom { .. } => "rand",
            DelayPolicy::ScvUniform { .. } => "scv",
            DelayPolicy::Adversarial { .. } => "adversarial",
        }
    }
}

/// The stall adversary. With `q = 0` there is nothing to exploit and the
/// policy is synchronous.
pub fn adversarial_policy(q: usize, target_amplitude: f64) -> DelayPolicy {
    if q == 0 {
        DelayPolicy::Synchronous
    } else {
        DelayPolicy::Adversarial { q, target_amplitude }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsyncTrace {
    pub trace: Trace,
    pub policy: DelayPolicy,
}

impl AsyncTrace {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "k", "g", "g_tilde", "grad_err_sq", "dx", "F", "w_hat", "q"])?;
        let q = self.policy.q().to_string();
        for r in &self.trace.records {
            out.write_record(&[
                r.t.to_string(),
                r.k.to_string(),
                r.g.to_string(),
                r.g_tilde.to_string(),
                r.grad_err_sq().to_string(),
                r.dx.to_string(),
                r.f_after.to_string(),
                r.w_hat.to_string(),
                q.clone(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[derive(Debug, Clone, Copy)]
struct Commit {
    coord: usize,
    old: f64,
}

/// Commits inside the window, grouped by coordinate. `depth` counts back
/// from the newest commit (`1` = most recent); reading at staleness `c`
/// undoes every commit with `depth ≤ c − 1`.
struct WindowIndex {
    /// `(coord, depth, old value)`, sorted by coordinate then decreasing depth.
    entries: Vec<(usize, usize, f64)>,
    /// Ranges into `entries`, one per distinct coordinate.
    groups: Vec<(usize, usize)>,
}

impl WindowIndex {
    fn new() -> Self {
        Self { entries: Vec::new(), groups: Vec::new() }
    }

    fn rebuild(&mut self, ring: &VecDeque<Commit>) {
        let len = ring.len();
        self.entries.clear();
        self.entries.extend(ring.iter().enumerate().map(|(i, c)| (c.coord, len - i, c.old)));
        self.entries.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        self.groups.clear();
        let mut lo = 0;
        for i in 1..=self.entries.len() {
            if i == self.entries.len() || self.entries[i].0 != self.entries[lo].0 {
                self.groups.push((lo, i));
                lo = i;
            }
        }
    }

    /// Value of the group's coordinate at staleness `c`, or `None` if it
    /// equals the current value by construction (no commit undone).
    fn value_at(&self, group: (usize, usize), c: usize) -> Option<f64> {
        // Entries run from oldest (largest depth) to newest; the oldest undone
        // commit carries the value seen.
        self.entries[group.0..group.1].iter().find(|e| e.1 < c).map(|e| e.2)
    }
}

pub fn run_async_sim(p: &ProblemInstance, cfg: &SolverConfig, policy: &DelayPolicy) -> Result<AsyncTrace> {
    cfg.validate(p)?;
    if let DelayPolicy::Adversarial { target_amplitude, .. } = policy {
        if !matches!(p.smooth(), SmoothPart::Quadratic { .. }) {
            return Err(Error::InvalidInput("the adversarial policy needs a quadratic smooth part".into()));
        }
        if !(*target_amplitude >= 0.0) {
            return Err(Error::InvalidInput("target_amplitude must be >= 0".into()));
        }
    }
    let n = p.n();
    let q = policy.q();
    let gamma = cfg.gamma;
    let smooth = p.smooth();
    let mut rng = KeyedRng::new(cfg.seed);
    let mut x = cfg.x0.clone();
    let mut tracker = ObjectiveTracker::new(p, &x);
    let f_initial = tracker.value();
    let mut records = Vec::with_capacity(cfg.iterations / cfg.record_every + 1);

    let mut ring: VecDeque<Commit> = VecDeque::with_capacity(q + 1);
    let mut window = WindowIndex::new();
    // (coord, current value) pairs to restore after a stale read.
    let mut saved: Vec<(usize, f64)> = Vec::new();
    let mut staleness: Vec<usize> = Vec::new();

    for t in 0..cfg.iterations {
        let k = rng.coordinate(t as u64, n);
        let reg = p.reg(k);
        let g = smooth.grad_coord_with(k, |i| x[i]);
        let xk = x[k];

        let mut max_staleness = 1;
        let mut stale_reads = 0;
        let g_tilde = if ring.is_empty() || matches!(policy, DelayPolicy::Synchronous) {
            g
        } else {
            window.rebuild(&ring);
            staleness.clear();
            match *policy {
                DelayPolicy::Synchronous => unreachable!(),
                DelayPolicy::UniformRandom { q } => {
                    for &(lo, _) in &window.groups {
                        let j = window.entries[lo].0 as u128;
                        let key = ((t as u128) * n as u128 + k as u128) * n as u128 + j;
                        staleness.push(1 + rng.index(STALENESS_STREAM, key, q + 1));
                    }
                }
                DelayPolicy::ScvUniform { q } => {
                    for &(lo, _) in &window.groups {
                        let j = window.entries[lo].0 as u128;
                        let key = (t as u128) * n as u128 + j;
                        staleness.push(1 + rng.index(STALENESS_STREAM, key, q + 1));
                    }
                }
                DelayPolicy::Adversarial { target_amplitude, .. } => {
                    let SmoothPart::Quadratic { a, .. } = smooth else { unreachable!() };
                    adversarial_staleness(
                        &window,
                        &x,
                        a.row(k),
                        AdversaryGoal { gamma, reg: *reg, xk, g, x0k: cfg.x0[k], target_amplitude },
                        &mut staleness,
                    );
                }
            }
            saved.clear();
            for (&group, &c) in window.groups.iter().zip(&staleness) {
                max_staleness = max_staleness.max(c.min(t + 1));
                if let Some(v) = window.value_at(group, c) {
                    let j = window.entries[group.0].0;
                    if v != x[j] {
                        stale_reads += 1;
                    }
                    saved.push((j, x[j]));
                    x[j] = v;
                }
            }
            let gt = smooth.grad_coord_with(k, |i| x[i]);
            for &(j, v) in saved.iter().rev() {
                x[j] = v;
            }
            gt
        };

        let dx = step_unchecked(gamma, reg, xk, g_tilde);
        tracker.step(p, k, xk, g, dx);
        x[k] = xk + dx;
        tracker.settle(p, &x);
        if q > 0 {
            if ring.len() == q {
                ring.pop_front();
            }
            ring.push_back(Commit { coord: k, old: xk });
        }
        if t % cfg.record_every == 0 {
            records.push(UpdateRecord {
                t,
                k,
                g,
                g_tilde,
                x_before: xk,
                dx,
                f_after: tracker.value(),
                w_hat: w_hat_unchecked(gamma, reg, xk, g),
                max_staleness,
                stale_reads,
            });
        }
    }
    let f_final = p.objective_unchecked(&x);
    Ok(AsyncTrace {
        trace: Trace { records, config: cfg.clone(), f_initial, f_final, final_x: x },
        policy: *policy,
    })
}

struct AdversaryGoal {
    gamma: f64,
    reg: crate::objective::Regularizer,
    xk: f64,
    g: f64,
    x0k: f64,
    target_amplitude: f64,
}

impl AdversaryGoal {
    /// Distance from the start after a step taken with gradient `gt`.
    fn drift(&self, gt: f64) -> f64 {
        (self.xk + step_unchecked(self.gamma, &self.reg, self.xk, gt) - self.x0k).abs()
    }
}

/// Chooses one staleness per window group. The smooth part is quadratic, so
/// the stale gradient is the fresh one plus `Σ_j A_kj (x̃_j − x_j)` and each
/// candidate can be scored in constant time. Two coordinate sweeps of a
/// greedy search over each coordinate's distinct past values.
fn adversarial_staleness(
    window: &WindowIndex,
    x: &[f64],
    row: (&[usize], &[f64]),
    goal: AdversaryGoal,
    out: &mut Vec<usize>,
) {
    out.clear();
    out.resize(window.groups.len(), 1);
    if goal.drift(goal.g) <= goal.target_amplitude {
        return;
    }
    let (cols, vals) = row;
    // (group, coupling A_kj, candidates as (staleness, value − current)).
    let mut options: Vec<(usize, f64, Vec<(usize, f64)>)> = Vec::new();
    for (gi, &(lo, hi)) in window.groups.iter().enumerate() {
        let j = window.entries[lo].0;
        let Ok(pos) = cols.binary_search(&j) else { continue };
        let coupling = vals[pos];
        if coupling == 0.0 {
            continue;
        }
        let mut cands = vec![(1usize, 0.0)];
        for e in &window.entries[lo..hi] {
            cands.push((e.1 + 1, e.2 - x[j]));
        }
        options.push((gi, coupling, cands));
    }
    let mut choice = vec![0usize; options.len()];
    let mut gt = goal.g;
    let mut best = goal.drift(gt);
    for _ in 0..2 {
        for (oi, (_, coupling, cands)) in options.iter().enumerate() {
            let base = gt - coupling * cands[choice[oi]].1;
            for (ci, &(_, shift)) in cands.iter().enumerate() {
                let cand_g = base + coupling * shift;
                let d = goal.drift(cand_g);
                if d < best {
                    best = d;
                    choice[oi] = ci;
                    gt = cand_g;
                }
            }
        }
    }
    for (oi, (gi, _, cands)) in options.iter().enumerate() {
        out[*gi] = cands[choice[oi]].0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Regularizer;
    use crate::seq_solver::run_sequential;
    use crate::sparse::CsrMatrix;

    fn chain(n: usize) -> ProblemInstance {
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((i, i, 2.0));
            if i + 1 < n {
                trips.push((i, i + 1, -0.5));
                trips.push((i + 1, i, -0.5));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, trips).unwrap();
        let b = (0..n).map(|i| (i as f64).sin()).collect();
        ProblemInstance::new(SmoothPart::quadratic(a, b).unwrap(), vec![Regularizer::L1 { lambda: 0.1 }; n]).unwrap()
    }

    #[test]
    fn synchronous_matches_sequential() {
        let p = chain(12);
        let cfg = SolverConfig::new(2.0, 500, 3, 12);
        let seq = run_sequential(&p, &cfg).unwrap();
        let sim = run_async_sim(&p, &cfg, &DelayPolicy::Synchronous).unwrap();
        assert_eq!(sim.trace, seq);
        assert!(sim.trace.records.iter().all(|r| r.grad_err_sq() == 0.0));
    }

    #[test]
    fn empty_run() {
        let p = chain(4);
        let sim = run_async_sim(&p, &SolverConfig::new(2.0, 0, 3, 4), &DelayPolicy::ScvUniform { q: 2 }).unwrap();
        assert!(sim.trace.records.is_empty());
    }

    #[test]
    fn staleness_stays_within_bound() {
        let p = chain(6);
        for policy in [
            DelayPolicy::UniformRandom { q: 3 },
            DelayPolicy::ScvUniform { q: 3 },
            DelayPolicy::Adversarial { q: 3, target_amplitude: 0.0 },
        ] {
            let sim = run_async_sim(&p, &SolverConfig::new(2.0, 400, 5, 6), &policy).unwrap();
            assert!(sim.trace.records.iter().all(|r| (1..=4).contains(&r.max_staleness)));
            assert!(sim.trace.records.iter().any(|r| r.stale_reads > 0), "{policy:?}");
        }
    }

    #[test]
    fn zero_window_adversary_is_synchronous() {
        assert_eq!(adversarial_policy(0, 0.5), DelayPolicy::Synchronous);
    }

    #[test]
    fn window_values() {
        let ring: VecDeque<Commit> =
            [Commit { coord: 2, old: 1.0 }, Commit { coord: 0, old: 5.0 }, Commit { coord: 2, old: 3.0 }].into();
        let mut w = WindowIndex::new();
        w.rebuild(&ring);
        // Coordinate 2 was committed at depths 3 (old 1.0) and 1 (old 3.0).
        let g2 = w.groups[1];
        assert_eq!(w.value_at(g2, 1), None);
        assert_eq!(w.value_at(g2, 2), Some(3.0));
        assert_eq!(w.value_at(g2, 3), Some(3.0));
        assert_eq!(w.value_at(g2, 4), Some(1.0));
    }
}

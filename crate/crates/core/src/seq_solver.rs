//! Sequential stochastic proximal coordinate descent with exact gradients.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::ProblemInstance;
use crate::prox::{step_unchecked, w_hat_unchecked};
use crate::rng::KeyedRng;

/// Full recomputation interval for the incrementally tracked objective.
pub(crate) const OBJECTIVE_REFRESH: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub gamma: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Keep one record every `record_every` updates (update 0 is always kept).
    pub record_every: usize,
    pub x0: Vec<f64>,
}

impl SolverConfig {
    /// A configuration starting from the origin, recording every update.
    pub fn new(gamma: f64, iterations: usize, seed: u64, n: usize) -> Self {
        Self { gamma, iterations, seed, record_every: 1, x0: vec![0.0; n] }
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_record_every(mut self, stride: usize) -> Self {
        self.record_every = stride;
        self
    }

    pub(crate) fn validate(&self, p: &ProblemInstance) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::NonPositiveGamma(self.gamma));
        }
        let l_max = p.l_max();
        if self.gamma < l_max {
            return Err(Error::StepTooSmall { gamma: self.gamma, l_max });
        }
        if self.x0.len() != p.n() {
            return Err(Error::Dimension(format!("x0 has length {} for n = {}", self.x0.len(), p.n())));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// One committed update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub t: usize,
    pub k: usize,
    /// Exact partial gradient at the state the update commits onto.
    pub g: f64,
    /// Gradient value actually used.
    pub g_tilde: f64,
    /// Value of `x_k` just before the commit.
    pub x_before: f64,
    pub dx: f64,
    pub f_after: f64,
    /// `Ŵ_k(g, x_before)` with the exact gradient.
    pub w_hat: f64,
    /// Largest staleness among the coordinates read; `1` means fresh.
    pub max_staleness: usize,
    /// Number of coordinates read at a stale value.
    pub stale_reads: usize,
}

impl UpdateRecord {
    pub fn grad_err_sq(&self) -> f64 {
        (self.g - self.g_tilde).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<UpdateRecord>,
    pub config: SolverConfig,
    /// `F(x0)`.
    pub f_initial: f64,
    /// `F` after the last update.
    pub f_final: f64,
    pub final_x: Vec<f64>,
}

impl Trace {
    /// `(t, F after update t)` for the recorded updates.
    pub fn objective_curve(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.records.iter().map(|r| (r.t, r.f_after))
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "k", "g", "g_tilde", "dx", "F", "w_hat"])?;
        for r in &self.records {
            out.write_record(&[
                r.t.to_string(),
                r.k.to_string(),
                r.g.to_string(),
                r.g_tilde.to_string(),
                r.dx.to_string(),
                r.f_after.to_string(),
                r.w_hat.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Tracks `F` along a run by exact one-coordinate increments, refreshed
/// periodically against a full evaluation.
pub(crate) struct ObjectiveTracker {
    value: f64,
    since_refresh: usize,
}

impl ObjectiveTracker {
    pub(crate) fn new(p: &ProblemInstance, x: &[f64]) -> Self {
        Self { value: p.objective_unchecked(x), since_refresh: 0 }
    }

    pub(crate) fn value(&self) -> f64 {
        self.value
    }

    /// Applies the change of moving `x_k` by `dx` (before `x` is mutated).
    #[inline]
    pub(crate) fn step(&mut self, p: &ProblemInstance, k: usize, x_k: f64, g: f64, dx: f64) {
        self.value += p.objective_change(k, x_k, g, dx);
    }

    /// Called after `x` has been mutated.
    #[inline]
    pub(crate) fn settle(&mut self, p: &ProblemInstance, x: &[f64]) {
        self.since_refresh += 1;
        if self.since_refresh == OBJECTIVE_REFRESH {
            self.value = p.objective_unchecked(x);
            self.since_refresh = 0;
        }
    }
}

pub fn run_sequential(p: &ProblemInstance, cfg: &SolverConfig) -> Result<Trace> {
    cfg.validate(p)?;
    let n = p.n();
    let gamma = cfg.gamma;
    let smooth = p.smooth();
    let mut rng = KeyedRng::new(cfg.seed);
    let mut x = cfg.x0.clone();
    let mut tracker = ObjectiveTracker::new(p, &x);
    let f_initial = tracker.value();
    let mut records = Vec::with_capacity(cfg.iterations / cfg.record_every + 1);

    for t in 0..cfg.iterations {
        let k = rng.coordinate(t as u64, n);
        let reg = p.reg(k);
        let g = smooth.grad_coord_with(k, |i| x[i]);
        let xk = x[k];
        let dx = step_unchecked(gamma, reg, xk, g);
        tracker.step(p, k, xk, g, dx);
        x[k] = xk + dx;
        tracker.settle(p, &x);
        if t % cfg.record_every == 0 {
            records.push(UpdateRecord {
                t,
                k,
                g,
                g_tilde: g,
                x_before: xk,
                dx,
                f_after: tracker.value(),
                w_hat: w_hat_unchecked(gamma, reg, xk, g),
                max_staleness: 1,
                stale_reads: 0,
            });
        }
    }
    let f_final = p.objective_unchecked(&x);
    Ok(Trace { records, config: cfg.clone(), f_initial, f_final, final_x: x })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProgressBound {
    /// `Σ_k Ŵ_k(∇_k f(x), x_k)`.
    pub prg: f64,
    /// The guaranteed fraction of the optimality gap.
    pub bound: f64,
    pub ok: bool,
}

const PROGRESS_SLACK: f64 = 1e-9;

fn total_progress(p: &ProblemInstance, x: &[f64], gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::NonPositiveGamma(gamma));
    }
    let grad = p.grad_full(x)?;
    Ok(grad.iter().enumerate().map(|(k, &g)| w_hat_unchecked(gamma, p.reg(k), x[k], g)).sum())
}

/// `Σ_k Ŵ_k ≥ α·(F(x) − F*)` with `α = μ_F/(μ_F + Γ − μ_f)`.
pub fn progress_lower_bound(p: &ProblemInstance, x: &[f64], gamma: f64) -> Result<ProgressBound> {
    let mu_f = p.mu_f().ok_or(Error::MissingMetadata("mu_f"))?;
    let mu_big_f = p.mu_big_f().ok_or(Error::MissingMetadata("mu_F"))?;
    let f_star = p.f_star().ok_or(Error::MissingMetadata("f_star"))?;
    let prg = total_progress(p, x, gamma)?;
    let gap = p.eval_objective(x)? - f_star;
    let bound = contraction(mu_big_f, mu_f, gamma) * gap;
    Ok(ProgressBound { prg, bound, ok: prg >= bound - PROGRESS_SLACK })
}

/// The merely convex variant: `Σ_k Ŵ_k ≥ min{1/2, gap/(2ΓR²)}·gap`, where
/// `radius` bounds the distance from the level set of `x` to the optimum.
pub fn progress_lower_bound_convex(
    p: &ProblemInstance,
    x: &[f64],
    gamma: f64,
    radius: f64,
) -> Result<ProgressBound> {
    let f_star = p.f_star().ok_or(Error::MissingMetadata("f_star"))?;
    let prg = total_progress(p, x, gamma)?;
    let gap = p.eval_objective(x)? - f_star;
    let bound = (0.5f64).min(gap / (2.0 * gamma * radius * radius)) * gap;
    Ok(ProgressBound { prg, bound, ok: prg >= bound - PROGRESS_SLACK })
}

/// `μ_F / (μ_F + Γ − μ_f)`.
pub fn contraction(mu_big_f: f64, mu_f: f64, gamma: f64) -> f64 {
    mu_big_f / (mu_big_f + gamma - mu_f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateVariant {
    /// Per-update factor `1 − α/n`.
    Sequential,
    /// Per-update factor `1 − α/(3n)`.
    Async,
}

/// `F0·(1 − c·α/n)^T`, with `c = 1` for the sequential bound and `1/3`
/// for the asynchronous one. `F0` is the initial optimality gap.
pub fn rate_bound_strongly_convex(
    mu_big_f: f64,
    mu_f: f64,
    gamma: f64,
    n: usize,
    iterations: usize,
    f0: f64,
    variant: RateVariant,
) -> Result<f64> {
    if gamma < mu_f {
        return Err(Error::InvalidInput(format!("gamma = {gamma} is below mu_f = {mu_f}")));
    }
    let c = match variant {
        RateVariant::Sequential => 1.0,
        RateVariant::Async => 1.0 / 3.0,
    };
    let factor = 1.0 - c * contraction(mu_big_f, mu_f, gamma) / n as f64;
    Ok(f0 * factor.powf(iterations as f64))
}

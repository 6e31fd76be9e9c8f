//! Path-wise verification of the per-update progress inequalities.
//!
//! For each update with exact gradient `g`, used gradient `g̃`, step `Δx`
//! and `err = g − g̃`, the drop `F(x^t) − F(x^{t+1})` must satisfy
//!
//! * certificate: `drop ≥ Ŵ(g, x_k) − err²/Γ`
//! * movement:    `drop ≥ (Γ/4)·Δx² − err²/Γ`
//! * combined:    `drop ≥ ½Ŵ(g, x_k) + (Γ/8)·Δx² − err²/Γ`
//!
//! whenever `Γ ≥ L_max`. The checker replays the trace from `x0`, recomputes
//! every quantity from the problem, and measures the drop exactly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::objective::ProblemInstance;
use crate::prox::{step_unchecked, w_hat_unchecked};
use crate::seq_solver::{ObjectiveTracker, Trace};

/// Residuals at or above `−RESIDUAL_TOL·max(1, |F(x^t)|)` pass.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityStats {
    pub min_residual: f64,
    /// Update at which the minimum occurred.
    pub worst_t: Option<usize>,
    pub violations: usize,
}

impl InequalityStats {
    fn new() -> Self {
        Self { min_residual: f64::INFINITY, worst_t: None, violations: 0 }
    }

    fn observe(&mut self, t: usize, residual: f64, tol: f64) {
        if residual < self.min_residual {
            self.min_residual = residual;
            self.worst_t = Some(t);
        }
        if residual < -tol {
            self.violations += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub updates: usize,
    pub certificate: InequalityStats,
    pub movement: InequalityStats,
    pub combined: InequalityStats,
    /// The inequalities are only guaranteed for `Γ ≥ L_max`.
    pub gamma_below_l_max: bool,
    pub pass: bool,
}

pub fn check_progress_lemmas(trace: &Trace, p: &ProblemInstance, gamma: f64) -> Result<LemmaReport> {
    let cfg = &trace.config;
    if !(gamma > 0.0) {
        return Err(Error::NonPositiveGamma(gamma));
    }
    if cfg.record_every != 1 || trace.records.len() != cfg.iterations {
        return Err(Error::Replay { t: 0, detail: "replay needs every update recorded".into() });
    }
    if cfg.x0.len() != p.n() {
        return Err(Error::Dimension(format!("trace x0 has length {} for n = {}", cfg.x0.len(), p.n())));
    }
    let mut x = cfg.x0.clone();
    let mut tracker = ObjectiveTracker::new(p, &x);
    let mut report = LemmaReport {
        updates: trace.records.len(),
        certificate: InequalityStats::new(),
        movement: InequalityStats::new(),
        combined: InequalityStats::new(),
        gamma_below_l_max: gamma < p.l_max(),
        pass: true,
    };

    for (idx, r) in trace.records.iter().enumerate() {
        let mismatch = |detail: String| Error::Replay { t: idx, detail };
        if r.t != idx || r.k >= p.n() {
            return Err(mismatch(format!("record has t = {}, k = {}", r.t, r.k)));
        }
        let k = r.k;
        let xk = x[k];
        if r.x_before != xk {
            return Err(mismatch(format!("x_before {} but replayed x_k = {xk}", r.x_before)));
        }
        let g = p.smooth().grad_coord_with(k, |i| x[i]);
        if (g - r.g).abs() > 1e-12 * g.abs().max(1.0) {
            return Err(mismatch(format!("recorded gradient {} but replayed {g}", r.g)));
        }
        let reg = p.reg(k);
        let dx = step_unchecked(gamma, reg, xk, r.g_tilde);
        if dx != r.dx {
            return Err(mismatch(format!("recorded step {} but the prox step is {dx}", r.dx)));
        }

        let f_before = tracker.value();
        let drop = -p.objective_change(k, xk, g, dx);
        let err_term = (g - r.g_tilde).powi(2) / gamma;
        let w = w_hat_unchecked(gamma, reg, xk, g);
        let tol = RESIDUAL_TOL * f_before.abs().max(1.0);
        report.certificate.observe(idx, drop - (w - err_term), tol);
        report.movement.observe(idx, drop - (0.25 * gamma * dx * dx - err_term), tol);
        report.combined.observe(idx, drop - (0.5 * w + 0.125 * gamma * dx * dx - err_term), tol);

        tracker.step(p, k, xk, g, dx);
        x[k] = xk + dx;
        tracker.settle(p, &x);
    }
    report.pass =
        report.certificate.violations + report.movement.violations + report.combined.violations == 0;
    Ok(report)
}

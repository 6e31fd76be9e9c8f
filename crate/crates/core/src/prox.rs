//! Per-coordinate proximal step.
//!
//! For a coordinate with current value `x`, gradient estimate `g`, step
//! parameter `Γ` and regularizer `Ψ`, the update minimizes
//!
//! ```text
//! W(d) = g·d + Γd²/2 + Ψ(x + d) − Ψ(x)
//! ```
//!
//! over `d ∈ ℝ`. `d̂` is the minimizer and `Ŵ = −W(d̂) ≥ 0` the guaranteed
//! progress certificate. `W` is `Γ`-strongly convex in `d`, so the minimizer
//! is unique and every variant has a closed form.

use crate::error::{Error, Result};
use crate::objective::Regularizer;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    pub gamma: f64,
    pub reg: Regularizer,
    pub x: f64,
    pub g: f64,
}

impl StepContext {
    pub fn new(gamma: f64, reg: Regularizer, x: f64, g: f64) -> Self {
        Self { gamma, reg, x, g }
    }

    fn check(&self) -> Result<()> {
        if self.gamma > 0.0 {
            Ok(())
        } else {
            Err(Error::NonPositiveGamma(self.gamma))
        }
    }
}

/// `W(d, g, x)`.
#[inline]
pub fn w_value(d: f64, ctx: &StepContext) -> f64 {
    ctx.g * d + 0.5 * ctx.gamma * d * d + ctx.reg.eval(ctx.x + d) - ctx.reg.eval(ctx.x)
}

fn soft_threshold(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// Closed-form `d̂(g, x)`; `gamma` must be positive.
#[inline]
pub(crate) fn step_unchecked(gamma: f64, reg: &Regularizer, x: f64, g: f64) -> f64 {
    match *reg {
        Regularizer::Zero => -g / gamma,
        Regularizer::SquaredL2 { lambda } => -(g + lambda * x) / (gamma + lambda),
        Regularizer::L1 { lambda } => soft_threshold(x - g / gamma, lambda / gamma) - x,
        Regularizer::Hinge { lambda } => {
            // Stationarity on each linear piece; the kink wins when neither
            // piece's candidate lies inside it.
            let right = x - (g + lambda) / gamma;
            let left = x - g / gamma;
            let z = if right > 0.0 {
                right
            } else if left < 0.0 {
                left
            } else {
                0.0
            };
            z - x
        }
    }
}

/// `Ŵ(g, x) = −W(d̂(g, x), g, x)`; `gamma` must be positive.
#[inline]
pub(crate) fn w_hat_unchecked(gamma: f64, reg: &Regularizer, x: f64, g: f64) -> f64 {
    let ctx = StepContext { gamma, reg: *reg, x, g };
    -w_value(step_unchecked(gamma, reg, x, g), &ctx)
}

/// The minimizer `d̂` of `W(·, g, x)`.
pub fn prox_step(ctx: &StepContext) -> Result<f64> {
    ctx.check()?;
    Ok(step_unchecked(ctx.gamma, &ctx.reg, ctx.x, ctx.g))
}

/// `Ŵ(g, x)`, the negated minimum of `W`.
pub fn w_hat(ctx: &StepContext) -> Result<f64> {
    ctx.check()?;
    Ok(w_hat_unchecked(ctx.gamma, &ctx.reg, ctx.x, ctx.g))
}

/// Bracket that always contains `d̂`: the minimizer moves at most
/// `(|g| + λ)/Γ` away from zero for every shipped regularizer.
pub fn oracle_bracket(ctx: &StepContext) -> (f64, f64) {
    let reach = (ctx.g.abs() + ctx.reg.lambda() * (1.0 + ctx.x.abs())) / ctx.gamma + 1.0;
    (-reach, reach)
}

/// Golden-section minimization of `W(·)` over `[lo, hi]`, independent of the
/// closed forms. Returns `d` with `|d − d̂| ≤ tol`.
///
/// A bracket narrower than `tol` returns `lo`. Otherwise the bracket must
/// contain the minimizer, which is checked through the sign of `W`'s slope at
/// both ends.
pub fn prox_oracle(ctx: &StepContext, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    ctx.check()?;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("need lo < hi and tol > 0, got [{lo}, {hi}], {tol}")));
    }
    if hi - lo <= tol * (1.0 + 1e-9) {
        return Ok(lo);
    }
    // The search runs over the new value `z = x + d`, where differences of
    // `Ψ` are computed without rounding `x + d` at every probe.
    let probe = tol * 1e-3;
    let (zlo, zhi) = (ctx.x + lo, ctx.x + hi);
    if w_diff(zlo + probe, zlo, ctx) > 0.0 || w_diff(zhi - probe, zhi, ctx) > 0.0 {
        return Err(Error::Bracket { lo, hi });
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (zlo, zhi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    while b - a > tol {
        if w_diff(c, d, ctx) <= 0.0 {
            b = d;
            d = c;
            c = b - inv_phi * (b - a);
        } else {
            a = c;
            c = d;
            d = a + inv_phi * (b - a);
        }
    }
    Ok(0.5 * (a + b) - ctx.x)
}

/// `W(z1 − x) − W(z2 − x)` for new values `z1`, `z2`.
fn w_diff(z1: f64, z2: f64, ctx: &StepContext) -> f64 {
    let h = z1 - z2;
    let quad = ctx.gamma * (0.5 * (z1 + z2) - ctx.x);
    // On a shared linear piece of Ψ the difference factors through `h`, which
    // keeps the sign of `W(z1) − W(z2)` reliable next to the minimizer.
    let piece_slope = match ctx.reg {
        Regularizer::Zero => Some(0.0),
        Regularizer::L1 { lambda } if z1 > 0.0 && z2 > 0.0 => Some(lambda),
        Regularizer::L1 { lambda } if z1 < 0.0 && z2 < 0.0 => Some(-lambda),
        Regularizer::Hinge { lambda } if z1 > 0.0 && z2 > 0.0 => Some(lambda),
        Regularizer::Hinge { .. } if z1 <= 0.0 && z2 <= 0.0 => Some(0.0),
        Regularizer::SquaredL2 { lambda } => Some(0.5 * lambda * (z1 + z2)),
        _ => None,
    };
    match piece_slope {
        Some(s) => h * ((ctx.g + s) + quad),
        None => h * (ctx.g + quad) + ctx.reg.eval(z1) - ctx.reg.eval(z2),
    }
}

#![allow(dead_code)]

use std::io::Write;

use acd::prox::{oracle_bracket, prox_oracle, prox_step, w_hat, w_value, StepContext};
use acd::Regularizer;
use rand::Rng;

/// Writes straight to the process stderr so the line survives output capture.
pub fn report(line: &str) {
    match std::fs::OpenOptions::new().write(true).open("/dev/stderr") {
        Ok(mut f) => {
            let _ = writeln!(f, "{line}");
        }
        Err(_) => eprintln!("{line}"),
    }
}

pub fn reg_of(variant: usize, lambda: f64) -> Regularizer {
    match variant % 4 {
        0 => Regularizer::Zero,
        1 => Regularizer::L1 { lambda },
        2 => Regularizer::SquaredL2 { lambda },
        _ => Regularizer::Hinge { lambda },
    }
}

pub const REG_NAMES: [&str; 4] = ["zero", "l1", "squared_l2", "hinge"];

/// Two contexts sharing a regularizer and step parameter.
#[derive(Debug, Clone, Copy)]
pub struct ContextPair {
    pub gamma: f64,
    pub reg: Regularizer,
    pub x1: f64,
    pub g1: f64,
    pub x2: f64,
    pub g2: f64,
}

pub fn random_pair(rng: &mut impl Rng, variant: usize) -> ContextPair {
    let reg = reg_of(variant, rng.gen_range(0.0..5.0));
    ContextPair {
        gamma: rng.gen_range(0.1..10.0),
        reg,
        x1: rng.gen_range(-5.0..5.0),
        g1: rng.gen_range(-10.0..10.0),
        x2: rng.gen_range(-5.0..5.0),
        g2: rng.gen_range(-10.0..10.0),
    }
}

/// Names of the prox invariants violated by `pair`; empty when all hold.
pub fn prox_violations(pair: &ContextPair, with_oracle: bool) -> Vec<&'static str> {
    let ContextPair { gamma, reg, x1, g1, x2, g2 } = *pair;
    let ctx = |x, g| StepContext::new(gamma, reg, x, g);
    let d = |x, g| prox_step(&ctx(x, g)).unwrap();
    let w = |x, g| w_hat(&ctx(x, g)).unwrap();
    let mut bad = Vec::new();

    let (d11, w11) = (d(x1, g1), w(x1, g1));
    if w11 < -1e-12 {
        bad.push("nonnegativity");
    }
    if w11 < 0.5 * gamma * d11 * d11 - 1e-9 {
        bad.push("quadratic-lower-bound");
    }
    // Y(d) = W(d) − Γd²/2; the derived three-point form is Y(0) ≥ Y(d̂) + Γd̂².
    let y = w_value(d11, &ctx(x1, g1)) - 0.5 * gamma * d11 * d11;
    if 0.0 < y + gamma * d11 * d11 - 1e-9 {
        bad.push("three-point");
    }
    let d12 = d(x1, g2);
    if (d11 - d12).abs() > (g1 - g2).abs() / gamma + 1e-12 {
        bad.push("g-shift");
    }
    let d21 = d(x2, g1);
    if (d11 - d21).abs() > (x1 - x2).abs() + 1e-12 {
        bad.push("x-shift");
    }
    let d22 = d(x2, g2);
    if (d11 - d22).abs() > (x1 - x2).abs() + (g1 - g2).abs() / gamma + 1e-12 {
        bad.push("combined-shift");
    }
    if reg.is_zero() && (d11 - d22).abs() > (g1 - g2).abs() / gamma + 1e-12 {
        bad.push("combined-shift-zero");
    }
    let w12 = w(x1, g2);
    if w11 < 2.0 / 3.0 * w12 - 4.0 / (3.0 * gamma) * (g1 - g2).powi(2) - 1e-9 {
        bad.push("w-hat-shift");
    }
    if with_oracle {
        let c = ctx(x1, g1);
        let (lo, hi) = oracle_bracket(&c);
        match prox_oracle(&c, lo, hi, 1e-9) {
            Ok(o) if (o - d11).abs() <= 1e-6 => {}
            _ => bad.push("oracle-agreement"),
        }
    }
    bad
}

//! Coordinate Lipschitz parameters, diagonal rescaling, and the admissible
//! overlap bound.
//!
//! Both smooth kinds have a constant Hessian `H` (`A`, or `MᵀM`), so the
//! pairwise parameters are exact: `L_jk = |H_jk|`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::objective::{ProblemInstance, SmoothPart};
use crate::rng::{stream_rng, AUX_STREAM};
use crate::sparse::CsrMatrix;

const POWER_MAX_ITERS: usize = 1000;
const POWER_REL_TOL: f64 = 1e-6;

/// The constant in the overlap bound `q ≤ min{√n, Γ√n / L_res̄} / 102`.
pub const PARALLELISM_CONSTANT: f64 = 102.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzProfile {
    /// `L_jj` for each coordinate.
    pub l_diag: Vec<f64>,
    /// `max_{j,k} L_jk`.
    pub l_max: f64,
    /// Largest gradient response to a single-coordinate move.
    pub l_res: f64,
    /// `max_k (Σ_j L_kj²)^{1/2}`.
    pub l_res_bar: f64,
    /// Spectral norm estimate of the Hessian.
    pub l_global: f64,
}

/// Profile of `½xᵀAx + bᵀx`.
pub fn profile_quadratic(a: &CsrMatrix) -> Result<LipschitzProfile> {
    if !a.is_symmetric() {
        return Err(Error::InvalidInput("Lipschitz profile needs a symmetric matrix".into()));
    }
    let row_norm = (0..a.nrows())
        .map(|i| a.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Ok(LipschitzProfile {
        l_diag: a.diagonal(),
        l_max: a.max_abs(),
        // The matrix is symmetric, so column norms equal row norms.
        l_res: row_norm,
        l_res_bar: row_norm,
        l_global: spectral_norm(a),
    })
}

pub fn profile(smooth: &SmoothPart) -> Result<LipschitzProfile> {
    profile_quadratic(&smooth.hessian())
}

/// Power iteration for the largest `|eigenvalue|` of a symmetric matrix.
pub fn spectral_norm(a: &CsrMatrix) -> f64 {
    power_iteration(a.nrows(), POWER_MAX_ITERS, POWER_REL_TOL, |v| a.mul_vec(v))
}

/// Smallest eigenvalue of a symmetric matrix by power iteration on
/// `σI − A`, with `σ` a Gershgorin upper bound. Meant for desk-scale
/// instances; convergence slows with the spectral gap.
pub fn min_eigenvalue(a: &CsrMatrix, max_iters: usize, rel_tol: f64) -> f64 {
    let sigma = (0..a.nrows()).map(|i| a.row(i).1.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let top = power_iteration(a.nrows(), max_iters, rel_tol, |v| {
        let av = a.mul_vec(v);
        v.iter().zip(av).map(|(vi, avi)| sigma * vi - avi).collect()
    });
    sigma - top
}

fn power_iteration(n: usize, max_iters: usize, rel_tol: f64, apply: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    if n == 0 {
        return 0.0;
    }
    // A fixed, non-symmetric start vector avoids starting orthogonal to the
    // top eigenvector for the structured matrices used here.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618_033_988_75).fract()).collect();
    normalize(&mut v);
    let mut est = 0.0;
    for _ in 0..max_iters {
        let mut w = apply(&v);
        let norm = normalize(&mut w);
        if norm == 0.0 {
            return 0.0;
        }
        let done = (norm - est).abs() <= rel_tol * norm;
        est = norm;
        v = w;
        if done {
            break;
        }
    }
    est
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Scaling `s_j = (max_k A_kk / A_jj)^{1/2}` that equalizes the diagonal.
pub fn diagonal_scaling(p: &ProblemInstance) -> Result<Vec<f64>> {
    let SmoothPart::Quadratic { a, .. } = p.smooth() else {
        return Err(Error::InvalidInput("diagonal rescaling needs a quadratic smooth part".into()));
    };
    let diag = a.diagonal();
    if let Some(j) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::InvalidInput(format!("diagonal entry {j} is not positive")));
    }
    let top = diag.iter().copied().fold(0.0, f64::max);
    Ok(diag.iter().map(|&d| (top / d).sqrt()).collect())
}

/// Substitutes `x_j = s_j·x'_j` so that every diagonal entry of the new
/// quadratic equals the old maximum. `F'(x') = F(x)` pointwise, so the
/// optimum value carries over; strong-convexity moduli do not and are
/// dropped unless the scaling is the identity.
pub fn rescale_uniform_diagonal(p: &ProblemInstance) -> Result<ProblemInstance> {
    let s = diagonal_scaling(p)?;
    if s.iter().all(|&v| v == 1.0) {
        return Ok(p.clone());
    }
    let SmoothPart::Quadratic { a, b } = p.smooth() else { unreachable!("checked by diagonal_scaling") };
    let a2 = a.scale_symmetric(&s);
    let b2: Vec<f64> = b.iter().zip(&s).map(|(bi, si)| bi * si).collect();
    let regs = p.regs().iter().zip(&s).map(|(r, &si)| r.rescaled(si)).collect();
    p.with_parts(SmoothPart::quadratic(a2, b2)?, regs)
}

/// `⌊min{√n/102, Γ√n/(102·L_res̄)}⌋`.
pub fn max_parallelism(profile: &LipschitzProfile, gamma: f64, n: usize) -> Result<usize> {
    if gamma < profile.l_max {
        return Err(Error::StepTooSmall { gamma, l_max: profile.l_max });
    }
    let root = (n as f64).sqrt();
    let mut bound = root / PARALLELISM_CONSTANT;
    if profile.l_res_bar > 0.0 {
        bound = bound.min(gamma * root / (PARALLELISM_CONSTANT * profile.l_res_bar));
    }
    Ok(bound.floor().max(0.0) as usize)
}

/// Empirical `L̂_jk = max_probe |∇_k f(x + r e_j) − ∇_k f(x)| / |r|` as a
/// dense `n × n` array (row `j` is the moved coordinate).
pub fn estimate_coord_lipschitz(smooth: &SmoothPart, probes: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = smooth.dim();
    let mut rng = stream_rng(seed, AUX_STREAM);
    let mut est = vec![vec![0.0f64; n]; n];
    let grad = |x: &[f64]| -> Vec<f64> { (0..n).map(|k| smooth.grad_coord_with(k, |i| x[i])).collect() };
    for _ in 0..probes.max(1) {
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let base = grad(&x);
        for (j, row) in est.iter_mut().enumerate() {
            let r = rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let old = x[j];
            x[j] = old + r;
            let moved = grad(&x);
            x[j] = old;
            for (k, e) in row.iter_mut().enumerate() {
                *e = f64::max(*e, (moved[k] - base[k]).abs() / r.abs());
            }
        }
    }
    est
}

//! Synthetic problem generators.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::async_sim::lower_bound_instance;
use crate::error::{Error, Result};
use crate::objective::{ProblemInstance, Regularizer, SmoothPart};
use crate::rng::{stream_rng, AUX_STREAM};
use crate::sparse::CsrMatrix;

/// A generator invocation, as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    RandomQuadratic { n: usize, row_nnz: usize, mu: f64, lmax: f64, seed: u64 },
    Lasso { m: usize, n: usize, density: f64, lambda: f64, seed: u64 },
    LowerBound { n: usize, c: f64, seed: u64 },
}

/// A generated problem with its natural starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub problem: ProblemInstance,
    pub x0: Vec<f64>,
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<Generated> {
        match *self {
            GeneratorSpec::RandomQuadratic { n, row_nnz, mu, lmax, seed } => {
                Ok(Generated { problem: gen_random_quadratic(n, row_nnz, mu, lmax, seed)?, x0: vec![0.0; n] })
            }
            GeneratorSpec::Lasso { m, n, density, lambda, seed } => {
                Ok(Generated { problem: gen_lasso(m, n, density, lambda, seed)?, x0: vec![0.0; n] })
            }
            GeneratorSpec::LowerBound { n, c, seed } => {
                let (problem, x0) = lower_bound_instance(n, c, seed)?;
                Ok(Generated { problem, x0 })
            }
        }
    }
}

fn nonzero_weight(rng: &mut ChaCha8Rng) -> f64 {
    let v: f64 = rng.gen_range(0.1..1.0);
    if rng.gen_bool(0.5) {
        v
    } else {
        -v
    }
}

/// `A = σ·BᵀB + μI` with `B` upper-banded of width `w = ⌊(s+1)/2⌋`, so each
/// row of `A` has at most `2w − 1 ≤ s` nonzeros. `σ` puts the largest
/// diagonal entry at `lmax`, which is then also `L_max` since `A` is PSD.
/// `b` is uniform on `[−1, 1]`; `μ_f = μ_F = μ`, and the optimum value is
/// computed by conjugate gradients when `μ > 0`.
pub fn gen_random_quadratic(n: usize, row_nnz: usize, mu: f64, lmax: f64, seed: u64) -> Result<ProblemInstance> {
    if n == 0 || row_nnz == 0 || row_nnz > n {
        return Err(Error::InvalidInput(format!("need 1 <= row_nnz <= n, got row_nnz = {row_nnz}, n = {n}")));
    }
    if !(mu >= 0.0 && lmax >= mu && lmax > 0.0) {
        return Err(Error::InvalidInput(format!("need 0 <= mu <= lmax and lmax > 0, got mu = {mu}, lmax = {lmax}")));
    }
    let mut rng = stream_rng(seed, AUX_STREAM + 3);
    let width = row_nnz.div_ceil(2);
    let mut trips = Vec::with_capacity(n * width);
    for i in 0..n {
        for j in i..(i + width).min(n) {
            trips.push((i, j, nonzero_weight(&mut rng)));
        }
    }
    let b_mat = CsrMatrix::from_triplets(n, n, trips)?;
    let gram = b_mat.gram();
    let top = gram.diagonal().into_iter().fold(0.0, f64::max);
    let sigma = (lmax - mu) / top;
    let trips = gram
        .triplets()
        .map(|(i, j, v)| (i, j, sigma * v))
        .chain((0..n).map(|i| (i, i, mu)));
    let a = CsrMatrix::from_triplets(n, n, trips)?;
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut p = ProblemInstance::new(SmoothPart::quadratic(a, b)?, vec![Regularizer::Zero; n])?
        .with_strong_convexity(mu, mu)?;
    if mu > 0.0 {
        let SmoothPart::Quadratic { a, b } = p.smooth() else { unreachable!() };
        let neg_b: Vec<f64> = b.iter().map(|v| -v).collect();
        let x_star = conjugate_gradient(a, &neg_b, 1e-14, 20 * n + 100);
        let f_star = p.eval_objective(&x_star)?;
        p = p.with_f_star(f_star);
    }
    Ok(p)
}

/// Solves `Ax = rhs` for symmetric positive definite `A`.
pub fn conjugate_gradient(a: &CsrMatrix, rhs: &[f64], rel_tol: f64, max_iters: usize) -> Vec<f64> {
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let mut x = vec![0.0; rhs.len()];
    let mut r = rhs.to_vec();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    let stop = rel_tol * rel_tol * rr;
    for _ in 0..max_iters {
        if rr <= stop || rr == 0.0 {
            break;
        }
        let ad = a.mul_vec(&d);
        let step = rr / dot(&d, &ad);
        for i in 0..x.len() {
            x[i] += step * d[i];
            r[i] -= step * ad[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for i in 0..d.len() {
            d[i] = r[i] + beta * d[i];
        }
        rr = rr_next;
    }
    x
}

/// Sparse least squares with an `ℓ1` penalty. Each entry of `M` is nonzero
/// with probability `density` (every column gets at least one entry), a
/// planted vector with about a tenth of its entries nonzero generates
/// `y = Mx† + noise`. The optimum value comes from cyclic exact coordinate
/// minimization run to stagnation.
pub fn gen_lasso(m: usize, n: usize, density: f64, lambda: f64, seed: u64) -> Result<ProblemInstance> {
    if m == 0 || n == 0 || !(density > 0.0 && density <= 1.0) || !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need m, n >= 1, 0 < density <= 1, lambda >= 0; got {m}, {n}, {density}, {lambda}"
        )));
    }
    let mut rng = stream_rng(seed, AUX_STREAM + 4);
    let mut trips = Vec::new();
    for j in 0..n {
        let mut any = false;
        for i in 0..m {
            if rng.gen_bool(density) {
                trips.push((i, j, rng.gen_range(-1.0..1.0)));
                any = true;
            }
        }
        if !any {
            trips.push((rng.gen_range(0..m), j, nonzero_weight(&mut rng)));
        }
    }
    let mat = CsrMatrix::from_triplets(m, n, trips)?;
    let planted: Vec<f64> =
        (0..n).map(|_| if rng.gen_bool(0.1) { rng.gen_range(-2.0..2.0) } else { 0.0 }).collect();
    let y: Vec<f64> = mat.mul_vec(&planted).into_iter().map(|v| v + 0.01 * rng.gen_range(-1.0..1.0)).collect();
    let p = ProblemInstance::new(SmoothPart::least_squares(mat, y)?, vec![Regularizer::L1 { lambda }; n])?;
    let x_star = cyclic_lasso_solve(&p, 1e-15, 200_000);
    let f_star = p.eval_objective(&x_star)?;
    Ok(p.with_f_star(f_star))
}

/// Cyclic exact coordinate minimization for a least-squares smooth part,
/// maintaining the residual `Mx − y`. Stops when a full sweep changes `F` by
/// at most `rel_tol·max(1, |F|)`.
pub fn cyclic_lasso_solve(p: &ProblemInstance, rel_tol: f64, max_sweeps: usize) -> Vec<f64> {
    let SmoothPart::LeastSquares { mt, y, .. } = p.smooth() else {
        panic!("cyclic_lasso_solve needs a least-squares smooth part");
    };
    let n = p.n();
    let curv: Vec<f64> = (0..n).map(|k| p.smooth().curvature(k)).collect();
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = y.iter().map(|v| -v).collect();
    let mut f_prev = p.objective_unchecked(&x);
    for _ in 0..max_sweeps {
        for k in 0..n {
            if curv[k] == 0.0 {
                continue;
            }
            let (rows, vals) = mt.row(k);
            let g: f64 = rows.iter().zip(vals).map(|(&i, &v)| v * r[i]).sum();
            let dx = crate::prox::step_unchecked(curv[k], p.reg(k), x[k], g);
            if dx != 0.0 {
                x[k] += dx;
                for (&i, &v) in rows.iter().zip(vals) {
                    r[i] += v * dx;
                }
            }
        }
        let f = p.objective_unchecked(&x);
        if (f_prev - f).abs() <= rel_tol * f.abs().max(1.0) {
            break;
        }
        f_prev = f;
    }
    x
}

/// Bound on the distance to the optimum from the level set of `x`:
/// `√(2(F(x) − F*)/μ_f)`, using the declared metadata.
pub fn level_set_radius(p: &ProblemInstance, x: &[f64]) -> Option<f64> {
    let mu = p.mu_f().filter(|&m| m > 0.0)?;
    let gap = p.eval_objective(x).ok()? - p.f_star()?;
    Some((2.0 * gap.max(0.0) / mu).sqrt())
}

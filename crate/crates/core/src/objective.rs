//! Composite objectives `F(x) = f(x) + Σ_k Ψ_k(x_k)`.
//!
//! The smooth part is either a quadratic `½xᵀAx + bᵀx` with a symmetric `A`,
//! or a least-squares term `½‖Mx − y‖²`. Both have constant Hessians, so the
//! coordinate Lipschitz parameters are exact and single-coordinate changes
//! of `F` have closed forms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// A univariate convex regularizer applied to one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Regularizer {
    Zero,
    /// `λ|v|`
    L1 { lambda: f64 },
    /// `λv²/2`
    SquaredL2 { lambda: f64 },
    /// `λ·max{0, v}`
    Hinge { lambda: f64 },
}

impl Regularizer {
    pub fn lambda(&self) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda }
            | Regularizer::SquaredL2 { lambda }
            | Regularizer::Hinge { lambda } => lambda,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Regularizer::Zero)
    }

    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => lambda * v.abs(),
            Regularizer::SquaredL2 { lambda } => 0.5 * lambda * v * v,
            Regularizer::Hinge { lambda } => lambda * v.max(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lambda = self.lambda();
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("regularizer weight {lambda} must be finite and >= 0")));
        }
        Ok(())
    }

    /// The regularizer seen through the substitution `v = s·v'` with `s > 0`.
    pub fn rescaled(&self, s: f64) -> Self {
        match *self {
            Regularizer::Zero => Regularizer::Zero,
            Regularizer::L1 { lambda } => Regularizer::L1 { lambda: lambda * s },
            Regularizer::Hinge { lambda } => Regularizer::Hinge { lambda: lambda * s },
            Regularizer::SquaredL2 { lambda } => Regularizer::SquaredL2 { lambda: lambda * s * s },
        }
    }
}

pub fn psi_eval(reg: &Regularizer, v: f64) -> f64 {
    reg.eval(v)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SmoothPart {
    /// `½xᵀAx + bᵀx`, `A` stored in full.
    Quadratic { a: CsrMatrix, b: Vec<f64> },
    /// `½‖Mx − y‖²`; `mt` caches `Mᵀ` so a coordinate gradient walks one column.
    LeastSquares { m: CsrMatrix, mt: CsrMatrix, y: Vec<f64> },
}

impl SmoothPart {
    pub fn quadratic(a: CsrMatrix, b: Vec<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!("A is {}x{}", a.nrows(), a.ncols())));
        }
        if b.len() != a.nrows() {
            return Err(Error::Dimension(format!("b has length {} for n = {}", b.len(), a.nrows())));
        }
        if !a.is_symmetric() {
            return Err(Error::InvalidInput("quadratic matrix is not symmetric".into()));
        }
        Ok(SmoothPart::Quadratic { a, b })
    }

    pub fn least_squares(m: CsrMatrix, y: Vec<f64>) -> Result<Self> {
        if y.len() != m.nrows() {
            return Err(Error::Dimension(format!("y has length {} for {} rows", y.len(), m.nrows())));
        }
        let mt = m.transpose();
        Ok(SmoothPart::LeastSquares { m, mt, y })
    }

    pub fn dim(&self) -> usize {
        match self {
            SmoothPart::Quadratic { a, .. } => a.nrows(),
            SmoothPart::LeastSquares { m, .. } => m.ncols(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SmoothPart::Quadratic { a, b } => (0..a.nrows())
                .map(|i| x[i] * (0.5 * a.row_dot(i, x) + b[i]))
                .sum(),
            SmoothPart::LeastSquares { m, y, .. } => {
                0.5 * (0..m.nrows()).map(|i| (m.row_dot(i, x) - y[i]).powi(2)).sum::<f64>()
            }
        }
    }

    /// `∇_k f` at the point whose coordinates are produced by `x`.
    ///
    /// Reads only the coordinates `∇_k f` depends on, which lets callers
    /// overlay stale or shared-memory values without materializing a vector.
    #[inline]
    pub fn grad_coord_with(&self, k: usize, x: impl Fn(usize) -> f64) -> f64 {
        match self {
            SmoothPart::Quadratic { a, b } => a.row_dot_with(k, &x) + b[k],
            SmoothPart::LeastSquares { m, mt, y } => {
                let (rows, vals) = mt.row(k);
                rows.iter()
                    .zip(vals)
                    .map(|(&i, &mik)| mik * (m.row_dot_with(i, &x) - y[i]))
                    .sum()
            }
        }
    }

    /// `∂²f/∂x_k²`, constant for both smooth kinds.
    pub fn curvature(&self, k: usize) -> f64 {
        match self {
            SmoothPart::Quadratic { a, .. } => a.get(k, k),
            SmoothPart::LeastSquares { mt, .. } => mt.row(k).1.iter().map(|v| v * v).sum(),
        }
    }

    /// The (constant) Hessian: `A`, or `MᵀM`.
    pub fn hessian(&self) -> CsrMatrix {
        match self {
            SmoothPart::Quadratic { a, .. } => a.clone(),
            SmoothPart::LeastSquares { m, .. } => m.gram(),
        }
    }

    /// `max_{j,k} |∂²f/∂x_j∂x_k|`. Both kinds have PSD Hessians, so for
    /// least squares the maximum sits on the diagonal.
    pub fn l_max(&self) -> f64 {
        match self {
            SmoothPart::Quadratic { a, .. } => a.max_abs(),
            SmoothPart::LeastSquares { .. } => {
                (0..self.dim()).map(|k| self.curvature(k)).fold(0.0, f64::max)
            }
        }
    }

    /// Coordinates that `∇_k f` reads.
    pub fn support(&self, k: usize) -> Vec<usize> {
        match self {
            SmoothPart::Quadratic { a, .. } => a.row(k).0.to_vec(),
            SmoothPart::LeastSquares { m, mt, .. } => {
                let mut cols: Vec<usize> =
                    mt.row(k).0.iter().flat_map(|&i| m.row(i).0.iter().copied()).collect();
                cols.sort_unstable();
                cols.dedup();
                cols
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    n: usize,
    smooth: SmoothPart,
    regs: Vec<Regularizer>,
    mu_f: Option<f64>,
    mu_big_f: Option<f64>,
    f_star: Option<f64>,
}

impl ProblemInstance {
    pub fn new(smooth: SmoothPart, regs: Vec<Regularizer>) -> Result<Self> {
        let n = smooth.dim();
        if regs.len() != n {
            return Err(Error::Dimension(format!("{} regularizers for n = {n}", regs.len())));
        }
        for r in &regs {
            r.validate()?;
        }
        Ok(Self { n, smooth, regs, mu_f: None, mu_big_f: None, f_star: None })
    }

    /// Declares strong-convexity moduli of `f` and `F`.
    pub fn with_strong_convexity(mut self, mu_f: f64, mu_big_f: f64) -> Result<Self> {
        if !(mu_f >= 0.0 && mu_big_f >= 0.0) {
            return Err(Error::InvalidInput("strong convexity moduli must be >= 0".into()));
        }
        if mu_big_f < mu_f {
            return Err(Error::InvalidInput(format!("mu_F = {mu_big_f} is below mu_f = {mu_f}")));
        }
        self.mu_f = Some(mu_f);
        self.mu_big_f = Some(mu_big_f);
        Ok(self)
    }

    pub fn with_f_star(mut self, f_star: f64) -> Self {
        self.f_star = Some(f_star);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn smooth(&self) -> &SmoothPart {
        &self.smooth
    }

    pub fn regs(&self) -> &[Regularizer] {
        &self.regs
    }

    pub fn reg(&self, k: usize) -> &Regularizer {
        &self.regs[k]
    }

    pub fn mu_f(&self) -> Option<f64> {
        self.mu_f
    }

    pub fn mu_big_f(&self) -> Option<f64> {
        self.mu_big_f
    }

    pub fn f_star(&self) -> Option<f64> {
        self.f_star
    }

    pub fn is_smooth_only(&self) -> bool {
        self.regs.iter().all(Regularizer::is_zero)
    }

    pub fn l_max(&self) -> f64 {
        self.smooth.l_max()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!("x has length {} for n = {}", x.len(), self.n)));
        }
        Ok(())
    }

    pub fn eval_f(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.smooth.eval(x))
    }

    /// `F(x) = f(x) + Σ Ψ_k(x_k)`.
    pub fn eval_objective(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.objective_unchecked(x))
    }

    pub(crate) fn objective_unchecked(&self, x: &[f64]) -> f64 {
        self.smooth.eval(x) + self.regs.iter().zip(x).map(|(r, &v)| r.eval(v)).sum::<f64>()
    }

    pub fn grad_coord(&self, x: &[f64], j: usize) -> Result<f64> {
        self.check_dim(x)?;
        if j >= self.n {
            return Err(Error::IndexOutOfRange { index: j, n: self.n });
        }
        Ok(self.smooth.grad_coord_with(j, |i| x[i]))
    }

    pub fn grad_full(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok((0..self.n).map(|j| self.smooth.grad_coord_with(j, |i| x[i])).collect())
    }

    /// Exact change of `F` when coordinate `k` moves by `delta` from `x_k`,
    /// given the current exact partial gradient `g_k`.
    #[inline]
    pub fn objective_change(&self, k: usize, x_k: f64, g_k: f64, delta: f64) -> f64 {
        let reg = &self.regs[k];
        g_k * delta + 0.5 * self.smooth.curvature(k) * delta * delta + reg.eval(x_k + delta)
            - reg.eval(x_k)
    }

    /// A copy with every regularizer and metadata field preserved but the
    /// smooth part replaced.
    pub(crate) fn with_parts(&self, smooth: SmoothPart, regs: Vec<Regularizer>) -> Result<Self> {
        let mut p = Self::new(smooth, regs)?;
        p.f_star = self.f_star;
        Ok(p)
    }
}

/// On-disk problem format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub smooth: SmoothFile,
    pub regs: Vec<Regularizer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_f: Option<f64>,
    #[serde(rename = "mu_F", default, skip_serializing_if = "Option::is_none")]
    pub mu_big_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_star: Option<f64>,
}

/// Matrices are listed as row-major `[row, col, value]` triplets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SmoothFile {
    Quadratic { triplets: Vec<(usize, usize, f64)>, b: Vec<f64> },
    LeastSquares { rows: usize, triplets: Vec<(usize, usize, f64)>, y: Vec<f64> },
}

impl From<&ProblemInstance> for ProblemFile {
    fn from(p: &ProblemInstance) -> Self {
        let smooth = match &p.smooth {
            SmoothPart::Quadratic { a, b } => {
                SmoothFile::Quadratic { triplets: a.triplets().collect(), b: b.clone() }
            }
            SmoothPart::LeastSquares { m, y, .. } => SmoothFile::LeastSquares {
                rows: m.nrows(),
                triplets: m.triplets().collect(),
                y: y.clone(),
            },
        };
        ProblemFile {
            n: p.n,
            smooth,
            regs: p.regs.clone(),
            mu_f: p.mu_f,
            mu_big_f: p.mu_big_f,
            f_star: p.f_star,
        }
    }
}

impl TryFrom<ProblemFile> for ProblemInstance {
    type Error = Error;

    fn try_from(file: ProblemFile) -> Result<Self> {
        let smooth = match file.smooth {
            SmoothFile::Quadratic { triplets, b } => {
                SmoothPart::quadratic(CsrMatrix::from_triplets(file.n, file.n, triplets)?, b)?
            }
            SmoothFile::LeastSquares { rows, triplets, y } => {
                SmoothPart::least_squares(CsrMatrix::from_triplets(rows, file.n, triplets)?, y)?
            }
        };
        let mut p = ProblemInstance::new(smooth, file.regs)?;
        if file.mu_f.into_iter().chain(file.mu_big_f).any(|m| !(m >= 0.0)) {
            return Err(Error::InvalidInput("strong convexity moduli must be >= 0".into()));
        }
        if let (Some(mf), Some(mbf)) = (file.mu_f, file.mu_big_f) {
            if mbf < mf {
                return Err(Error::InvalidInput(format!("mu_F = {mbf} is below mu_f = {mf}")));
            }
        }
        p.mu_f = file.mu_f;
        p.mu_big_f = file.mu_big_f;
        p.f_star = file.f_star;
        Ok(p)
    }
}

impl ProblemInstance {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ProblemFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(s)?;
        file.try_into()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

//! Flexible GMRES (outer) and preconditioned conjugate gradients (inner).

use std::time::Instant;

use crate::dense::{axpy, dot, norm2, DenseMatrix};
use crate::error::{Error, Result};
use crate::factor::LowerFactor;
use crate::sparse::SparseMatrix;

/// A square linear map given only through its action.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// `y = Op(x)`; both slices have length [`dim`](Self::dim).
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;

    fn apply_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator of order {} applied to vector of length {}",
                self.dim(),
                x.len()
            )));
        }
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y)?;
        Ok(y)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        (**self).apply(x, y)
    }
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.mul_into(x, y);
        Ok(())
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(self.row(i), x);
        }
        Ok(())
    }
}

/// Applies `(L Lᵀ)⁻¹`.
impl LinearOperator for LowerFactor {
    fn dim(&self) -> usize {
        LowerFactor::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        y.copy_from_slice(x);
        self.solve_in_place(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        y.copy_from_slice(x);
        Ok(())
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        (self.f)(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveFlag {
    Converged,
    MaxIt,
    Breakdown,
}

impl std::fmt::Display for SolveFlag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveFlag::Converged => "converged",
            SolveFlag::MaxIt => "maxit",
            SolveFlag::Breakdown => "breakdown",
        })
    }
}

#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub iterations: usize,
    /// Relative residuals tested, one per iteration; the last entry is a true residual
    /// whenever the solve ended with a convergence test.
    pub rel_residual_history: Vec<f64>,
    pub final_rel_residual: f64,
    /// `‖w - w*‖ / ‖w*‖` when the exact solution was supplied.
    pub rel_error: Option<f64>,
    /// Seconds.
    pub wall_time: f64,
    pub flag: SolveFlag,
    pub solution: Vec<f64>,
}

/// `10 / N²`.
pub fn tolerance_schedule(n: usize) -> f64 {
    let n = n as f64;
    10.0 / (n * n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgmresOptions {
    pub tol: f64,
    pub maxit: usize,
    /// Second Gram–Schmidt pass for ill-conditioned bases.
    pub reorthogonalize: bool,
}

impl FgmresOptions {
    pub fn new(tol: f64, maxit: usize) -> Self {
        Self { tol, maxit, reorthogonalize: false }
    }

    /// Tolerance `10/N²` and at most `min(N, 500)` iterations.
    pub fn scheduled(n: usize) -> Self {
        Self::new(tolerance_schedule(n), n.min(500))
    }
}

/// Right-preconditioned flexible GMRES without restarts, started from zero.
///
/// The preconditioner may change from one application to the next. When the
/// Givens estimate drops below `tol` the iterate is formed and the true relative
/// residual is tested; iteration continues if that test fails.
pub fn fgmres(
    op: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    b: &[f64],
    opts: FgmresOptions,
    exact: Option<&[f64]>,
) -> Result<KrylovResult> {
    let start = Instant::now();
    let n = op.dim();
    check_problem(n, precond.dim(), b, opts.tol)?;
    let bnorm = norm2(b);
    let finish = |x: Vec<f64>, iterations, history: Vec<f64>, final_rel: f64, flag| KrylovResult {
        rel_error: exact.map(|e| relative_error(&x, e)),
        iterations,
        rel_residual_history: history,
        final_rel_residual: final_rel,
        wall_time: start.elapsed().as_secs_f64(),
        flag,
        solution: x,
    };
    if bnorm == 0.0 {
        return Ok(finish(vec![0.0; n], 0, vec![0.0], 0.0, SolveFlag::Converged));
    }

    let maxit = opts.maxit.max(1);
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(maxit + 1);
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(maxit);
    // column-wise Hessenberg, rotated in place into R
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(maxit);
    let mut cs: Vec<f64> = Vec::with_capacity(maxit);
    let mut sn: Vec<f64> = Vec::with_capacity(maxit);
    let mut g = vec![0.0; maxit + 1];
    g[0] = bnorm;
    v.push(b.iter().map(|x| x / bnorm).collect());

    let mut history = Vec::with_capacity(maxit);
    let mut last_true = f64::NAN;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];

    for j in 0..maxit {
        let mut zj = vec![0.0; n];
        precond.apply(&v[j], &mut zj)?;
        op.apply(&zj, &mut w)?;
        z.push(zj);

        let mut hj = vec![0.0; j + 2];
        let passes = if opts.reorthogonalize { 2 } else { 1 };
        for _ in 0..passes {
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(&w, vi);
                hj[i] += hij;
                axpy(-hij, vi, &mut w);
            }
        }
        let hnext = norm2(&w);
        hj[j + 1] = hnext;
        let happy = hnext == 0.0 || hnext <= 1e-14 * norm2(&hj);
        if !hnext.is_finite() || hj.iter().any(|v| !v.is_finite()) {
            history.push(f64::NAN);
            return Ok(finish(x, j + 1, history, f64::NAN, SolveFlag::Breakdown));
        }

        for i in 0..j {
            let t = cs[i] * hj[i] + sn[i] * hj[i + 1];
            hj[i + 1] = -sn[i] * hj[i] + cs[i] * hj[i + 1];
            hj[i] = t;
        }
        let (c, s) = givens(hj[j], hj[j + 1]);
        hj[j] = c * hj[j] + s * hj[j + 1];
        hj[j + 1] = 0.0;
        g[j + 1] = -s * g[j];
        g[j] *= c;
        cs.push(c);
        sn.push(s);
        h.push(hj);

        let estimate = g[j + 1].abs() / bnorm;
        let last = j + 1 == maxit;
        if estimate < opts.tol || happy || last {
            x = form_iterate(&h, &g, &z, n)?;
            last_true = true_residual(op, &x, b, bnorm)?;
            history.push(last_true);
            if last_true < opts.tol {
                return Ok(finish(x, j + 1, history, last_true, SolveFlag::Converged));
            }
            if happy {
                return Ok(finish(x, j + 1, history, last_true, SolveFlag::Breakdown));
            }
        } else {
            history.push(estimate);
        }
        if !happy {
            v.push(w.iter().map(|x| x / hnext).collect());
        }
    }
    Ok(finish(x, maxit, history, last_true, SolveFlag::MaxIt))
}

fn check_problem(n: usize, pdim: usize, b: &[f64], tol: f64) -> Result<()> {
    if b.len() != n || pdim != n {
        return Err(Error::DimensionMismatch(format!(
            "operator {n}, preconditioner {pdim}, right-hand side {}",
            b.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side"));
    }
    Ok(())
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

fn form_iterate(r: &[Vec<f64>], g: &[f64], z: &[Vec<f64>], n: usize) -> Result<Vec<f64>> {
    let k = r.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for jj in i + 1..k {
            s -= r[jj][i] * y[jj];
        }
        if r[i][i] == 0.0 {
            return Err(Error::SingularFactor { row: i });
        }
        y[i] = s / r[i][i];
    }
    let mut x = vec![0.0; n];
    for (zi, yi) in z.iter().zip(&y) {
        axpy(*yi, zi, &mut x);
    }
    Ok(x)
}

fn true_residual(op: &dyn LinearOperator, x: &[f64], b: &[f64], bnorm: f64) -> Result<f64> {
    let ax = op.apply_vec(x)?;
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    Ok(norm2(&r) / bnorm)
}

pub fn relative_error(x: &[f64], exact: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(exact).map(|(a, b)| a - b).collect();
    norm2(&d) / norm2(exact)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcgStop {
    /// `‖b - A x‖ / ‖b‖ < tol` with the recursively updated residual.
    #[default]
    Residual,
    /// `sqrt(rᵀ M⁻¹ r / bᵀ M⁻¹ b) < tol`.
    Preconditioned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgOptions {
    pub tol: f64,
    pub maxit: usize,
    pub stop: PcgStop,
}

impl PcgOptions {
    pub fn new(tol: f64, maxit: usize) -> Self {
        Self { tol, maxit, stop: PcgStop::Residual }
    }
}

/// Preconditioned conjugate gradients from a zero initial guess.
///
/// A non-positive curvature `pᵀ A p` is reported as [`Error::IndefiniteOperator`].
pub fn pcg(
    op: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    b: &[f64],
    opts: PcgOptions,
    exact: Option<&[f64]>,
) -> Result<KrylovResult> {
    let start = Instant::now();
    let n = op.dim();
    check_problem(n, precond.dim(), b, opts.tol)?;
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    let mut history = Vec::new();
    let done = |x: Vec<f64>, it, history: Vec<f64>, rel: f64, flag| KrylovResult {
        rel_error: exact.map(|e| relative_error(&x, e)),
        iterations: it,
        rel_residual_history: history,
        final_rel_residual: rel,
        wall_time: start.elapsed().as_secs_f64(),
        flag,
        solution: x,
    };
    if bnorm == 0.0 {
        return Ok(done(x, 0, vec![0.0], 0.0, SolveFlag::Converged));
    }
    let mut r = b.to_vec();
    let mut zv = vec![0.0; n];
    precond.apply(&r, &mut zv)?;
    let mut rz = dot(&r, &zv);
    let rz0 = rz;
    let mut p = zv.clone();
    let mut q = vec![0.0; n];
    let mut rel = 1.0;
    for it in 1..=opts.maxit {
        op.apply(&p, &mut q)?;
        let curv = dot(&p, &q);
        if !(curv > 0.0) {
            if curv.is_nan() {
                history.push(f64::NAN);
                return Ok(done(x, it, history, f64::NAN, SolveFlag::Breakdown));
            }
            return Err(Error::IndefiniteOperator { iteration: it, curvature: curv });
        }
        let alpha = rz / curv;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        precond.apply(&r, &mut zv)?;
        let rz_new = dot(&r, &zv);
        rel = match opts.stop {
            PcgStop::Residual => norm2(&r) / bnorm,
            PcgStop::Preconditioned => (rz_new.max(0.0) / rz0).sqrt(),
        };
        history.push(rel);
        if !rel.is_finite() {
            return Ok(done(x, it, history, rel, SolveFlag::Breakdown));
        }
        if rel < opts.tol {
            return Ok(done(x, it, history, rel, SolveFlag::Converged));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&zv) {
            *pi = zi + beta * *pi;
        }
    }
    Ok(done(x, opts.maxit, history, rel, SolveFlag::MaxIt))
}

//! The block preconditioner catalogue.
//!
//! Every preconditioner is applied by block substitution with three block
//! solvers standing in for `A⁻¹`, `S⁻¹` and `X⁻¹`. The exact variants use
//! `S = B A⁻¹ Bᵀ` and `X = C S⁻¹ Cᵀ`; the inexact ones use the approximations in
//! [`ApproximationSet`], with `X̂` solved iteratively by inner PCG.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use crate::dense::{chol_dense, chol_solve, dot, DenseMatrix};
use crate::error::{Error, Result};
use crate::factor::{chol_sparse, chol_tridiag, ichol_with_shift, DropRule, LowerFactor, ShiftPolicy};
use crate::krylov::{pcg, Identity, LinearOperator, PcgOptions, SolveFlag};
use crate::problem::BlockSaddleSystem;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecondTag {
    PD,
    P1,
    P2,
    P3,
    Q1,
    Q2,
    Q3Minus,
    /// `Q̄₃`, the upper block triangular preconditioner with `+X` in the corner.
    Q3Plus,
    /// The table label `Q₄` refers to this sign.
    Q4Minus,
    Q4Plus,
    Q5,
    PAsb,
}

impl PrecondTag {
    pub const ALL: [PrecondTag; 12] = [
        PrecondTag::PD,
        PrecondTag::P1,
        PrecondTag::P2,
        PrecondTag::P3,
        PrecondTag::Q1,
        PrecondTag::Q2,
        PrecondTag::Q3Minus,
        PrecondTag::Q3Plus,
        PrecondTag::Q4Minus,
        PrecondTag::Q4Plus,
        PrecondTag::Q5,
        PrecondTag::PAsb,
    ];

    /// Short name used on the command line and in CSV output.
    pub fn name(self) -> &'static str {
        match self {
            PrecondTag::PD => "pd",
            PrecondTag::P1 => "p1",
            PrecondTag::P2 => "p2",
            PrecondTag::P3 => "p3",
            PrecondTag::Q1 => "q1",
            PrecondTag::Q2 => "q2",
            PrecondTag::Q3Minus => "q3m",
            PrecondTag::Q3Plus => "qa",
            PrecondTag::Q4Minus => "q4",
            PrecondTag::Q4Plus => "qb",
            PrecondTag::Q5 => "q5",
            PrecondTag::PAsb => "pasb",
        }
    }
}

impl fmt::Display for PrecondTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrecondTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "pd" | "p_d" => PrecondTag::PD,
            "p1" => PrecondTag::P1,
            "p2" => PrecondTag::P2,
            "p3" => PrecondTag::P3,
            "q1" => PrecondTag::Q1,
            "q2" => PrecondTag::Q2,
            "q3" | "q3m" | "q3minus" => PrecondTag::Q3Minus,
            "qa" | "q3p" | "q3plus" | "qbar3" => PrecondTag::Q3Plus,
            "q4" | "q4m" | "q4minus" => PrecondTag::Q4Minus,
            "qb" | "q4p" | "q4plus" | "qbar4" => PrecondTag::Q4Plus,
            "q5" => PrecondTag::Q5,
            "pasb" | "p_asb" => PrecondTag::PAsb,
            _ => return Err(Error::InvalidArgument(format!("unknown preconditioner {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Exact,
    Inexact,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "inexact" => Ok(Mode::Inexact),
            _ => Err(Error::InvalidArgument(format!("unknown mode {s:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Inexact => "inexact",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PreconditionerKind {
    pub tag: PrecondTag,
    pub mode: Mode,
}

/// `(L Lᵀ)⁻¹` for a dense Cholesky factor.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    l: DenseMatrix,
}

impl DenseCholesky {
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        Ok(Self { l: chol_dense(m)? })
    }

    pub fn factor(&self) -> &DenseMatrix {
        &self.l
    }
}

impl LinearOperator for DenseCholesky {
    fn dim(&self) -> usize {
        self.l.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        y.copy_from_slice(&chol_solve(&self.l, x));
        Ok(())
    }
}

/// Division by a stored diagonal.
#[derive(Debug, Clone)]
pub struct DiagonalInverse {
    diag: Vec<f64>,
}

impl DiagonalInverse {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if let Some(i) = diag.iter().position(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::NotPositiveDefinite { index: i, pivot: diag[i] });
        }
        Ok(Self { diag })
    }
}

impl LinearOperator for DiagonalInverse {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.diag) {
            *yi = xi / d;
        }
        Ok(())
    }
}

/// Exact Schur complements, formed densely, with their Cholesky factors.
pub struct ExactSchurSet {
    pub a_factor: LowerFactor,
    pub s: DenseMatrix,
    pub x: DenseMatrix,
    pub s_chol: DenseCholesky,
    pub x_chol: DenseCholesky,
}

impl ExactSchurSet {
    /// Forms `S = B A⁻¹ Bᵀ` and `X = C S⁻¹ Cᵀ`. Cubic in `m`; desk scale only.
    pub fn build(sys: &BlockSaddleSystem) -> Result<Self> {
        let a_factor = chol_sparse(&sys.a)?;
        let s = schur_dense(&sys.b, &a_factor)?;
        let s_chol = DenseCholesky::new(&s)?;
        let x = schur_dense(&sys.c, &s_chol)?;
        let x_chol = DenseCholesky::new(&x)?;
        Ok(Self { a_factor, s, x, s_chol, x_chol })
    }
}

/// Blocks of the simplified `Q̄₃`: `Â = I`, `Ŝ = S̃ = B Bᵀ`, `X̂ = X̃ = C S̃⁻¹ Cᵀ`.
pub struct SimplifiedSet {
    pub s_tilde: DenseMatrix,
    pub x_tilde: DenseMatrix,
    pub s_chol: DenseCholesky,
    pub x_chol: DenseCholesky,
}

impl SimplifiedSet {
    pub fn build(sys: &BlockSaddleSystem) -> Result<Self> {
        let s_tilde = schur_dense(&sys.b, &Identity(sys.b.ncols()))?;
        let s_chol = DenseCholesky::new(&s_tilde)?;
        let x_tilde = schur_dense(&sys.c, &s_chol)?;
        let x_chol = DenseCholesky::new(&x_tilde)?;
        Ok(Self { s_tilde, x_tilde, s_chol, x_chol })
    }

    pub fn preconditioner<'a>(&'a self, sys: &'a BlockSaddleSystem) -> Result<BlockPreconditioner<'a>> {
        BlockPreconditioner::new(
            PrecondTag::Q3Plus,
            sys,
            Box::new(Identity(sys.b.ncols())),
            Box::new(&self.s_chol),
            Box::new(&self.x_chol),
        )
    }
}

/// `M K⁻¹ Mᵀ` as a dense symmetric matrix, one solve per row of `M`.
pub fn schur_dense(m: &SparseMatrix, k_inv: &dyn LinearOperator) -> Result<DenseMatrix> {
    let (r, c) = m.shape();
    if k_inv.dim() != c {
        return Err(Error::DimensionMismatch(format!("Schur complement of {r}x{c} with solver of order {}", k_inv.dim())));
    }
    let cols: Vec<Vec<f64>> = (0..r)
        .into_par_iter()
        .map(|i| {
            let mut e = vec![0.0; c];
            let (idx, vals) = m.row(i);
            for (&j, &v) in idx.iter().zip(vals) {
                e[j] = v;
            }
            let y = k_inv.apply_vec(&e)?;
            m.spmv(&y, false)
        })
        .collect::<Result<_>>()?;
    let mut s = DenseMatrix::from_columns(r, &cols)?;
    // symmetrize the rounding
    for i in 0..r {
        for j in 0..i {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

/// Which matrix stands in the (1,1) block of an inexact preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Block11 {
    /// Solves with `A` through a cached sparse Cholesky factor.
    #[default]
    Exact,
    /// `Â = diag(A)`.
    Diagonal,
    /// `Â = I`.
    Identity,
}

impl FromStr for Block11 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Block11::Exact),
            "diag" | "diagonal" => Ok(Block11::Diagonal),
            "identity" => Ok(Block11::Identity),
            _ => Err(Error::InvalidArgument(format!("unknown (1,1) block choice {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxOptions {
    pub block11: Block11,
    /// Drop tolerance of the incomplete factor of `X₀`.
    pub ic_tau: f64,
    pub ic_drop: DropRule,
    pub shift: ShiftPolicy,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        Self { block11: Block11::Exact, ic_tau: 1e-4, ic_drop: DropRule::Relative, shift: ShiftPolicy::default() }
    }
}

/// Block approximations built once before the outer iteration.
#[derive(Debug, Clone)]
pub struct ApproximationSet {
    pub options: ApproxOptions,
    /// `diag(A)`.
    pub a_diag: Vec<f64>,
    /// Tridiagonal part of `B diag(A)⁻¹ Bᵀ`.
    pub s_hat: SparseMatrix,
    /// Set when `Ŝ` itself was not positive definite; `l_s` then factors the shifted matrix.
    pub s_shift: Option<SHatShift>,
    pub l_s: LowerFactor,
    /// `C diag(Ŝ)⁻¹ Cᵀ`.
    pub x0: SparseMatrix,
    /// Incomplete Cholesky factor of `X₀`, the inner PCG preconditioner.
    pub m: LowerFactor,
    /// Cholesky factor of `A`, present when the (1,1) block is exact.
    pub a_factor: Option<LowerFactor>,
}

impl ApproximationSet {
    pub fn build(sys: &BlockSaddleSystem, options: ApproxOptions) -> Result<Self> {
        let a_diag = sys.a.diagonal();
        if let Some(i) = a_diag.iter().position(|d| !(*d > 0.0)) {
            return Err(Error::NotPositiveDefinite { index: i, pivot: a_diag[i] });
        }
        let s_hat = tridiag_of_scaled_gram(&sys.b, &a_diag)?;
        let (l_s, s_shift) = factor_s_hat(&s_hat, options.shift)?;
        let inv_sdiag: Vec<f64> = s_hat.diagonal().iter().map(|d| 1.0 / d).collect();
        let ct = sys.c.transpose();
        let x0 = sys.c.scale_cols(&inv_sdiag)?.matmul(&ct)?;
        let m = ichol_with_shift(&x0, options.ic_tau, options.ic_drop, options.shift)?;
        let a_factor = match options.block11 {
            Block11::Exact => Some(chol_sparse(&sys.a)?),
            _ => None,
        };
        Ok(Self { options, a_diag, s_hat, s_shift, l_s, x0, m, a_factor })
    }

    /// The implicit operator `r ↦ C L_S⁻ᵀ L_S⁻¹ Cᵀ r`.
    pub fn x_hat<'a>(&'a self, sys: &'a BlockSaddleSystem) -> XHat<'a> {
        XHat { c: &sys.c, l_s: &self.l_s }
    }

    /// Solver for the (1,1) block chosen in the options.
    pub fn block11_solver(&self) -> Result<Box<dyn LinearOperator + '_>> {
        Ok(match self.options.block11 {
            Block11::Exact => Box::new(self.a_factor.as_ref().expect("factor built for exact block")),
            Block11::Diagonal => Box::new(DiagonalInverse::new(self.a_diag.clone())?),
            Block11::Identity => Box::new(Identity(self.a_diag.len())),
        })
    }
}

/// Shift added to `Ŝ` before its factorization succeeded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SHatShift {
    /// `Ŝ + σ I` with `σ = 10⁻¹² trace(Ŝ)/m`.
    Uniform(f64),
    /// `Ŝ + α diag(Ŝ)`.
    Relative(f64),
}

/// Cholesky factor of `Ŝ`. On breakdown tries `Ŝ + 10⁻¹² trace(Ŝ)/m · I`, then
/// `Ŝ + α diag(Ŝ)` with `α` doubling.
fn factor_s_hat(s_hat: &SparseMatrix, policy: ShiftPolicy) -> Result<(LowerFactor, Option<SHatShift>)> {
    let attempt = |t: &SparseMatrix| match chol_tridiag(t) {
        Ok(f) => Ok(Ok(f)),
        Err(e @ Error::NotPositiveDefinite { .. }) => Ok(Err(e)),
        Err(e) => Err(e),
    };
    if let Ok(f) = attempt(s_hat)? {
        return Ok((f, None));
    }
    let sigma = 1e-12 * s_hat.diagonal().iter().sum::<f64>() / s_hat.nrows().max(1) as f64;
    let mut last = match attempt(&s_hat.add(1.0, &SparseMatrix::identity(s_hat.nrows()), sigma)?)? {
        Ok(f) => return Ok((f, Some(SHatShift::Uniform(sigma)))),
        Err(e) => e,
    };
    let diag = SparseMatrix::from_diagonal(&s_hat.diagonal());
    let mut alpha = policy.initial_alpha;
    // dense B can leave the tridiagonal part far from diagonally dominant
    for _ in 0..policy.max_retries.max(24) {
        match attempt(&s_hat.add(1.0, &diag, alpha)?)? {
            Ok(mut f) => {
                f.shift = Some(alpha);
                return Ok((f, Some(SHatShift::Relative(alpha))));
            }
            Err(e) => last = e,
        }
        alpha *= 2.0;
    }
    Err(last)
}

/// Tridiagonal part of `B diag(d)⁻¹ Bᵀ` from sparse row dot products only.
pub fn tridiag_of_scaled_gram(b: &SparseMatrix, d: &[f64]) -> Result<SparseMatrix> {
    if d.len() != b.ncols() {
        return Err(Error::DimensionMismatch("scaling length differs from column count".into()));
    }
    let m = b.nrows();
    let row_dot = |i: usize, j: usize| -> f64 {
        let (ci, vi) = b.row(i);
        let (cj, vj) = b.row(j);
        let (mut p, mut q, mut s) = (0, 0, 0.0);
        while p < ci.len() && q < cj.len() {
            match ci[p].cmp(&cj[q]) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    s += vi[p] * vj[q] / d[ci[p]];
                    p += 1;
                    q += 1;
                }
            }
        }
        s
    };
    let mut t = Vec::with_capacity(3 * m);
    for i in 0..m {
        t.push((i, i, row_dot(i, i)));
        if i + 1 < m {
            let v = row_dot(i, i + 1);
            t.push((i, i + 1, v));
            t.push((i + 1, i, v));
        }
    }
    SparseMatrix::from_triplets(m, m, &t)
}

/// `r ↦ C L_S⁻ᵀ L_S⁻¹ Cᵀ r`.
#[derive(Clone, Copy)]
pub struct XHat<'a> {
    c: &'a SparseMatrix,
    l_s: &'a LowerFactor,
}

impl<'a> XHat<'a> {
    pub fn new(c: &'a SparseMatrix, l_s: &'a LowerFactor) -> Self {
        Self { c, l_s }
    }
}

impl LinearOperator for XHat<'_> {
    fn dim(&self) -> usize {
        self.c.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let mut t = vec![0.0; self.c.ncols()];
        self.c.mul_transpose_acc(x, &mut t);
        self.l_s.solve_in_place(&mut t)?;
        self.c.mul_into(&t, y);
        Ok(())
    }
}

/// Counters shared by every call of an inner solver.
#[derive(Debug, Default)]
pub struct InnerStats {
    pub calls: AtomicUsize,
    pub iterations: AtomicUsize,
    pub maxit_hits: AtomicUsize,
}

impl InnerStats {
    pub fn snapshot(&self) -> (usize, usize, usize) {
        (
            self.calls.load(Ordering::Relaxed),
            self.iterations.load(Ordering::Relaxed),
            self.maxit_hits.load(Ordering::Relaxed),
        )
    }
}

/// Approximate inverse of an SPD operator through preconditioned CG.
///
/// Hitting the iteration limit is counted, not fatal: the current iterate is used.
pub struct InnerPcg<O, P> {
    op: O,
    precond: P,
    opts: PcgOptions,
    stats: Arc<InnerStats>,
}

impl<O: LinearOperator, P: LinearOperator> InnerPcg<O, P> {
    pub fn new(op: O, precond: P, opts: PcgOptions) -> Self {
        Self { op, precond, opts, stats: Arc::default() }
    }

    pub fn stats(&self) -> Arc<InnerStats> {
        Arc::clone(&self.stats)
    }
}

impl<O: LinearOperator, P: LinearOperator> LinearOperator for InnerPcg<O, P> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let res = pcg(&self.op, &self.precond, x, self.opts, None)?;
        self.stats.calls.fetch_add(1, Ordering::Relaxed);
        self.stats.iterations.fetch_add(res.iterations, Ordering::Relaxed);
        match res.flag {
            SolveFlag::Converged => {}
            SolveFlag::MaxIt => {
                self.stats.maxit_hits.fetch_add(1, Ordering::Relaxed);
            }
            SolveFlag::Breakdown => return Err(Error::NonFinite("inner PCG")),
        }
        y.copy_from_slice(&res.solution);
        Ok(())
    }
}

/// Inner solver settings for the `X̂` solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions {
    pub tol: f64,
    pub maxit: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self { tol: 1e-4, maxit: 200 }
    }
}

/// A catalogue preconditioner with its three block solvers; applying it as a
/// [`LinearOperator`] returns `𝒬⁻¹ r`.
pub struct BlockPreconditioner<'a> {
    tag: PrecondTag,
    b: &'a SparseMatrix,
    c: &'a SparseMatrix,
    a_inv: Box<dyn LinearOperator + 'a>,
    s_inv: Box<dyn LinearOperator + 'a>,
    x_inv: Box<dyn LinearOperator + 'a>,
    inner: Option<Arc<InnerStats>>,
}

impl<'a> BlockPreconditioner<'a> {
    /// Assembles a preconditioner from arbitrary block solvers.
    pub fn new(
        tag: PrecondTag,
        sys: &'a BlockSaddleSystem,
        a_inv: Box<dyn LinearOperator + 'a>,
        s_inv: Box<dyn LinearOperator + 'a>,
        x_inv: Box<dyn LinearOperator + 'a>,
    ) -> Result<Self> {
        let (n, m, l) = sys.dims();
        if a_inv.dim() != n || s_inv.dim() != m || x_inv.dim() != l {
            return Err(Error::DimensionMismatch(format!(
                "block solvers of order ({}, {}, {}) for blocks ({n}, {m}, {l})",
                a_inv.dim(),
                s_inv.dim(),
                x_inv.dim()
            )));
        }
        Ok(Self { tag, b: &sys.b, c: &sys.c, a_inv, s_inv, x_inv, inner: None })
    }

    /// Exact preconditioner from precomputed Schur complements.
    pub fn exact(tag: PrecondTag, sys: &'a BlockSaddleSystem, es: &'a ExactSchurSet) -> Result<Self> {
        let a_inv: Box<dyn LinearOperator + 'a> = Box::new(&es.a_factor);
        if tag == PrecondTag::PAsb {
            let cct = DenseCholesky::new(&gram_dense(&sys.c))?;
            return Self::new(tag, sys, a_inv, Box::new(Identity(sys.b.nrows())), Box::new(cct));
        }
        Self::new(tag, sys, a_inv, Box::new(&es.s_chol), Box::new(&es.x_chol))
    }

    /// Inexact preconditioner: `Ŝ` through `L_S`, `X̂` through inner PCG.
    pub fn inexact(
        tag: PrecondTag,
        sys: &'a BlockSaddleSystem,
        ap: &'a ApproximationSet,
        inner: InnerOptions,
    ) -> Result<Self> {
        let opts = PcgOptions::new(inner.tol, inner.maxit);
        let a_inv = ap.block11_solver()?;
        if tag == PrecondTag::PAsb {
            let cct = sys.c.matmul(&sys.c.transpose())?;
            let ic = ichol_with_shift(&cct, ap.options.ic_tau, ap.options.ic_drop, ap.options.shift)?;
            let x_inv = InnerPcg::new(cct, ic, opts);
            let stats = x_inv.stats();
            let mut pc = Self::new(tag, sys, a_inv, Box::new(Identity(sys.b.nrows())), Box::new(x_inv))?;
            pc.inner = Some(stats);
            return Ok(pc);
        }
        let x_inv = InnerPcg::new(ap.x_hat(sys), &ap.m, opts);
        let stats = x_inv.stats();
        let mut pc = Self::new(tag, sys, a_inv, Box::new(&ap.l_s), Box::new(x_inv))?;
        pc.inner = Some(stats);
        Ok(pc)
    }

    /// Counters of the inner `X̂` solves, for inexact preconditioners.
    pub fn inner_stats(&self) -> Option<&InnerStats> {
        self.inner.as_deref()
    }

    pub fn tag(&self) -> PrecondTag {
        self.tag
    }

    fn sizes(&self) -> (usize, usize, usize) {
        (self.b.ncols(), self.b.nrows(), self.c.nrows())
    }
}

fn gram_dense(c: &SparseMatrix) -> DenseMatrix {
    let d = c.to_dense();
    let mut g = DenseMatrix::zeros(c.nrows(), c.nrows());
    for i in 0..c.nrows() {
        for j in 0..=i {
            let v = dot(d.row(i), d.row(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

impl LinearOperator for BlockPreconditioner<'_> {
    fn dim(&self) -> usize {
        let (n, m, l) = self.sizes();
        n + m + l
    }

    fn apply(&self, r: &[f64], w: &mut [f64]) -> Result<()> {
        let (n, m, _) = self.sizes();
        let (r1, rest) = r.split_at(n);
        let (r2, r3) = rest.split_at(m);
        let (w1, rest) = w.split_at_mut(n);
        let (w2, w3) = rest.split_at_mut(m);
        let bt_mul = |v: &[f64]| {
            let mut out = vec![0.0; n];
            self.b.mul_transpose_acc(v, &mut out);
            out
        };
        let ct_mul = |v: &[f64]| {
            let mut out = vec![0.0; m];
            self.c.mul_transpose_acc(v, &mut out);
            out
        };
        // w1 = A⁻¹ (r1 - Bᵀ w2)
        let back_w1 = |w2: &[f64], w1: &mut [f64]| -> Result<()> {
            let btw = bt_mul(w2);
            let y: Vec<f64> = r1.iter().zip(&btw).map(|(a, b)| a - b).collect();
            self.a_inv.apply(&y, w1)
        };
        // w2 = S⁻¹ (B A⁻¹ r1 - r2) / scale
        let coupled_w2 = |w2: &mut [f64], scale: f64| -> Result<()> {
            let t = self.a_inv.apply_vec(r1)?;
            let bt = self.b.spmv(&t, false)?;
            let v: Vec<f64> = bt.iter().zip(r2).map(|(a, b)| (a - b) / scale).collect();
            self.s_inv.apply(&v, w2)
        };
        let negate = |v: &mut [f64]| v.iter_mut().for_each(|x| *x = -*x);

        match self.tag {
            PrecondTag::PD => {
                self.a_inv.apply(r1, w1)?;
                self.s_inv.apply(r2, w2)?;
                self.x_inv.apply(r3, w3)?;
            }
            PrecondTag::P1 | PrecondTag::P2 => {
                self.x_inv.apply(r3, w3)?;
                if self.tag == PrecondTag::P1 {
                    negate(w3);
                }
                self.a_inv.apply(r1, w1)?;
                let bw = self.b.spmv(w1, false)?;
                let cw = ct_mul(w3);
                let v: Vec<f64> = bw.iter().zip(&cw).zip(r2).map(|((a, b), c)| a + b - c).collect();
                self.s_inv.apply(&v, w2)?;
            }
            PrecondTag::P3 => {
                coupled_w2(w2, 2.0)?;
                back_w1(w2, w1)?;
                self.x_inv.apply(r3, w3)?;
                negate(w3);
            }
            PrecondTag::Q1 => {
                self.x_inv.apply(r3, w3)?;
                self.s_inv.apply(r2, w2)?;
                negate(w2);
                back_w1(w2, w1)?;
            }
            PrecondTag::Q2 => {
                self.x_inv.apply(r3, w3)?;
                negate(w3);
                let cw = ct_mul(w3);
                let v: Vec<f64> = r2.iter().zip(&cw).map(|(a, b)| a - b).collect();
                self.s_inv.apply(&v, w2)?;
                back_w1(w2, w1)?;
            }
            PrecondTag::Q3Minus | PrecondTag::Q3Plus | PrecondTag::PAsb => {
                self.x_inv.apply(r3, w3)?;
                if self.tag == PrecondTag::Q3Minus {
                    negate(w3);
                }
                let cw = ct_mul(w3);
                let v: Vec<f64> = cw.iter().zip(r2).map(|(a, b)| a - b).collect();
                self.s_inv.apply(&v, w2)?;
                back_w1(w2, w1)?;
            }
            PrecondTag::Q4Minus | PrecondTag::Q4Plus => {
                coupled_w2(w2, 1.0)?;
                back_w1(w2, w1)?;
                let cw = self.c.spmv(w2, false)?;
                let v: Vec<f64> = r3.iter().zip(&cw).map(|(a, b)| a - b).collect();
                self.x_inv.apply(&v, w3)?;
                if self.tag == PrecondTag::Q4Minus {
                    negate(w3);
                }
            }
            PrecondTag::Q5 => {
                coupled_w2(w2, 1.0)?;
                back_w1(w2, w1)?;
                self.x_inv.apply(r3, w3)?;
            }
        }
        Ok(())
    }
}

/// `𝒬⁻¹ r` for an exact catalogue preconditioner.
pub fn apply_exact(tag: PrecondTag, es: &ExactSchurSet, sys: &BlockSaddleSystem, r: &[f64]) -> Result<Vec<f64>> {
    BlockPreconditioner::exact(tag, sys, es)?.apply_vec(r)
}

/// `𝒬⁻¹ r` for an inexact catalogue preconditioner.
pub fn apply_inexact(
    tag: PrecondTag,
    ap: &ApproximationSet,
    sys: &BlockSaddleSystem,
    r: &[f64],
    inner: InnerOptions,
) -> Result<Vec<f64>> {
    BlockPreconditioner::inexact(tag, sys, ap, inner)?.apply_vec(r)
}

/// `Q̄₃⁻¹ r` with the inner `X̂` solve at relative tolerance `inner_tol`.
pub fn apply_qbar(ap: &ApproximationSet, sys: &BlockSaddleSystem, r: &[f64], inner_tol: f64) -> Result<Vec<f64>> {
    apply_inexact(PrecondTag::Q3Plus, ap, sys, r, InnerOptions { tol: inner_tol, ..InnerOptions::default() })
}

/// Dense `𝒬` for the given tag and blocks. The (1,1), (2,2) and (3,3) blocks are
/// taken from `a`, `s`, `x`; the sign pattern and couplings follow the tag.
pub fn assemble_dense(
    tag: PrecondTag,
    a: &DenseMatrix,
    s: &DenseMatrix,
    x: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
) -> DenseMatrix {
    let (n, m, l) = (a.nrows(), s.nrows(), x.nrows());
    let mut q = DenseMatrix::zeros(n + m + l, n + m + l);
    let neg = |d: &DenseMatrix| DenseMatrix::from_fn(d.nrows(), d.ncols(), |i, j| -d[(i, j)]);
    let bt = b.transpose();
    let ct = c.transpose();
    q.set_block(0, 0, a);
    use PrecondTag::*;
    match tag {
        PD => {
            q.set_block(n, n, s);
            q.set_block(n + m, n + m, x);
        }
        P1 | P2 => {
            q.set_block(n, 0, b);
            q.set_block(n, n, &neg(s));
            q.set_block(n, n + m, &ct);
            q.set_block(n + m, n + m, &if tag == P1 { neg(x) } else { x.clone() });
        }
        P3 => {
            q.set_block(0, n, &bt);
            q.set_block(n, 0, b);
            q.set_block(n, n, &neg(s));
            q.set_block(n + m, n + m, &neg(x));
        }
        Q1 => {
            q.set_block(0, n, &bt);
            q.set_block(n, n, &neg(s));
            q.set_block(n + m, n + m, x);
        }
        Q2 => {
            q.set_block(0, n, &bt);
            q.set_block(n, n, s);
            q.set_block(n, n + m, &ct);
            q.set_block(n + m, n + m, &neg(x));
        }
        Q3Minus | Q3Plus | PAsb => {
            q.set_block(0, n, &bt);
            q.set_block(n, n, &neg(s));
            q.set_block(n, n + m, &ct);
            q.set_block(n + m, n + m, &if tag == Q3Minus { neg(x) } else { x.clone() });
        }
        Q4Minus | Q4Plus => {
            q.set_block(0, n, &bt);
            q.set_block(n, 0, b);
            q.set_block(n + m, n, c);
            q.set_block(n + m, n + m, &if tag == Q4Minus { neg(x) } else { x.clone() });
        }
        Q5 => {
            q.set_block(0, n, &bt);
            q.set_block(n, 0, b);
            q.set_block(n + m, n + m, x);
        }
    }
    q
}

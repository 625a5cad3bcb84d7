//! Benchmark sweeps: one FGMRES solve per (problem, preconditioner) pair.
//!
//! CSV columns, in order: `preconditioner, mode, N, p, ITS, CPU, RES, ERR, flag, note`.
//! `RES` is `‖b - 𝒜w‖ / ‖b‖` recomputed from the assembled matrix and the
//! returned iterate; `ERR` is `‖w - w*‖ / ‖w*‖`. `CPU` is the wall time of the
//! outer solve in seconds. A row whose setup or solve failed has flag `error`
//! and the message in `note`.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use dsaddle::dense::norm2;
use dsaddle::krylov::{fgmres, relative_error, FgmresOptions};
use dsaddle::precond::{ApproxOptions, ApproximationSet, BlockPreconditioner, ExactSchurSet, InnerOptions, Mode, PrecondTag};
use dsaddle::problem::{make_rhs_with, RhsSpec};
use dsaddle::{BlockSaddleSystem, Error, Result, SparseMatrix};

use crate::{check_dense_size, ProblemSpec, DEFAULT_MAX_DENSE};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub problems: Vec<ProblemSpec>,
    pub preconds: Vec<PrecondTag>,
    pub mode: Mode,
    pub rhs: RhsSpec,
    /// Outer tolerance; `10/N²` when absent.
    pub tol: Option<f64>,
    /// Outer iteration cap; `min(N, 500)` when absent.
    pub maxit: Option<usize>,
    pub inner: InnerOptions,
    pub approx: ApproxOptions,
    /// Exact mode forms `S` and `X` densely; refused above this order.
    pub max_dense: usize,
}

impl BenchConfig {
    pub fn new(problems: Vec<ProblemSpec>, preconds: Vec<PrecondTag>) -> Self {
        Self {
            problems,
            preconds,
            mode: Mode::Inexact,
            rhs: RhsSpec::ones(),
            tol: None,
            maxit: None,
            inner: InnerOptions::default(),
            approx: ApproxOptions::default(),
            max_dense: DEFAULT_MAX_DENSE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.preconds.is_empty() {
            return Err(Error::InvalidArgument("at least one preconditioner is required".into()));
        }
        if self.problems.is_empty() {
            return Err(Error::InvalidArgument("no problem to run".into()));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(Error::InvalidArgument(format!("tolerance must be positive, got {t}")));
            }
        }
        if !(self.inner.tol > 0.0) || self.inner.maxit == 0 {
            return Err(Error::InvalidArgument("inner tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }

    fn fgmres_options(&self, n: usize) -> FgmresOptions {
        let mut o = FgmresOptions::scheduled(n);
        if let Some(t) = self.tol {
            o.tol = t;
        }
        if let Some(m) = self.maxit {
            o.maxit = m;
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub preconditioner: String,
    pub mode: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub p: Option<usize>,
    #[serde(rename = "ITS")]
    pub its: usize,
    #[serde(rename = "CPU")]
    pub cpu: f64,
    #[serde(rename = "RES")]
    pub res: Option<f64>,
    #[serde(rename = "ERR")]
    pub err: Option<f64>,
    pub flag: String,
    pub note: String,
    /// Relative residual estimates per iteration; not written to the CSV.
    #[serde(skip)]
    pub history: Vec<f64>,
    #[serde(skip)]
    pub solution: Vec<f64>,
}

impl BenchRow {
    fn failed(tag: PrecondTag, mode: Mode, n: usize, p: Option<usize>, e: &Error) -> Self {
        Self {
            preconditioner: tag.to_string(),
            mode: mode.to_string(),
            n,
            p,
            its: 0,
            cpu: 0.0,
            res: None,
            err: None,
            flag: "error".into(),
            note: e.to_string(),
            history: Vec::new(),
            solution: Vec::new(),
        }
    }

    pub fn converged(&self) -> bool {
        self.flag == "converged"
    }
}

/// `‖b - K w‖ / ‖b‖`.
pub fn true_relative_residual(k: &SparseMatrix, b: &[f64], w: &[f64]) -> Result<f64> {
    let kw = k.spmv(w, false)?;
    let r: Vec<f64> = b.iter().zip(&kw).map(|(x, y)| x - y).collect();
    Ok(norm2(&r) / norm2(b))
}

enum Setup {
    Exact(ExactSchurSet),
    Inexact(ApproximationSet),
}

/// Runs every (problem, preconditioner) pair in order. Failures become rows.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for spec in &cfg.problems {
        let p = spec.p();
        let n_hint = spec.order_hint().unwrap_or(0);
        let sys = match spec.build() {
            Ok(s) => s,
            Err(e) => {
                rows.extend(cfg.preconds.iter().map(|t| BenchRow::failed(*t, cfg.mode, n_hint, p, &e)));
                continue;
            }
        };
        rows.extend(run_problem(cfg, &sys, p));
    }
    Ok(rows)
}

fn run_problem(cfg: &BenchConfig, sys: &BlockSaddleSystem, p: Option<usize>) -> Vec<BenchRow> {
    let n = sys.order();
    let fail_all = |e: &Error| cfg.preconds.iter().map(|t| BenchRow::failed(*t, cfg.mode, n, p, e)).collect::<Vec<_>>();
    let prepared = (|| -> Result<_> {
        let k = sys.assemble()?;
        let (b, w_star) = make_rhs_with(&k, cfg.rhs)?;
        let setup = match cfg.mode {
            Mode::Exact => {
                check_dense_size("exact mode", sys.dims().1, cfg.max_dense)?;
                Setup::Exact(ExactSchurSet::build(sys)?)
            }
            Mode::Inexact => Setup::Inexact(ApproximationSet::build(sys, cfg.approx)?),
        };
        Ok((k, b, w_star, setup))
    })();
    let (k, b, w_star, setup) = match prepared {
        Ok(v) => v,
        Err(e) => return fail_all(&e),
    };
    let opts = cfg.fgmres_options(n);
    cfg.preconds
        .iter()
        .map(|&tag| {
            solve_one(tag, cfg, sys, &setup, &k, &b, &w_star, opts).unwrap_or_else(|e| BenchRow::failed(tag, cfg.mode, n, p, &e))
        })
        .map(|mut row| {
            row.p = p;
            row
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn solve_one(
    tag: PrecondTag,
    cfg: &BenchConfig,
    sys: &BlockSaddleSystem,
    setup: &Setup,
    k: &SparseMatrix,
    b: &[f64],
    w_star: &[f64],
    opts: FgmresOptions,
) -> Result<BenchRow> {
    let pc = match setup {
        Setup::Exact(es) => BlockPreconditioner::exact(tag, sys, es)?,
        Setup::Inexact(ap) => BlockPreconditioner::inexact(tag, sys, ap, cfg.inner)?,
    };
    let start = Instant::now();
    let res = fgmres(k, &pc, b, opts, Some(w_star))?;
    let cpu = start.elapsed().as_secs_f64();
    let true_res = true_relative_residual(k, b, &res.solution)?;
    let note = match pc.inner_stats().map(|s| s.snapshot()) {
        Some((calls, its, hits)) if calls > 0 => format!("inner solves {calls}, inner iterations {its}, inner caps hit {hits}"),
        _ => String::new(),
    };
    Ok(BenchRow {
        preconditioner: tag.to_string(),
        mode: cfg.mode.to_string(),
        n: sys.order(),
        p: None,
        its: res.iterations,
        cpu,
        res: Some(true_res),
        err: Some(relative_error(&res.solution, w_star)),
        flag: res.flag.to_string(),
        note,
        history: res.rel_residual_history,
        solution: res.solution,
    })
}

pub fn write_csv<W: Write>(rows: &[BenchRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

/// One `iteration,relres` line per outer step.
pub fn write_history<W: Write>(history: &[f64], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["iteration", "relres"]).map_err(csv_err)?;
    for (i, r) in history.iter().enumerate() {
        out.write_record([(i + 1).to_string(), format!("{r:e}")]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

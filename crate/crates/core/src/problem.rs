//! Test problems, right-hand sides and on-disk persistence of systems.

use std::fs;
use std::path::Path;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{rank, DenseMatrix};
use crate::error::{Error, Result};
use crate::mm::{load_matrix_market, save_matrix_market, Symmetry};
use crate::sparse::{kron, SparseMatrix};

/// How the diagonal blocks `D₂`, `D₃` of the first test problem are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DiagonalFormula {
    /// `1e-5 (j - p₁)²` and `1e-5 (j + p₁)²`; keeps `A` positive definite.
    #[default]
    Squared,
    /// `1e-5 (j - p₁²)` and `1e-5 (j + p₁²)` as printed; `D₂` turns negative.
    Literal,
}

/// Provenance of a system, written next to the matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInfo {
    pub problem: String,
    pub p: Option<usize>,
    pub seed: Option<u64>,
    pub diagonal_formula: Option<DiagonalFormula>,
    /// Seeds skipped because the drawn `B` or `C` was rank deficient.
    pub regenerated_from: Vec<u64>,
}

impl ProblemInfo {
    fn named(problem: &str) -> Self {
        Self { problem: problem.into(), p: None, seed: None, diagonal_formula: None, regenerated_from: Vec::new() }
    }
}

/// `[[A, Bᵀ, 0], [B, 0, Cᵀ], [0, C, 0]]` kept as its three blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSaddleSystem {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub c: SparseMatrix,
    pub info: ProblemInfo,
}

impl BlockSaddleSystem {
    pub fn new(a: SparseMatrix, b: SparseMatrix, c: SparseMatrix) -> Result<Self> {
        let sys = Self { a, b, c, info: ProblemInfo::named("custom") };
        sys.check_dims()?;
        Ok(sys)
    }

    fn check_dims(&self) -> Result<()> {
        let n = self.a.nrows();
        if self.a.ncols() != n {
            return Err(Error::DimensionMismatch(format!("A is {:?}", self.a.shape())));
        }
        if self.b.ncols() != n {
            return Err(Error::DimensionMismatch(format!("B is {:?} but A has order {n}", self.b.shape())));
        }
        if self.c.ncols() != self.b.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "C is {:?} but B has {} rows",
                self.c.shape(),
                self.b.nrows()
            )));
        }
        Ok(())
    }

    /// `(n, m, l)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.nrows(), self.b.nrows(), self.c.nrows())
    }

    pub fn order(&self) -> usize {
        let (n, m, l) = self.dims();
        n + m + l
    }

    /// The full sparse saddle-point matrix.
    pub fn assemble(&self) -> Result<SparseMatrix> {
        self.check_dims()?;
        let (n, m, l) = self.dims();
        let bt = self.b.transpose();
        let ct = self.c.transpose();
        SparseMatrix::block(
            &[n, m, l],
            &[n, m, l],
            &[(0, 0, &self.a), (0, 1, &bt), (1, 0, &self.b), (1, 2, &ct), (2, 1, &self.c)],
        )
    }

    /// Full row rank of `B` and `C` by dense elimination; only sensible at desk scale.
    pub fn check_full_row_rank(&self) -> Result<()> {
        for (name, m) in [("B", &self.b), ("C", &self.c)] {
            let r = rank(&m.to_dense(), 1e-12);
            if r < m.nrows() {
                return Err(Error::RankDeficient(format!("{name} has rank {r} < {}", m.nrows())));
            }
        }
        Ok(())
    }

    /// Writes `A.mtx`, `B.mtx`, `C.mtx` and `meta.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let sym = if self.a.asymmetry() == 0.0 { Symmetry::Symmetric } else { Symmetry::General };
        save_matrix_market(&self.a, sym, &dir.join("A.mtx"))?;
        save_matrix_market(&self.b, Symmetry::General, &dir.join("B.mtx"))?;
        save_matrix_market(&self.c, Symmetry::General, &dir.join("C.mtx"))?;
        let (n, m, l) = self.dims();
        let meta = Metadata { n, m, l, info: self.info.clone() };
        let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        fs::write(dir.join("meta.json"), json)?;
        Ok(())
    }

    /// Reads a directory produced by [`BlockSaddleSystem::save`]; `meta.json` is optional.
    pub fn load(dir: &Path) -> Result<Self> {
        let a = load_matrix_market(&dir.join("A.mtx"))?;
        let b = load_matrix_market(&dir.join("B.mtx"))?;
        let c = load_matrix_market(&dir.join("C.mtx"))?;
        let mut sys = Self::new(a, b, c)?;
        let meta_path = dir.join("meta.json");
        if meta_path.exists() {
            let meta: Metadata = serde_json::from_str(&fs::read_to_string(meta_path)?)
                .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
            if (meta.n, meta.m, meta.l) != sys.dims() {
                return Err(Error::DimensionMismatch(format!(
                    "meta.json declares {:?}, matrices give {:?}",
                    (meta.n, meta.m, meta.l),
                    sys.dims()
                )));
            }
            sys.info = meta.info;
        } else {
            sys.info = ProblemInfo::named("file");
        }
        Ok(sys)
    }
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    n: usize,
    m: usize,
    l: usize,
    #[serde(flatten)]
    info: ProblemInfo,
}

/// `p × (p+1)` bidiagonal matrix with 2 on the diagonal and -1 above it.
pub fn e1_matrix(p: usize) -> SparseMatrix {
    let mut t = Vec::with_capacity(2 * p);
    for k in 0..p {
        t.push((k, k, 2.0));
        t.push((k, k + 1, -1.0));
    }
    SparseMatrix::from_triplets(p, p + 1, &t).expect("valid bidiagonal pattern")
}

/// `E = [E₁ ⊗ I_p; I_p ⊗ E₁]`, of shape `2p² × p(p+1)`.
pub fn e_matrix(p: usize) -> Result<SparseMatrix> {
    let e1 = e1_matrix(p);
    let ip = SparseMatrix::identity(p);
    let top = kron(&e1, &ip)?;
    let bottom = kron(&ip, &e1)?;
    SparseMatrix::block(&[p * p, p * p], &[p * (p + 1)], &[(0, 0, &top), (1, 0, &bottom)])
}

/// First test problem with the default diagonal formula.
pub fn gen_example1(p: usize) -> Result<BlockSaddleSystem> {
    gen_example1_with(p, DiagonalFormula::Squared)
}

/// First test problem: `n = 5p² + p`, `m = 2p²`, `l = p² + p`.
pub fn gen_example1_with(p: usize, formula: DiagonalFormula) -> Result<BlockSaddleSystem> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("p must be at least 2, got {p}")));
    }
    let p1 = p.checked_mul(p).ok_or_else(|| Error::Overflow(format!("p = {p}")))?;
    let p2 = p1 + p;
    let n = 5 * p1 + p;

    // W is the outer product u uᵀ; entries that underflow are simply absent.
    let u: Vec<f64> = (1..=p2).map(|i| (-2.0 * (i as f64 / 3.0).powi(2)).exp()).collect();
    let mut wt = Vec::new();
    for (i, &ui) in u.iter().enumerate() {
        for (j, &uj) in u.iter().enumerate() {
            let v = ui * uj;
            if v != 0.0 {
                wt.push((i, j, v));
            }
        }
        if ui == 0.0 {
            break;
        }
    }
    let w = SparseMatrix::from_triplets(p2, p2, &wt)?;
    let a11 = w.transpose().matmul(&w)?.add(2.0, &SparseMatrix::identity(p2), 1.0)?;

    let (d2, d3): (Vec<f64>, Vec<f64>) = (1..=2 * p1)
        .map(|j| {
            let jf = j as f64;
            let pf = p1 as f64;
            match formula {
                DiagonalFormula::Squared => {
                    let d2 = if j <= p1 { 1.0 } else { 1e-5 * (jf - pf).powi(2) };
                    (d2, 1e-5 * (jf + pf).powi(2))
                }
                DiagonalFormula::Literal => {
                    let d2 = if j <= p1 { 1.0 } else { 1e-5 * (jf - pf * pf) };
                    (d2, 1e-5 * (jf + pf * pf))
                }
            }
        })
        .unzip();
    let dd2 = SparseMatrix::from_diagonal(&d2);
    let dd3 = SparseMatrix::from_diagonal(&d3);
    let a = SparseMatrix::block(
        &[p2, 2 * p1, 2 * p1],
        &[p2, 2 * p1, 2 * p1],
        &[(0, 0, &a11), (1, 1, &dd2), (2, 2, &dd3)],
    )?;

    let e = e_matrix(p)?;
    let id = SparseMatrix::identity(2 * p1);
    let neg_id = SparseMatrix::from_diagonal(&vec![-1.0; 2 * p1]);
    let b = SparseMatrix::block(&[2 * p1], &[p2, 2 * p1, 2 * p1], &[(0, 0, &e), (0, 1, &neg_id), (0, 2, &id)])?;
    let c = e.transpose();
    debug_assert_eq!(b.ncols(), n);

    let mut info = ProblemInfo::named("ex1");
    info.p = Some(p);
    info.diagonal_formula = Some(formula);
    Ok(BlockSaddleSystem { a, b, c, info })
}

/// Second test problem: diagonal `A` with a clustered low end and uniform dense `B`, `C`.
///
/// A draw with rank-deficient `B` or `C` is discarded and the next seed is used;
/// skipped seeds are listed in `info.regenerated_from`.
pub fn gen_example2(n: usize, m: usize, l: usize, seed: u64) -> Result<BlockSaddleSystem> {
    if !(n >= m && m >= l && l >= 1) {
        return Err(Error::InvalidArgument(format!("need n >= m >= l >= 1, got {n}, {m}, {l}")));
    }
    let mut skipped = Vec::new();
    let mut s = seed;
    for _ in 0..16 {
        let sys = draw_example2(n, m, l, s)?;
        match sys.check_full_row_rank() {
            Ok(()) => {
                let mut sys = sys;
                sys.info.regenerated_from = skipped;
                return Ok(sys);
            }
            Err(Error::RankDeficient(_)) => {
                skipped.push(s);
                s = s.wrapping_add(1);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::RankDeficient(format!("16 consecutive draws from seed {seed} were rank deficient")))
}

fn draw_example2(n: usize, m: usize, l: usize, seed: u64) -> Result<BlockSaddleSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = 1.0 + 10.0 * rng.sample::<f64, _>(Open01);
    let mut w: Vec<f64> = (0..n).map(|_| z * rng.sample::<f64, _>(Open01)).collect();
    w.sort_by(f64::total_cmp);
    for v in &mut w {
        *v += 0.1;
    }
    let first = w[0];
    for v in w.iter_mut().take(10) {
        *v = first;
    }
    let a = SparseMatrix::from_diagonal(&w);
    let b = SparseMatrix::from_dense(&DenseMatrix::from_fn(m, n, |_, _| rng.sample(Open01)));
    let c = SparseMatrix::from_dense(&DenseMatrix::from_fn(l, m, |_, _| rng.sample(Open01)));
    let mut info = ProblemInfo::named("ex2");
    info.seed = Some(seed);
    Ok(BlockSaddleSystem { a, b, c, info })
}

/// Exact solution used to build the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhsKind {
    /// `w* = (1, …, 1)`.
    UnitSolution,
    /// `w*` with independent uniform(0, 1) entries.
    RandomSolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhsSpec {
    pub kind: RhsKind,
    pub seed: u64,
}

impl RhsSpec {
    pub fn ones() -> Self {
        Self { kind: RhsKind::UnitSolution, seed: 0 }
    }

    pub fn random(seed: u64) -> Self {
        Self { kind: RhsKind::RandomSolution, seed }
    }
}

/// Returns `(b, w*)` with `b = 𝒜 w*`.
pub fn make_rhs(sys: &BlockSaddleSystem, spec: RhsSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let big = sys.assemble()?;
    make_rhs_with(&big, spec)
}

/// Like [`make_rhs`] for an already assembled matrix.
pub fn make_rhs_with(assembled: &SparseMatrix, spec: RhsSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = assembled.nrows();
    let w_star = match spec.kind {
        RhsKind::UnitSolution => vec![1.0; n],
        RhsKind::RandomSolution => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            (0..n).map(|_| rng.sample(Open01)).collect()
        }
    };
    let b = assembled.spmv(&w_star, false)?;
    Ok((b, w_star))
}

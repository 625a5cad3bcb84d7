use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dsaddle::factor::DropRule;
use dsaddle::mm::{save_matrix_market, write_vector_csv, Symmetry};
use dsaddle::precond::{ApproxOptions, ApproximationSet, Block11, InnerOptions, Mode, PrecondTag};
use dsaddle::problem::{DiagonalFormula, RhsSpec};
use dsaddle::spectral::{BoundVariant, Side, XTilde};
use dsaddle::{Error, Result};
use dsaddle_cli::bench::{run_bench, write_csv, write_history, BenchConfig};
use dsaddle_cli::spectrum::{parse_side, parse_variant, run_bounds, run_spectrum, write_eigs_csv, PrecondChoice, SpectrumConfig};
use dsaddle_cli::{output_path, parse_diagonal_formula, ProblemKind, ProblemSpec, DEFAULT_MAX_DENSE};

/// Block preconditioners for double saddle-point systems.
///
/// Outputs go to --out when given, otherwise under $DSADDLE_OUT, otherwise the
/// current directory (bench and solve print to stdout instead).
#[derive(Parser)]
#[command(name = "dsaddle", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a test system as A.mtx, B.mtx, C.mtx and meta.json.
    Gen(GenArgs),
    /// Solve one system with one preconditioner.
    Solve(SolveArgs),
    /// Sweep problems and preconditioners, one CSV row per pair.
    Bench(BenchArgs),
    /// Dense spectrum of a preconditioned system, with bound checks where they apply.
    Spectrum(SpectrumArgs),
    /// Gamma ranges and the eigenvalue bounds derived from them.
    Bounds(BoundsArgs),
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// ex1 (structured, sized by --p), ex2 (random, sized by --n/--m/--l) or file (--input).
    #[arg(long, default_value = "ex1", value_parser = parse_problem)]
    problem: ProblemKind,
    /// Grid parameter of ex1; a comma-separated list for bench.
    #[arg(long, value_delimiter = ',', default_value = "16")]
    p: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 80)]
    m: usize,
    #[arg(long, default_value_t = 60)]
    l: usize,
    /// Seed of the ex2 generator.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory written by `gen`, for --problem file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Diagonal blocks of ex1: squared or literal.
    #[arg(long, default_value = "squared", value_parser = parse_formula)]
    diag_formula: DiagonalFormula,
}

impl ProblemArgs {
    fn specs(&self) -> Result<Vec<ProblemSpec>> {
        Ok(match self.problem {
            ProblemKind::Ex1 => {
                if self.p.iter().any(|p| *p == 0) {
                    return Err(Error::InvalidArgument("--p must be positive".into()));
                }
                self.p.iter().map(|&p| ProblemSpec::Ex1 { p, formula: self.diag_formula }).collect()
            }
            ProblemKind::Ex2 => vec![ProblemSpec::Ex2 { n: self.n, m: self.m, l: self.l, seed: self.seed }],
            ProblemKind::File => {
                let dir = self.input.clone().ok_or_else(|| Error::InvalidArgument("--problem file needs --input DIR".into()))?;
                vec![ProblemSpec::File(dir)]
            }
        })
    }

    fn single(&self) -> Result<ProblemSpec> {
        let specs = self.specs()?;
        if specs.len() != 1 {
            return Err(Error::InvalidArgument("this command takes a single --p".into()));
        }
        Ok(specs.into_iter().next().unwrap())
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// exact (dense Schur complements) or inexact.
    #[arg(long, default_value = "inexact", value_parser = parse_mode)]
    mode: Mode,
    /// ones (w* = 1) or random (uniform w*, seeded by --rhs-seed).
    #[arg(long, default_value = "ones")]
    rhs: String,
    #[arg(long, default_value_t = 1)]
    rhs_seed: u64,
    /// Outer tolerance; 10/N² when omitted.
    #[arg(long)]
    tol: Option<f64>,
    /// Outer iteration cap; min(N, 500) when omitted.
    #[arg(long)]
    maxit: Option<usize>,
    #[arg(long, default_value_t = 1e-4)]
    inner_tol: f64,
    #[arg(long, default_value_t = 200)]
    inner_maxit: usize,
    /// (1,1) block of the inexact preconditioners: exact, diag or identity.
    #[arg(long, default_value = "exact", value_parser = parse_block11)]
    block11: Block11,
    /// Drop tolerance of the incomplete Cholesky factor.
    #[arg(long, default_value_t = 1e-4)]
    ic_tau: f64,
    /// relative or absolute dropping.
    #[arg(long, default_value = "relative", value_parser = parse_drop)]
    ic_drop: DropRule,
    /// Refuse dense matrices above this order.
    #[arg(long, default_value_t = DEFAULT_MAX_DENSE)]
    max_dense: usize,
}

impl SolverArgs {
    fn rhs(&self) -> Result<RhsSpec> {
        match self.rhs.as_str() {
            "ones" => Ok(RhsSpec::ones()),
            "random" => Ok(RhsSpec::random(self.rhs_seed)),
            s => Err(Error::InvalidArgument(format!("unknown rhs {s:?}; expected ones or random"))),
        }
    }

    fn approx(&self) -> ApproxOptions {
        ApproxOptions { block11: self.block11, ic_tau: self.ic_tau, ic_drop: self.ic_drop, ..ApproxOptions::default() }
    }

    fn config(&self, problems: Vec<ProblemSpec>, preconds: Vec<PrecondTag>) -> Result<BenchConfig> {
        let mut cfg = BenchConfig::new(problems, preconds);
        cfg.mode = self.mode;
        cfg.rhs = self.rhs()?;
        cfg.tol = self.tol;
        cfg.maxit = self.maxit;
        cfg.inner = InnerOptions { tol: self.inner_tol, maxit: self.inner_maxit };
        cfg.approx = self.approx();
        cfg.max_dense = self.max_dense;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// pd, p1, p2, p3, q1, q2, q3m, qa, q4, qb, q5 or pasb.
    #[arg(long, default_value = "qa", value_parser = parse_tag)]
    precond: PrecondTag,
    /// Write the residual history as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Write the factors of the inexact preconditioner as Matrix Market into this directory.
    #[arg(long)]
    dump_factors: Option<PathBuf>,
    /// Write the solution vector as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Comma-separated preconditioners.
    #[arg(long, value_delimiter = ',', default_value = "qa,q5,pd,p3,q2,q4", value_parser = parse_tag)]
    precond: Vec<PrecondTag>,
    /// CSV file; stdout when omitted and $DSADDLE_OUT is unset.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectralArgs {
    /// A catalogue name or `simplified`.
    #[arg(long, default_value = "qa", value_parser = parse_choice)]
    precond: PrecondChoice,
    #[arg(long, default_value = "inexact", value_parser = parse_mode)]
    mode: Mode,
    /// How X̃ enters the gamma pencils: s-tilde or s-hat.
    #[arg(long, default_value = "s-tilde", value_parser = parse_x_tilde)]
    x_tilde: XTilde,
    #[arg(long, default_value = "exact", value_parser = parse_block11)]
    block11: Block11,
    #[arg(long, default_value_t = 1e-4)]
    ic_tau: f64,
    #[arg(long, default_value = "relative", value_parser = parse_drop)]
    ic_drop: DropRule,
    #[arg(long, default_value_t = DEFAULT_MAX_DENSE)]
    max_dense: usize,
}

impl SpectralArgs {
    fn config(&self, problem: ProblemSpec) -> SpectrumConfig {
        let mut cfg = SpectrumConfig::new(problem, self.precond, self.mode);
        cfg.x_tilde = self.x_tilde;
        cfg.approx = ApproxOptions { block11: self.block11, ic_tau: self.ic_tau, ic_drop: self.ic_drop, ..ApproxOptions::default() };
        cfg.max_dense = self.max_dense;
        cfg
    }
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    spectral: SpectralArgs,
    /// left (𝒬⁻¹𝒜) or right (𝒜𝒬⁻¹).
    #[arg(long, default_value = "right", value_parser = parse_side_arg)]
    side: Side,
    /// Inner PCG tolerance used while forming the preconditioned matrix.
    #[arg(long, default_value_t = 1e-12)]
    inner_tol: f64,
    #[arg(long, default_value_t = 1000)]
    inner_maxit: usize,
    /// Comma-separated bounds to check: general, sharp, synthetic.
    #[arg(long, value_delimiter = ',', value_parser = parse_variant_arg)]
    variant: Vec<BoundVariant>,
    /// Directory for eigs.csv and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    spectral: SpectralArgs,
    /// JSON file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn to_string_err<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn parse_problem(s: &str) -> std::result::Result<ProblemKind, String> {
    to_string_err(s.parse())
}

fn parse_formula(s: &str) -> std::result::Result<DiagonalFormula, String> {
    to_string_err(parse_diagonal_formula(s))
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    to_string_err(s.parse())
}

fn parse_tag(s: &str) -> std::result::Result<PrecondTag, String> {
    to_string_err(s.parse())
}

fn parse_choice(s: &str) -> std::result::Result<PrecondChoice, String> {
    to_string_err(s.parse())
}

fn parse_block11(s: &str) -> std::result::Result<Block11, String> {
    to_string_err(s.parse())
}

fn parse_drop(s: &str) -> std::result::Result<DropRule, String> {
    to_string_err(s.parse())
}

fn parse_x_tilde(s: &str) -> std::result::Result<XTilde, String> {
    to_string_err(s.parse())
}

fn parse_side_arg(s: &str) -> std::result::Result<Side, String> {
    to_string_err(parse_side(s))
}

fn parse_variant_arg(s: &str) -> std::result::Result<BoundVariant, String> {
    to_string_err(parse_variant(s))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn gen(args: GenArgs) -> Result<()> {
    let spec = args.problem.single()?;
    let sys = spec.build()?;
    let dir = output_path(args.out.as_deref(), "system");
    sys.save(&dir)?;
    let (n, m, l) = sys.dims();
    eprintln!("wrote {} (n={n}, m={m}, l={l})", dir.display());
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let spec = args.problem.single()?;
    if let Some(dir) = &args.dump_factors {
        if args.solver.mode != Mode::Inexact {
            return Err(Error::InvalidArgument("--dump-factors needs --mode inexact".into()));
        }
        dump_factors(&spec, &args.solver, dir)?;
    }
    let cfg = args.solver.config(vec![spec], vec![args.precond])?;
    let rows = run_bench(&cfg)?;
    let row = &rows[0];
    write_csv(&rows, io::stdout().lock())?;
    if row.flag == "error" {
        return Err(Error::InvalidArgument(row.note.clone()));
    }
    if let Some(path) = &args.history {
        write_history(&row.history, create(path)?)?;
    }
    if let Some(path) = &args.out {
        let mut w = create(path)?;
        write_vector_csv(&row.solution, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn dump_factors(spec: &ProblemSpec, solver: &SolverArgs, dir: &Path) -> Result<()> {
    let sys = spec.build()?;
    let ap = ApproximationSet::build(&sys, solver.approx())?;
    fs::create_dir_all(dir)?;
    save_matrix_market(&ap.s_hat, Symmetry::Symmetric, &dir.join("S_hat.mtx"))?;
    save_matrix_market(&ap.l_s.l, Symmetry::General, &dir.join("L_S.mtx"))?;
    save_matrix_market(&ap.x0, Symmetry::Symmetric, &dir.join("X0.mtx"))?;
    save_matrix_market(&ap.m.l, Symmetry::General, &dir.join("L_X0.mtx"))?;
    if let Some(f) = &ap.a_factor {
        save_matrix_market(&f.l, Symmetry::General, &dir.join("L_A.mtx"))?;
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let cfg = args.solver.config(args.problem.specs()?, args.precond)?;
    let rows = run_bench(&cfg)?;
    let target = match (&args.out, std::env::var_os(dsaddle_cli::OUT_DIR_ENV)) {
        (None, None) => None,
        (out, _) => Some(output_path(out.as_deref(), "bench.csv")),
    };
    match target {
        Some(path) => {
            write_csv(&rows, create(&path)?)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => write_csv(&rows, io::stdout().lock())?,
    }
    Ok(())
}

fn spectrum(args: SpectrumArgs) -> Result<()> {
    let mut cfg = args.spectral.config(args.problem.single()?);
    cfg.side = args.side;
    cfg.inner = InnerOptions { tol: args.inner_tol, maxit: args.inner_maxit };
    cfg.variants = args.variant;
    let (spec, report) = run_spectrum(&cfg)?;
    let dir = output_path(args.out.as_deref(), "spectrum");
    fs::create_dir_all(&dir)?;
    write_eigs_csv(&spec, create(&dir.join("eigs.csv"))?)?;
    let mut w = create(&dir.join("report.json"))?;
    serde_json::to_writer_pretty(&mut w, &report).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    w.flush()?;
    eprintln!(
        "{} eigenvalues ({} real, {} complex), real range {:?}; wrote {}",
        spec.values.len(),
        report.n_real,
        report.n_complex,
        report.real_range,
        dir.display()
    );
    for b in &report.bounds {
        eprintln!("{:?}: interval {:?}, pass {}", b.variant, b.real_interval, b.pass);
    }
    Ok(())
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let cfg = args.spectral.config(args.problem.single()?);
    let summary = run_bounds(&cfg)?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{json}")?;
            w.flush()?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Bounds(a) => bounds(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

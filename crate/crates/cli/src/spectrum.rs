//! Dense spectra of preconditioned systems and their bound reports.
//!
//! `eigs.csv` has columns `re,im`, one eigenvalue per line. `report.json` holds a
//! [`SpectrumReport`].

use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use dsaddle::precond::{ApproxOptions, ApproximationSet, BlockPreconditioner, ExactSchurSet, InnerOptions, Mode, PrecondTag, SimplifiedSet};
use dsaddle::spectral::{
    complex_disc_bound, preconditioned_spectrum, real_interval_general, simplified_bounds, verify_bounds, BoundReport,
    BoundVariant, GammaInputs, GammaRanges, Side, SimplifiedBounds, Spectrum, XTilde,
};
use dsaddle::{BlockSaddleSystem, Error, Result};

use crate::{check_dense_size, ProblemSpec, DEFAULT_MAX_DENSE};

/// A catalogue preconditioner, or the simplified `Q̄` with `Â = I`, `Ŝ = BBᵀ`, `X̂ = C(BBᵀ)⁻¹Cᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondChoice {
    Catalogue(PrecondTag),
    Simplified,
}

impl FromStr for PrecondChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simplified" | "simp" => Ok(PrecondChoice::Simplified),
            _ => s.parse().map(PrecondChoice::Catalogue),
        }
    }
}

impl std::fmt::Display for PrecondChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PrecondChoice::Catalogue(t) => write!(f, "{t}"),
            PrecondChoice::Simplified => f.write_str("simplified"),
        }
    }
}

pub fn parse_variant(s: &str) -> Result<BoundVariant> {
    match s {
        "general" => Ok(BoundVariant::General),
        "sharp" => Ok(BoundVariant::SimplifiedSharp),
        "synthetic" => Ok(BoundVariant::SimplifiedSynthetic),
        _ => Err(Error::InvalidArgument(format!("unknown bound variant {s:?}"))),
    }
}

pub fn parse_side(s: &str) -> Result<Side> {
    match s {
        "left" => Ok(Side::Left),
        "right" => Ok(Side::Right),
        _ => Err(Error::InvalidArgument(format!("unknown side {s:?}"))),
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumConfig {
    pub problem: ProblemSpec,
    pub precond: PrecondChoice,
    pub mode: Mode,
    pub side: Side,
    pub approx: ApproxOptions,
    /// Inner PCG settings; tight by default so the preconditioner is a fixed linear map.
    pub inner: InnerOptions,
    pub x_tilde: XTilde,
    /// Bounds to check; chosen from the preconditioner when empty.
    pub variants: Vec<BoundVariant>,
    pub max_dense: usize,
}

impl SpectrumConfig {
    pub fn new(problem: ProblemSpec, precond: PrecondChoice, mode: Mode) -> Self {
        Self {
            problem,
            precond,
            mode,
            side: Side::Right,
            approx: ApproxOptions::default(),
            inner: InnerOptions { tol: 1e-12, maxit: 1000 },
            x_tilde: XTilde::default(),
            variants: Vec::new(),
            max_dense: DEFAULT_MAX_DENSE,
        }
    }

    /// Whether eigenvalue bounds exist for this preconditioner.
    fn bounded(&self) -> bool {
        matches!(
            (self.precond, self.mode),
            (PrecondChoice::Simplified, _) | (PrecondChoice::Catalogue(PrecondTag::Q3Plus), Mode::Inexact)
        )
    }

    fn variants(&self) -> Vec<BoundVariant> {
        if !self.variants.is_empty() || !self.bounded() {
            return self.variants.clone();
        }
        match self.precond {
            PrecondChoice::Simplified => vec![BoundVariant::SimplifiedSharp, BoundVariant::SimplifiedSynthetic],
            PrecondChoice::Catalogue(_) => vec![BoundVariant::General],
        }
    }
}

/// Points the exact preconditioned spectrum collapses onto, where known.
pub fn theorem_points(tag: PrecondTag) -> Option<Vec<Complex64>> {
    let c = Complex64::new;
    let h = 3f64.sqrt() / 2.0;
    match tag {
        PrecondTag::Q1 | PrecondTag::Q5 => Some(vec![c(1.0, 0.0), c(0.5, h), c(0.5, -h)]),
        PrecondTag::Q2 => Some(vec![c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)]),
        PrecondTag::Q3Minus | PrecondTag::Q4Minus => Some(vec![c(1.0, 0.0), c(-1.0, 0.0)]),
        PrecondTag::Q3Plus | PrecondTag::Q4Plus => Some(vec![c(1.0, 0.0)]),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub problem: String,
    pub order: usize,
    pub preconditioner: String,
    pub mode: String,
    pub side: String,
    pub n_real: usize,
    pub n_complex: usize,
    pub real_range: Option<(f64, f64)>,
    /// Largest `|λ - 1|` over non-real eigenvalues.
    pub max_complex_distance: Option<f64>,
    pub theorem_points: Option<Vec<[f64; 2]>>,
    pub max_distance_to_theorem_points: Option<f64>,
    pub bounds: Vec<BoundReport>,
}

/// Everything derivable from the γ-ranges, without eigenvalues.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsSummary {
    pub problem: String,
    pub preconditioner: String,
    pub gamma: GammaRanges,
    pub one_in_gamma_a: bool,
    pub complex_radius: f64,
    pub ky0_radius: f64,
    pub general_interval: (f64, f64),
    pub simplified: Option<SimplifiedBounds>,
}

fn describe(sys: &BlockSaddleSystem) -> String {
    let i = &sys.info;
    let mut s = i.problem.clone();
    if let Some(p) = i.p {
        s.push_str(&format!(" p={p}"));
    }
    if let Some(seed) = i.seed {
        s.push_str(&format!(" seed={seed}"));
    }
    let (n, m, l) = sys.dims();
    s.push_str(&format!(" n={n} m={m} l={l}"));
    s
}

fn gammas(cfg: &SpectrumConfig, sys: &BlockSaddleSystem, ap: Option<&ApproximationSet>, set: Option<&SimplifiedSet>) -> Result<GammaRanges> {
    let inputs = match (set, ap) {
        (Some(set), _) => GammaInputs::for_simplified(sys, set)?,
        (None, Some(ap)) => GammaInputs::for_qbar(sys, ap, cfg.x_tilde)?,
        (None, None) => return Err(Error::InvalidArgument("bounds need an inexact or simplified preconditioner".into())),
    };
    GammaRanges::compute(&inputs)
}

/// Dense spectrum of the preconditioned matrix and its report.
pub fn run_spectrum(cfg: &SpectrumConfig) -> Result<(Spectrum, SpectrumReport)> {
    if let Some(order) = cfg.problem.order_hint() {
        check_dense_size("spectrum", order, cfg.max_dense)?;
    }
    let sys = cfg.problem.build()?;
    check_dense_size("spectrum", sys.order(), cfg.max_dense)?;
    let source = format!("{} {} {}", describe(&sys), cfg.precond, cfg.mode);

    let mut ap = None;
    let mut es = None;
    let mut set = None;
    match (cfg.precond, cfg.mode) {
        (PrecondChoice::Simplified, _) => set = Some(SimplifiedSet::build(&sys)?),
        (_, Mode::Exact) => es = Some(ExactSchurSet::build(&sys)?),
        (_, Mode::Inexact) => ap = Some(ApproximationSet::build(&sys, cfg.approx)?),
    }
    let pc = match (cfg.precond, &ap, &es, &set) {
        (PrecondChoice::Simplified, _, _, Some(set)) => set.preconditioner(&sys)?,
        (PrecondChoice::Catalogue(tag), _, Some(es), _) => BlockPreconditioner::exact(tag, &sys, es)?,
        (PrecondChoice::Catalogue(tag), Some(ap), _, _) => BlockPreconditioner::inexact(tag, &sys, ap, cfg.inner)?,
        _ => unreachable!("setup matches the preconditioner choice"),
    };
    let spec = preconditioned_spectrum(&sys, &pc, cfg.side, &source)?;

    let mut bounds = Vec::new();
    let variants = cfg.variants();
    if !variants.is_empty() {
        let g = gammas(cfg, &sys, ap.as_ref(), set.as_ref())?;
        for v in variants {
            bounds.push(verify_bounds(&spec, &g, v)?);
        }
    }
    let points = match (cfg.precond, cfg.mode) {
        (PrecondChoice::Catalogue(tag), Mode::Exact) => theorem_points(tag),
        _ => None,
    };
    let complex = spec.complex_values();
    let report = SpectrumReport {
        problem: describe(&sys),
        order: sys.order(),
        preconditioner: cfg.precond.to_string(),
        mode: cfg.mode.to_string(),
        side: match cfg.side {
            Side::Left => "left".into(),
            Side::Right => "right".into(),
        },
        n_real: spec.values.len() - complex.len(),
        n_complex: complex.len(),
        real_range: spec.real_range(),
        max_complex_distance: complex.iter().map(|z| (z - 1.0).norm()).reduce(f64::max),
        max_distance_to_theorem_points: points.as_ref().map(|p| spec.max_distance_to(p)),
        theorem_points: points.map(|p| p.iter().map(|z| [z.re, z.im]).collect()),
        bounds,
    };
    Ok((spec, report))
}

/// γ-ranges and every interval derived from them.
pub fn run_bounds(cfg: &SpectrumConfig) -> Result<BoundsSummary> {
    if !cfg.bounded() {
        return Err(Error::InvalidArgument(format!(
            "no eigenvalue bounds for {} in {} mode; use qa with --mode inexact, or simplified",
            cfg.precond, cfg.mode
        )));
    }
    let sys = cfg.problem.build()?;
    let (_, m, l) = sys.dims();
    check_dense_size("bounds", sys.dims().0.max(m).max(l), cfg.max_dense)?;
    let (g, simplified) = match cfg.precond {
        PrecondChoice::Simplified => {
            let set = SimplifiedSet::build(&sys)?;
            let g = gammas(cfg, &sys, None, Some(&set))?;
            (g, Some(simplified_bounds(g.gamma_a)?))
        }
        PrecondChoice::Catalogue(_) => {
            let ap = ApproximationSet::build(&sys, cfg.approx)?;
            (gammas(cfg, &sys, Some(&ap), None)?, None)
        }
    };
    Ok(BoundsSummary {
        problem: describe(&sys),
        preconditioner: cfg.precond.to_string(),
        gamma: g,
        one_in_gamma_a: g.one_in_gamma_a(),
        complex_radius: 1.0,
        ky0_radius: complex_disc_bound(g.gamma_a.0),
        general_interval: real_interval_general(&g),
        simplified,
    })
}

pub fn write_eigs_csv<W: Write>(spec: &Spectrum, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    out.write_record(["re", "im"]).map_err(err)?;
    for z in &spec.values {
        out.write_record([format!("{:e}", z.re), format!("{:e}", z.im)]).map_err(err)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choice_parsing() {
        assert_eq!("simplified".parse::<PrecondChoice>().unwrap(), PrecondChoice::Simplified);
        assert_eq!("qa".parse::<PrecondChoice>().unwrap(), PrecondChoice::Catalogue(PrecondTag::Q3Plus));
        assert!("zz".parse::<PrecondChoice>().is_err());
        assert_eq!(parse_variant("sharp").unwrap(), BoundVariant::SimplifiedSharp);
        assert!(parse_side("up").is_err());
    }

    #[test]
    fn theorem_points_lie_on_unit_circle() {
        for tag in PrecondTag::ALL {
            for z in theorem_points(tag).unwrap_or_default() {
                assert!((z.norm() - 1.0).abs() < 1e-15);
            }
        }
        assert!(theorem_points(PrecondTag::PD).is_none());
    }

    #[test]
    fn default_variants() {
        let spec = ProblemSpec::Ex2 { n: 6, m: 4, l: 2, seed: 1 };
        let cfg = SpectrumConfig::new(spec.clone(), PrecondChoice::Simplified, Mode::Exact);
        assert_eq!(cfg.variants().len(), 2);
        let cfg = SpectrumConfig::new(spec.clone(), PrecondChoice::Catalogue(PrecondTag::Q3Plus), Mode::Inexact);
        assert_eq!(cfg.variants(), vec![BoundVariant::General]);
        let cfg = SpectrumConfig::new(spec, PrecondChoice::Catalogue(PrecondTag::Q5), Mode::Inexact);
        assert!(cfg.variants().is_empty());
        assert!(run_bounds(&cfg).is_err());
    }

    #[test]
    fn eigs_csv_layout() {
        let spec = Spectrum { values: vec![Complex64::new(1.0, -0.5)], source: String::new() };
        let mut buf = Vec::new();
        write_eigs_csv(&spec, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "re,im\n1e0,-5e-1\n");
    }
}

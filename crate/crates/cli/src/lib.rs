//! Drivers behind the `dsaddle` binary: problem selection, benchmark sweeps and
//! spectrum reports. Kept in a library so the sweeps can be tested in-process.

pub mod bench;
pub mod spectrum;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use dsaddle::problem::{gen_example1_with, gen_example2, DiagonalFormula};
use dsaddle::{BlockSaddleSystem, Error, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DSADDLE_OUT";

/// Largest order of a dense matrix the drivers will form unless told otherwise.
pub const DEFAULT_MAX_DENSE: usize = 2500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Ex1,
    Ex2,
    File,
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ex1" => Ok(ProblemKind::Ex1),
            "ex2" => Ok(ProblemKind::Ex2),
            "file" => Ok(ProblemKind::File),
            _ => Err(Error::InvalidArgument(format!("unknown problem {s:?}; expected ex1, ex2 or file"))),
        }
    }
}

/// Everything needed to build one system.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Ex1 { p: usize, formula: DiagonalFormula },
    Ex2 { n: usize, m: usize, l: usize, seed: u64 },
    File(PathBuf),
}

impl ProblemSpec {
    pub fn build(&self) -> Result<BlockSaddleSystem> {
        match self {
            ProblemSpec::Ex1 { p, formula } => gen_example1_with(*p, *formula),
            ProblemSpec::Ex2 { n, m, l, seed } => gen_example2(*n, *m, *l, *seed),
            ProblemSpec::File(dir) => BlockSaddleSystem::load(dir),
        }
    }

    /// The `p` column of the benchmark output.
    pub fn p(&self) -> Option<usize> {
        match self {
            ProblemSpec::Ex1 { p, .. } => Some(*p),
            _ => None,
        }
    }

    /// Order of the assembled system, when known without building it.
    pub fn order_hint(&self) -> Option<usize> {
        match self {
            ProblemSpec::Ex1 { p, .. } => Some(8 * p * p + 2 * p),
            ProblemSpec::Ex2 { n, m, l, .. } => Some(n + m + l),
            ProblemSpec::File(_) => None,
        }
    }
}

pub fn parse_diagonal_formula(s: &str) -> Result<DiagonalFormula> {
    match s {
        "squared" => Ok(DiagonalFormula::Squared),
        "literal" => Ok(DiagonalFormula::Literal),
        _ => Err(Error::InvalidArgument(format!("unknown diagonal formula {s:?}"))),
    }
}

/// `explicit`, else `$DSADDLE_OUT/name`, else `./name`.
pub fn output_path(explicit: Option<&Path>, name: &str) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) => PathBuf::from(dir).join(name),
            None => PathBuf::from(name),
        },
    }
}

/// Refuses dense work beyond `limit` rows.
pub fn check_dense_size(what: &str, order: usize, limit: usize) -> Result<()> {
    if order > limit {
        return Err(Error::InvalidArgument(format!(
            "{what} needs a dense matrix of order {order}, above the limit {limit}; raise --max-dense to proceed"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_hint_matches_built_system() {
        for p in [2, 3, 5] {
            let spec = ProblemSpec::Ex1 { p, formula: DiagonalFormula::Squared };
            assert_eq!(spec.order_hint(), Some(spec.build().unwrap().order()));
        }
        let spec = ProblemSpec::Ex2 { n: 9, m: 6, l: 4, seed: 1 };
        assert_eq!(spec.order_hint(), Some(19));
    }

    #[test]
    fn explicit_output_path_wins() {
        assert_eq!(output_path(Some(Path::new("x/y.csv")), "bench.csv"), PathBuf::from("x/y.csv"));
    }

    #[test]
    fn dense_guard() {
        assert!(check_dense_size("t", 2500, 2500).is_ok());
        assert!(check_dense_size("t", 2501, 2500).is_err());
    }

    #[test]
    fn parses_names() {
        assert_eq!("ex2".parse::<ProblemKind>().unwrap(), ProblemKind::Ex2);
        assert!("ex3".parse::<ProblemKind>().is_err());
        assert_eq!(parse_diagonal_formula("literal").unwrap(), DiagonalFormula::Literal);
    }
}

use dsaddle::mm::{read_matrix_market, read_vector_csv, write_matrix_market, write_vector_csv, Symmetry};
use dsaddle::problem::{gen_example1, gen_example2, make_rhs, BlockSaddleSystem, RhsSpec};
use dsaddle::sparse::SparseMatrix;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn to_na(m: &SparseMatrix) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplets() {
        out[(i, j)] = v;
    }
    out
}

#[test]
fn example1_sizes() {
    let sys = gen_example1(2).unwrap();
    assert_eq!(sys.dims(), (22, 8, 6));
    assert_eq!(gen_example1(32).unwrap().order(), 8256);
    assert_eq!(to_na(&sys.b).rank(1e-10), 8);
    assert_eq!(to_na(&sys.c).rank(1e-10), 6);
}

#[test]
fn example1_a_is_spd() {
    let sys = gen_example1(3).unwrap();
    assert_eq!(sys.a.asymmetry(), 0.0);
    assert!(to_na(&sys.a).cholesky().is_some());
}

#[test]
fn example2_diagonal_profile() {
    for seed in 0..5 {
        let sys = gen_example2(40, 30, 20, seed).unwrap();
        let d = sys.a.diagonal();
        assert!(d.iter().all(|v| (0.1..11.1).contains(v)));
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
        assert!(d[..10].iter().all(|v| *v == d[0]));
        assert_eq!(sys.a.nnz(), 40);
    }
}

#[test]
fn example2_scalar_case() {
    let sys = gen_example2(1, 1, 1, 3).unwrap();
    let a = sys.a.get(0, 0);
    assert!((0.1..11.1).contains(&a));
    for v in [sys.b.get(0, 0), sys.c.get(0, 0)] {
        assert!(v > 0.0 && v < 1.0);
    }
}

#[test]
fn example2_is_deterministic() {
    let a = gen_example2(30, 20, 10, 11).unwrap();
    let b = gen_example2(30, 20, 10, 11).unwrap();
    assert_eq!(a.a, b.a);
    assert_eq!(a.b, b.b);
    assert_eq!(a.c, b.c);
    assert_ne!(gen_example2(30, 20, 10, 12).unwrap().b, a.b);
}

#[test]
fn random_rhs_is_reproducible_and_consistent() {
    let sys = gen_example2(60, 40, 30, 5).unwrap();
    let (b1, w1) = make_rhs(&sys, RhsSpec::random(9)).unwrap();
    let (b2, w2) = make_rhs(&sys, RhsSpec::random(9)).unwrap();
    assert_eq!(b1, b2);
    assert_eq!(w1, w2);
    let oracle = to_na(&sys.assemble().unwrap()) * DVector::from_vec(w1);
    let bn = DVector::from_vec(b1.clone()).norm();
    assert!((bn - oracle.norm()).abs() <= 1e-14 * oracle.norm());
    for (a, b) in b1.iter().zip(oracle.iter()) {
        assert!((a - b).abs() <= 1e-13 * (1.0 + b.abs()));
    }
}

#[test]
fn save_and_load_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let sys = gen_example1(3).unwrap();
    sys.save(dir.path()).unwrap();
    let back = BlockSaddleSystem::load(dir.path()).unwrap();
    assert_eq!(back.a, sys.a);
    assert_eq!(back.b, sys.b);
    assert_eq!(back.c, sys.c);
    assert_eq!(back.info.p, Some(3));
}

#[test]
fn malformed_matrix_market_is_rejected() {
    let bad = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
    assert!(read_matrix_market(bad.as_bytes()).is_err());
    let missing = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
    assert!(read_matrix_market(missing.as_bytes()).is_err());
    assert!(read_matrix_market("not a header\n".as_bytes()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matrix_market_roundtrip(r in 1usize..8, c in 1usize..8, t in prop::collection::vec((0usize..8, 0usize..8, -1e3f64..1e3), 0..30)) {
        let t: Vec<_> = t.into_iter().filter(|(i, j, _)| *i < r && *j < c).collect();
        let m = SparseMatrix::from_triplets(r, c, &t).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&m, Symmetry::General, &mut buf).unwrap();
        prop_assert_eq!(read_matrix_market(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn symmetric_matrix_market_roundtrip(n in 1usize..7, t in prop::collection::vec((0usize..7, 0usize..7, -10.0f64..10.0), 0..20)) {
        let mut sym = Vec::new();
        for (i, j, v) in t.into_iter().filter(|(i, j, _)| *i < n && *j < n) {
            sym.push((i, j, v));
            if i != j {
                sym.push((j, i, v));
            }
        }
        let m = SparseMatrix::from_triplets(n, n, &sym).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&m, Symmetry::Symmetric, &mut buf).unwrap();
        prop_assert_eq!(read_matrix_market(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn vector_csv_roundtrip(v in prop::collection::vec(-1e6f64..1e6, 0..40)) {
        let mut buf = Vec::new();
        write_vector_csv(&v, &mut buf).unwrap();
        prop_assert_eq!(read_vector_csv(buf.as_slice()).unwrap(), v);
    }
}

use dsaddle::dense::DenseMatrix;
use dsaddle::problem::{e1_matrix, e_matrix, gen_example1, make_rhs, BlockSaddleSystem, RhsSpec};
use dsaddle::sparse::{kron, triangular_solve, SparseMatrix, TriangularMode};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn to_na(m: &SparseMatrix) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplets() {
        out[(i, j)] = v;
    }
    out
}

fn sparse_strategy(max_dim: usize) -> impl Strategy<Value = SparseMatrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
        prop::collection::vec((0..r, 0..c, -10.0f64..10.0), 0..(r * c + 1))
            .prop_map(move |t| SparseMatrix::from_triplets(r, c, &t).unwrap())
    })
}

fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, n)
}

#[test]
fn spmv_small_cases() {
    let id = SparseMatrix::identity(2);
    assert_eq!(id.spmv(&[3.0, -1.0], false).unwrap(), vec![3.0, -1.0]);
    assert_eq!(e1_matrix(2).spmv(&[1.0, 1.0, 1.0], false).unwrap(), vec![1.0, 1.0]);
}

#[test]
fn e_matrix_matches_dense_assembly() {
    let p = 2;
    let e = e_matrix(p).unwrap();
    let rows = 2 * p * p;
    let cols = p * (p + 1);
    let mut dense = DMatrix::<f64>::zeros(rows, cols);
    // E₁ ⊗ I_p: row (k, s) couples columns (k, s) and (k+1, s)
    for k in 0..p {
        for s in 0..p {
            dense[(k * p + s, k * p + s)] = 2.0;
            dense[(k * p + s, (k + 1) * p + s)] = -1.0;
        }
    }
    // I_p ⊗ E₁
    for s in 0..p {
        for k in 0..p {
            dense[(p * p + s * p + k, s * (p + 1) + k)] = 2.0;
            dense[(p * p + s * p + k, s * (p + 1) + k + 1)] = -1.0;
        }
    }
    assert_eq!(to_na(&e), dense);
    let ones = e.spmv(&vec![1.0; cols], false).unwrap();
    assert!(ones.iter().all(|v| *v == 1.0));
}

#[test]
fn kron_examples() {
    assert_eq!(kron(&SparseMatrix::identity(2), &SparseMatrix::identity(3)).unwrap(), SparseMatrix::identity(6));
    let k = kron(&e1_matrix(2), &SparseMatrix::identity(2)).unwrap();
    assert_eq!(k.shape(), (4, 6));
    assert_eq!(k.nnz(), 8);
    assert!(k.values().iter().all(|v| *v == 2.0 || *v == -1.0));
    let a = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 2.0)]).unwrap();
    let b = SparseMatrix::from_triplets(2, 1, &[(0, 0, 3.0), (1, 0, 4.0)]).unwrap();
    let ab = kron(&a, &b).unwrap().to_dense();
    assert_eq!(ab.as_slice(), &[3.0, 6.0, 4.0, 8.0]);
}

#[test]
fn scalar_assembly_and_unit_rhs() {
    let one = |v| SparseMatrix::from_diagonal(&[v]);
    let sys = BlockSaddleSystem::new(one(2.0), one(1.0), one(1.0)).unwrap();
    let k = sys.assemble().unwrap().to_dense();
    assert_eq!(k.as_slice(), &[2.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    let (b, w) = make_rhs(&sys, RhsSpec::ones()).unwrap();
    assert_eq!(b, vec![3.0, 2.0, 1.0]);
    assert_eq!(w, vec![1.0; 3]);
}

#[test]
fn example1_order_and_rhs() {
    let sys = gen_example1(16).unwrap();
    assert_eq!(sys.order(), 2080);
    let k = sys.assemble().unwrap();
    let (b, _) = make_rhs(&sys, RhsSpec::ones()).unwrap();
    assert_eq!(k.spmv(&vec![1.0; 2080], false).unwrap(), b);
}

#[test]
fn assembled_blocks_match_dense_oracle() {
    let sys = gen_example1(3).unwrap();
    let (n, m, l) = sys.dims();
    let k = to_na(&sys.assemble().unwrap());
    let (a, b, c) = (to_na(&sys.a), to_na(&sys.b), to_na(&sys.c));
    assert_eq!(k.view((0, 0), (n, n)), a);
    assert_eq!(k.view((n, 0), (m, n)), b);
    assert_eq!(k.view((0, n), (n, m)), b.transpose());
    assert_eq!(k.view((n + m, n), (l, m)), c);
    assert_eq!(k.view((n, n + m), (m, l)), c.transpose());
    assert!(k.view((n, n), (m, m)).iter().all(|v| *v == 0.0));
    assert!(k.view((n + m, n + m), (l, l)).iter().all(|v| *v == 0.0));
    assert!(k.view((0, n + m), (n, l)).iter().all(|v| *v == 0.0));
}

#[test]
fn bidiagonal_solve_matches_dense_inverse() {
    let n = 10;
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 1.0 + 0.1 * i as f64));
        if i > 0 {
            t.push((i, i - 1, 0.3 * (i as f64).sin()));
        }
    }
    let l = SparseMatrix::from_triplets(n, n, &t).unwrap();
    let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
    let x = triangular_solve(&l, &b, TriangularMode::Lower).unwrap();
    let oracle = to_na(&l).try_inverse().unwrap() * DVector::from_vec(b);
    for (xi, oi) in x.iter().zip(oracle.iter()) {
        assert!((xi - oi).abs() <= 1e-13 * oi.abs().max(1.0));
    }
    let forced = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 0, 1.0), (1, 1, 2.0)]).unwrap();
    assert_eq!(triangular_solve(&forced, &[2.0, 3.0], TriangularMode::Lower).unwrap(), vec![1.0, 1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spmv_matches_dense(m in sparse_strategy(12), seed in any::<u64>()) {
        let x: Vec<f64> = (0..m.ncols()).map(|i| ((seed as f64) * 1e-3 + i as f64).sin()).collect();
        let y = m.spmv(&x, false).unwrap();
        let oracle = to_na(&m) * DVector::from_vec(x);
        for (a, b) in y.iter().zip(oracle.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn spmv_adjoint(m in sparse_strategy(12), x in vec_strategy(12), y in vec_strategy(12)) {
        let x = &x[..m.ncols()];
        let y = &y[..m.nrows()];
        let ax = m.spmv(x, false).unwrap();
        let aty = m.spmv(y, true).unwrap();
        let lhs: f64 = ax.iter().zip(y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn transpose_is_involution(m in sparse_strategy(10)) {
        prop_assert_eq!(m.transpose().transpose(), m.clone());
        prop_assert_eq!(to_na(&m.transpose()), to_na(&m).transpose());
    }

    #[test]
    fn matmul_matches_dense(a in sparse_strategy(8), seed in 0u64..1000) {
        let c = a.ncols();
        let t: Vec<_> = (0..c).flat_map(|i| (0..5).map(move |j| (i, j, ((i * 7 + j * 3) as f64 + seed as f64).sin()))).collect();
        let b = SparseMatrix::from_triplets(c, 5, &t).unwrap();
        let prod = to_na(&a.matmul(&b).unwrap());
        let oracle = to_na(&a) * to_na(&b);
        prop_assert!((prod - &oracle).norm() <= 1e-12 * (1.0 + oracle.norm()));
    }

    #[test]
    fn kron_mixed_product(a in sparse_strategy(4), b in sparse_strategy(4)) {
        // (A ⊗ B)(Aᵀ ⊗ Bᵀ) = (A Aᵀ) ⊗ (B Bᵀ)
        let lhs = kron(&a, &b).unwrap().matmul(&kron(&a.transpose(), &b.transpose()).unwrap()).unwrap();
        let rhs = kron(&a.matmul(&a.transpose()).unwrap(), &b.matmul(&b.transpose()).unwrap()).unwrap();
        let d = to_na(&lhs) - to_na(&rhs);
        prop_assert!(d.norm() <= 1e-9 * (1.0 + to_na(&rhs).norm()));
    }

    #[test]
    fn kron_associative(a in sparse_strategy(3), b in sparse_strategy(3), c in sparse_strategy(3)) {
        let left = kron(&kron(&a, &b).unwrap(), &c).unwrap();
        let right = kron(&a, &kron(&b, &c).unwrap()).unwrap();
        let (l, r) = (to_na(&left), to_na(&right));
        prop_assert_eq!(l.shape(), r.shape());
        prop_assert!((&l - &r).norm() <= 1e-14 * (1.0 + r.norm()));
    }

    #[test]
    fn triangular_solve_backward_error(n in 1usize..30, seed in any::<u64>()) {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 1.0 + ((seed as f64) + i as f64).cos().abs()));
            for j in 0..i {
                if (i * 31 + j * 17 + seed as usize) % 3 == 0 {
                    t.push((i, j, ((i + j) as f64 + seed as f64 * 0.1).sin()));
                }
            }
        }
        let l = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 0.5).collect();
        for mode in [TriangularMode::Lower, TriangularMode::LowerTranspose] {
            let x = triangular_solve(&l, &b, mode).unwrap();
            let lx = l.spmv(&x, mode == TriangularMode::LowerTranspose).unwrap();
            let r: f64 = lx.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(r <= 1e3 * f64::EPSILON * l.norm_frobenius() * xn);
        }
    }

    #[test]
    fn dense_roundtrip(m in sparse_strategy(8)) {
        let d: DenseMatrix = m.to_dense();
        prop_assert_eq!(SparseMatrix::from_dense(&d), m);
    }
}

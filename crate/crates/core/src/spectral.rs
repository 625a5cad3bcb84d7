//! Dense eigenvalue tools and the eigenvalue bounds for the inexact `Q̄`.
//!
//! [`eig_dense`] computes all eigenvalues of a real matrix by balancing,
//! Householder reduction to Hessenberg form and Francis double-shift QR.
//! [`pencil_extremes`] gives the extreme eigenvalues of a symmetric-definite
//! pencil through tridiagonalization and implicit QL.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dense::{chol_dense, dot, norm2, DenseMatrix};
use crate::error::{Error, Result};
use crate::factor::chol_sparse;
use crate::krylov::{Identity, LinearOperator};
use crate::precond::{schur_dense, ApproximationSet, Block11, DenseCholesky, DiagonalInverse, SimplifiedSet};
use crate::problem::BlockSaddleSystem;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    #[serde(serialize_with = "serialize_complex")]
    pub values: Vec<Complex64>,
    pub source: String,
}

fn serialize_complex<S: serde::Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

/// `|Im λ| ≤ 1e-8 max(1, |λ|)`.
pub fn is_real(z: Complex64) -> bool {
    z.im.abs() <= 1e-8 * z.norm().max(1.0)
}

impl Spectrum {
    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().filter(|z| is_real(**z)).map(|z| z.re).collect()
    }

    pub fn complex_values(&self) -> Vec<Complex64> {
        self.values.iter().copied().filter(|z| !is_real(*z)).collect()
    }

    /// `(min, max)` of the real eigenvalues.
    pub fn real_range(&self) -> Option<(f64, f64)> {
        let r = self.real_values();
        if r.is_empty() {
            return None;
        }
        Some(r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))))
    }

    /// Largest distance from an eigenvalue to the nearest point of `targets`.
    pub fn max_distance_to(&self, targets: &[Complex64]) -> f64 {
        self.values
            .iter()
            .map(|z| targets.iter().map(|t| (z - t).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EigOptions {
    /// Eigenvalues whose residual is checked through inverse iteration.
    pub check_samples: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self { check_samples: 3 }
    }
}

/// All eigenvalues of a square real matrix, with a sampled backward-error check.
pub fn eig_dense(m: &DenseMatrix) -> Result<Spectrum> {
    eig_dense_with(m, EigOptions::default())
}

pub fn eig_dense_with(m: &DenseMatrix, opts: EigOptions) -> Result<Spectrum> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch("eigenvalues of a non-square matrix".into()));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("eigenvalue input"));
    }
    if n == 0 {
        return Ok(Spectrum { values: Vec::new(), source: String::new() });
    }
    let mut h = m.as_slice().to_vec();
    let scale = balance(&mut h, n);
    let reflectors = hessenberg(&mut h, n);
    let hess = h.clone();
    let values = hqr(&mut h, n)?;

    if opts.check_samples > 0 {
        let norm = m.norm_frobenius().max(f64::MIN_POSITIVE);
        let bound = 1e-6 * norm;
        let k = opts.check_samples.min(n);
        for s in 0..k {
            let idx = if k == 1 { 0 } else { s * (n - 1) / (k - 1) };
            let lambda = values[idx];
            let v = inverse_iteration(&hess, n, lambda);
            let x = back_transform(&reflectors, &scale, v, n);
            let residual = eigen_residual(m, &x, lambda);
            if !(residual <= bound) {
                return Err(Error::BackwardError { residual, bound });
            }
        }
    }
    Ok(Spectrum { values, source: String::new() })
}

/// Diagonal similarity with powers of two that equalizes row and column norms.
fn balance(a: &mut [f64], n: usize) -> Vec<f64> {
    const RADIX: f64 = 2.0;
    let mut scale = vec![1.0; n];
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j * n + i].abs();
                    r += a[i * n + j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let gi = 1.0 / f;
                scale[i] *= f;
                for j in 0..n {
                    a[i * n + j] *= gi;
                }
                for j in 0..n {
                    a[j * n + i] *= f;
                }
            }
        }
    }
    scale
}

struct Reflector {
    k: usize,
    beta: f64,
    v: Vec<f64>,
}

/// In-place Householder reduction to upper Hessenberg form; returns the reflectors.
fn hessenberg(a: &mut [f64], n: usize) -> Vec<Reflector> {
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    let mut w = vec![0.0; n];
    for k in 0..n - 2 {
        let x: Vec<f64> = (k + 1..n).map(|i| a[i * n + k]).collect();
        let Some((v, beta)) = householder(&x) else { continue };
        // left: rows k+1.., columns k..
        w[k..n].iter_mut().for_each(|x| *x = 0.0);
        for (vi, i) in v.iter().zip(k + 1..n) {
            let row = &a[i * n + k..i * n + n];
            for (wj, aij) in w[k..n].iter_mut().zip(row) {
                *wj += vi * aij;
            }
        }
        for (vi, i) in v.iter().zip(k + 1..n) {
            let f = beta * vi;
            let row = &mut a[i * n + k..i * n + n];
            for (aij, wj) in row.iter_mut().zip(&w[k..n]) {
                *aij -= f * wj;
            }
        }
        // right: all rows, columns k+1..
        for i in 0..n {
            let row = &mut a[i * n + k + 1..i * n + n];
            let s = beta * dot(row, &v);
            for (aij, vj) in row.iter_mut().zip(&v) {
                *aij -= s * vj;
            }
        }
        for i in k + 2..n {
            a[i * n + k] = 0.0;
        }
        out.push(Reflector { k, beta, v });
    }
    out
}

/// `(v, β)` with `(I - β v vᵀ) x = ∓‖x‖ e₁`, or `None` when nothing needs eliminating.
fn householder(x: &[f64]) -> Option<(Vec<f64>, f64)> {
    let tail = norm2(&x[1..]);
    if tail == 0.0 {
        return None;
    }
    let alpha = norm2(x);
    let mut v = x.to_vec();
    let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign * alpha;
    let vnorm2 = dot(&v, &v);
    Some((v, 2.0 / vnorm2))
}

/// Francis double-shift QR on an upper Hessenberg matrix (eigenvalues only).
fn hqr(a: &mut [f64], n: usize) -> Result<Vec<Complex64>> {
    // 1-based accessors keep the classical formulation readable
    let ix = |i: usize, j: usize| (i - 1) * n + (j - 1);
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[ix(i, j)].abs();
        }
    }
    let max_total = 30 * n.max(1);
    let mut total = 0usize;
    let mut nn = n;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[ix(l - 1, l - 1)].abs() + a[ix(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[ix(l, l - 1)].abs() + s == s {
                    a[ix(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[ix(nn, nn)];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[ix(nn - 1, nn - 1)];
            let mut w = a[ix(nn, nn - 1)] * a[ix(nn - 1, nn)];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != 0.0 {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn -= 2;
                break;
            }
            if total >= max_total {
                return Err(Error::NoConvergence(total));
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                t += x;
                for i in 1..=nn {
                    a[ix(i, i)] -= x;
                }
                let s = a[ix(nn, nn - 1)].abs() + a[ix(nn - 1, nn - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            total += 1;
            let (mut p, mut q, mut r);
            let mut z;
            let mut m = nn - 2;
            loop {
                z = a[ix(m, m)];
                r = x - z;
                let s0 = y - z;
                p = (r * s0 - w) / a[ix(m + 1, m)] + a[ix(m, m + 1)];
                q = a[ix(m + 1, m + 1)] - z - r - s0;
                r = a[ix(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[ix(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[ix(m - 1, m - 1)].abs() + z.abs() + a[ix(m + 1, m + 1)].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a[ix(i, i - 2)] = 0.0;
                if i != m + 2 {
                    a[ix(i, i - 3)] = 0.0;
                }
            }
            let mut k = m;
            while k + 1 <= nn {
                if k != m {
                    p = a[ix(k, k - 1)];
                    q = a[ix(k + 1, k - 1)];
                    r = if k != nn - 1 { a[ix(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[ix(k, k - 1)] = -a[ix(k, k - 1)];
                        }
                    } else {
                        a[ix(k, k - 1)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = a[ix(k, j)] + q * a[ix(k + 1, j)];
                        if k != nn - 1 {
                            pp += r * a[ix(k + 2, j)];
                            a[ix(k + 2, j)] -= pp * z;
                        }
                        a[ix(k + 1, j)] -= pp * y;
                        a[ix(k, j)] -= pp * x;
                    }
                    let mmin = nn.min(k + 3);
                    for i in l..=mmin {
                        let mut pp = x * a[ix(i, k)] + y * a[ix(i, k + 1)];
                        if k != nn - 1 {
                            pp += z * a[ix(i, k + 2)];
                            a[ix(i, k + 2)] -= pp * r;
                        }
                        a[ix(i, k + 1)] -= pp * q;
                        a[ix(i, k)] -= pp;
                    }
                }
                k += 1;
            }
            if l + 1 >= nn {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

/// Three steps of complex inverse iteration on the Hessenberg matrix.
fn inverse_iteration(h: &[f64], n: usize, lambda: Complex64) -> Vec<Complex64> {
    let hnorm = h.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    // nudge the shift so the factorization is not exactly singular
    let shift = lambda + Complex64::new(hnorm * 1e-10, hnorm * 1e-10);
    let mut lu: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for i in 0..n {
        lu[i * n + i] -= shift;
    }
    // Hessenberg LU with adjacent-row pivoting
    let mut swapped = vec![false; n];
    let mut mult = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n.saturating_sub(1) {
        if lu[(k + 1) * n + k].norm() > lu[k * n + k].norm() {
            for j in k..n {
                lu.swap(k * n + j, (k + 1) * n + j);
            }
            swapped[k] = true;
        }
        let piv = lu[k * n + k];
        let piv = if piv.norm() == 0.0 { Complex64::new(hnorm * 1e-14, 0.0) } else { piv };
        lu[k * n + k] = piv;
        let f = lu[(k + 1) * n + k] / piv;
        mult[k] = f;
        lu[(k + 1) * n + k] = Complex64::new(0.0, 0.0);
        if f.norm() != 0.0 {
            for j in k + 1..n {
                let v = lu[k * n + j];
                lu[(k + 1) * n + j] -= f * v;
            }
        }
    }
    if lu[(n - 1) * n + n - 1].norm() == 0.0 {
        lu[(n - 1) * n + n - 1] = Complex64::new(hnorm * 1e-14, 0.0);
    }
    // irregular start so no eigenvector is missed by symmetry
    let mut x: Vec<Complex64> =
        (0..n).map(|i| Complex64::new(1.0 + ((i as f64 + 1.0) * 0.618_033_988_7).fract(), 0.0)).collect();
    for _ in 0..3 {
        for k in 0..n.saturating_sub(1) {
            if swapped[k] {
                x.swap(k, k + 1);
            }
            let v = x[k];
            x[k + 1] -= mult[k] * v;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= lu[i * n + j] * x[j];
            }
            x[i] = s / lu[i * n + i];
        }
        let nrm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm == 0.0 || !nrm.is_finite() {
            break;
        }
        x.iter_mut().for_each(|z| *z /= nrm);
    }
    x
}

fn back_transform(refl: &[Reflector], scale: &[f64], mut v: Vec<Complex64>, n: usize) -> Vec<Complex64> {
    for r in refl.iter().rev() {
        let seg = &mut v[r.k + 1..n];
        let s: Complex64 = seg.iter().zip(&r.v).map(|(z, vi)| z * vi).sum();
        let f = s * r.beta;
        for (z, vi) in seg.iter_mut().zip(&r.v) {
            *z -= f * vi;
        }
    }
    for (z, d) in v.iter_mut().zip(scale) {
        *z *= d;
    }
    v
}

fn eigen_residual(m: &DenseMatrix, x: &[Complex64], lambda: Complex64) -> f64 {
    let xn = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if xn == 0.0 || !xn.is_finite() {
        return f64::INFINITY;
    }
    let mut r2 = 0.0;
    for i in 0..m.nrows() {
        let mut s: Complex64 = m.row(i).iter().zip(x).map(|(a, z)| z * a).sum();
        s -= lambda * x[i];
        r2 += s.norm_sqr();
    }
    r2.sqrt() / xn
}

/// Eigenvalues of a symmetric matrix (Householder tridiagonalization + implicit QL), ascending.
pub fn eig_symmetric(m: &DenseMatrix) -> Result<Vec<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch("eigenvalues of a non-square matrix".into()));
    }
    let (mut d, mut e) = tridiagonalize(m);
    tql_implicit(&mut d, &mut e)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

fn tridiagonalize(m: &DenseMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.nrows();
    let mut a = m.as_slice().to_vec();
    let mut e = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = (k + 1..n).map(|i| a[i * n + k]).collect();
        let Some((v, beta)) = householder(&x) else {
            e[k] = x[0];
            continue;
        };
        let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
        e[k] = -sign * norm2(&x);
        let sub = k + 1;
        // p = β A v on the trailing block
        for (pi, i) in p[sub..n].iter_mut().zip(sub..n) {
            *pi = beta * dot(&a[i * n + sub..i * n + n], &v);
        }
        let kfac = 0.5 * beta * dot(&p[sub..n], &v);
        let w: Vec<f64> = p[sub..n].iter().zip(&v).map(|(pi, vi)| pi - kfac * vi).collect();
        for (ii, i) in (sub..n).enumerate() {
            let row = &mut a[i * n + sub..i * n + n];
            let (vi, wi) = (v[ii], w[ii]);
            for ((aij, vj), wj) in row.iter_mut().zip(&v).zip(&w) {
                *aij -= vi * wj + wi * vj;
            }
        }
    }
    if n >= 2 {
        e[n - 2] = a[(n - 1) * n + n - 2];
    }
    let d = (0..n).map(|i| a[i * n + i]).collect();
    (d, e)
}

/// Implicit QL on a symmetric tridiagonal matrix; `e[i]` couples `i` and `i+1`.
fn tql_implicit(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let max_total = 30 * n;
    let mut total = 0;
    for l in 0..n {
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() + dd == dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            total += 1;
            if total > max_total {
                return Err(Error::NoConvergence(total));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Extreme eigenvalues of `N⁻¹ M` for symmetric `M` and SPD `N`.
pub fn pencil_extremes(m: &DenseMatrix, n: &DenseMatrix) -> Result<(f64, f64)> {
    let k = m.nrows();
    if m.ncols() != k || n.nrows() != k || n.ncols() != k {
        return Err(Error::DimensionMismatch("pencil blocks of different orders".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("empty pencil".into()));
    }
    let is_diag = (0..k).all(|i| (0..k).all(|j| i == j || n[(i, j)] == 0.0));
    let reduced = if is_diag {
        let mut inv_sqrt = Vec::with_capacity(k);
        for i in 0..k {
            let d = n[(i, i)];
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { index: i, pivot: d });
            }
            inv_sqrt.push(1.0 / d.sqrt());
        }
        DenseMatrix::from_fn(k, k, |i, j| m[(i, j)] * inv_sqrt[i] * inv_sqrt[j])
    } else {
        let l = chol_dense(n)?;
        // Y = L⁻¹ M row by row, then Z = L⁻¹ Yᵀ
        let lower_solve_rows = |src: &DenseMatrix| {
            let mut y = src.clone();
            for i in 0..k {
                for p in 0..i {
                    let lip = l[(i, p)];
                    if lip != 0.0 {
                        let (head, tail) = y.as_mut_slice().split_at_mut(i * k);
                        let yp = &head[p * k..p * k + k];
                        for (a, b) in tail[..k].iter_mut().zip(yp) {
                            *a -= lip * b;
                        }
                    }
                }
                let lii = l[(i, i)];
                y.row_mut(i).iter_mut().for_each(|v| *v /= lii);
            }
            y
        };
        let y = lower_solve_rows(m);
        let z = lower_solve_rows(&y.transpose());
        DenseMatrix::from_fn(k, k, |i, j| 0.5 * (z[(i, j)] + z[(j, i)]))
    };
    let ev = eig_symmetric(&reduced)?;
    Ok((ev[0], ev[k - 1]))
}

/// Sparse front end to [`pencil_extremes`].
pub fn eig_sym_pencil_extremes(m: &SparseMatrix, n: &SparseMatrix) -> Result<(f64, f64)> {
    if m.asymmetry() > 1e-12 * m.norm_inf().max(1.0) {
        return Err(Error::InvalidArgument("pencil matrix is not symmetric".into()));
    }
    pencil_extremes(&m.to_dense(), &n.to_dense())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `𝒬⁻¹ 𝒜`.
    Left,
    /// `𝒜 𝒬⁻¹`.
    Right,
}

/// The preconditioned matrix formed column by column in parallel.
pub fn preconditioned_matrix(k: &SparseMatrix, precond: &dyn LinearOperator, side: Side) -> Result<DenseMatrix> {
    let n = k.nrows();
    if precond.dim() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch("preconditioner and matrix orders differ".into()));
    }
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            match side {
                Side::Left => {
                    let kj = k.spmv(&e, false)?;
                    precond.apply_vec(&kj)
                }
                Side::Right => {
                    let qj = precond.apply_vec(&e)?;
                    k.spmv(&qj, false)
                }
            }
        })
        .collect::<Result<_>>()?;
    DenseMatrix::from_columns(n, &cols)
}

/// Eigenvalues of the preconditioned matrix.
pub fn preconditioned_spectrum(
    sys: &BlockSaddleSystem,
    precond: &dyn LinearOperator,
    side: Side,
    source: &str,
) -> Result<Spectrum> {
    let k = sys.assemble()?;
    let pm = preconditioned_matrix(&k, precond, side)?;
    let mut s = eig_dense(&pm)?;
    s.source = source.to_string();
    Ok(s)
}

/// How `X̃` is formed for the `γ_X` pencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum XTilde {
    /// `X̃ = C S̃⁻¹ Cᵀ`.
    #[default]
    FromSTilde,
    /// `X̃ = C Ŝ⁻¹ Cᵀ`; coincides with `X̂`, so `γ_X ≡ 1`.
    FromSHat,
}

impl std::str::FromStr for XTilde {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s-tilde" => Ok(XTilde::FromSTilde),
            "s-hat" => Ok(XTilde::FromSHat),
            _ => Err(Error::InvalidArgument(format!("unknown X-tilde convention {s:?}"))),
        }
    }
}

/// Dense matrices entering the three pencils.
pub struct GammaInputs {
    pub a: DenseMatrix,
    pub a_hat: DenseMatrix,
    pub s_tilde: DenseMatrix,
    pub s_hat: DenseMatrix,
    pub x_tilde: DenseMatrix,
    pub x_hat: DenseMatrix,
}

impl GammaInputs {
    /// Pencils for `Q̄` built from an [`ApproximationSet`]; `Â` is the (1,1) block in use.
    pub fn for_qbar(sys: &BlockSaddleSystem, ap: &ApproximationSet, convention: XTilde) -> Result<Self> {
        let a = sys.a.to_dense();
        let n = a.nrows();
        let (a_hat, a_inv): (DenseMatrix, Box<dyn LinearOperator>) = match ap.options.block11 {
            Block11::Exact => (a.clone(), Box::new(chol_sparse(&sys.a)?)),
            Block11::Diagonal => (
                DenseMatrix::from_fn(n, n, |i, j| if i == j { ap.a_diag[i] } else { 0.0 }),
                Box::new(DiagonalInverse::new(ap.a_diag.clone())?),
            ),
            Block11::Identity => (DenseMatrix::identity(n), Box::new(Identity(n))),
        };
        let s_tilde = schur_dense(&sys.b, a_inv.as_ref())?;
        let s_hat = ap.l_s.product().to_dense();
        let x_hat = schur_dense(&sys.c, &ap.l_s)?;
        let x_tilde = match convention {
            XTilde::FromSTilde => schur_dense(&sys.c, &DenseCholesky::new(&s_tilde)?)?,
            XTilde::FromSHat => x_hat.clone(),
        };
        Ok(Self { a, a_hat, s_tilde, s_hat, x_tilde, x_hat })
    }

    /// Pencils for the simplified preconditioner; `γ_S` and `γ_X` are one by construction.
    pub fn for_simplified(sys: &BlockSaddleSystem, set: &SimplifiedSet) -> Result<Self> {
        let a = sys.a.to_dense();
        let n = a.nrows();
        Ok(Self {
            a,
            a_hat: DenseMatrix::identity(n),
            s_tilde: set.s_tilde.clone(),
            s_hat: set.s_tilde.clone(),
            x_tilde: set.x_tilde.clone(),
            x_hat: set.x_tilde.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaRanges {
    /// Extreme eigenvalues of `Â⁻¹ A`.
    pub gamma_a: (f64, f64),
    /// Extreme eigenvalues of `Ŝ⁻¹ S̃`.
    pub gamma_s: (f64, f64),
    /// Extreme eigenvalues of `X̂⁻¹ X̃`.
    pub gamma_x: (f64, f64),
}

impl GammaRanges {
    pub fn compute(inputs: &GammaInputs) -> Result<Self> {
        let g = Self {
            gamma_a: pencil_extremes(&inputs.a, &inputs.a_hat)?,
            gamma_s: pencil_extremes(&inputs.s_tilde, &inputs.s_hat)?,
            gamma_x: pencil_extremes(&inputs.x_tilde, &inputs.x_hat)?,
        };
        for (name, (lo, hi)) in [("gamma_a", g.gamma_a), ("gamma_s", g.gamma_s), ("gamma_x", g.gamma_x)] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} range ({lo}, {hi}) is not positive")));
            }
        }
        Ok(g)
    }

    /// Whether `1 ∈ [γ_min^A, γ_max^A]`, an assumption of the general bounds.
    pub fn one_in_gamma_a(&self) -> bool {
        self.gamma_a.0 <= 1.0 + 1e-12 && 1.0 - 1e-12 <= self.gamma_a.1
    }
}

/// Radius of the disc around 1 holding complex eigenvalues with `Ky = 0`:
/// `sqrt(1 - γ_min^A)`, or zero when `γ_min^A ≥ 1`.
pub fn complex_disc_bound(gamma_a_min: f64) -> f64 {
    if gamma_a_min >= 1.0 {
        0.0
    } else {
        (1.0 - gamma_a_min).sqrt()
    }
}

/// Interval containing every real eigenvalue, from the γ-ranges.
pub fn real_interval_general(g: &GammaRanges) -> (f64, f64) {
    let (a1, a2) = g.gamma_a;
    let (s1, s2) = g.gamma_s;
    let (x1, x2) = g.gamma_x;
    let cubic_lo = (s1 / (a2 + s1)).min(a1 * x1 / (x1 + s2 + a1 * x1)).min(a1);
    let ky0_lo = a1.min(s1 / (a2 + s1));
    let lo = cubic_lo.min(ky0_lo).min(a1);
    let hi = (a2 + s2 + x2).max(a2 + s2).max(a2);
    (lo, hi)
}

/// Real roots of `λ³ - (a+s+x) λ² + (s + x + a x) λ - a x`, ascending, with repeats.
pub fn cubic_real_roots(a: f64, s: f64, x: f64) -> Vec<f64> {
    let c2 = -(a + s + x);
    let c1 = s + x + a * x;
    let c0 = -a * x;
    let poly = |l: f64| ((l + c2) * l + c1) * l + c0;
    let deriv = |l: f64| (3.0 * l + 2.0 * c2) * l + c1;

    let shift = -c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let scale = 1.0 + c2.abs() + c1.abs() + c0.abs();
    let mut roots: Vec<f64> = if p.abs() <= 1e-14 * scale && q.abs() <= 1e-14 * scale {
        vec![shift; 3]
    } else if disc > 0.0 {
        let sd = disc.sqrt();
        vec![(-q / 2.0 + sd).cbrt() + (-q / 2.0 - sd).cbrt() + shift]
    } else {
        let r = (-p / 3.0).sqrt();
        let phi = ((-q / 2.0) / (r * r * r)).clamp(-1.0, 1.0).acos();
        (0..3)
            .map(|k| 2.0 * r * ((phi - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() + shift)
            .collect()
    };
    for root in &mut roots {
        for _ in 0..8 {
            let d = deriv(*root);
            if d == 0.0 {
                break;
            }
            let step = poly(*root) / d;
            let next = *root - step;
            if !next.is_finite() || poly(next).abs() >= poly(*root).abs() {
                break;
            }
            *root = next;
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Hull of the real cubic roots over a `grid³` sampling of the γ box.
pub fn cubic_root_hull(g: &GammaRanges, grid: usize) -> (f64, f64) {
    let pts = |(lo, hi): (f64, f64)| -> Vec<f64> {
        if grid <= 1 {
            return vec![lo];
        }
        (0..grid).map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64).collect()
    };
    let (ga, gs, gx) = (pts(g.gamma_a), pts(g.gamma_s), pts(g.gamma_x));
    let mut hull = (f64::INFINITY, f64::NEG_INFINITY);
    for &a in &ga {
        for &s in &gs {
            for &x in &gx {
                for r in cubic_real_roots(a, s, x) {
                    hull = (hull.0.min(r), hull.1.max(r));
                }
            }
        }
    }
    hull
}

/// The simplified cubic `(λ-1)³ + (1-γ)(λ² - λ + 1)`; this form stays exact at `γ = 1`.
fn simplified_cubic(l: f64, gamma: f64) -> f64 {
    (l - 1.0).powi(3) + (1.0 - gamma) * (l * l - l + 1.0)
}

/// Unique positive root of `λ³ - (2+γ)λ² + (2+γ)λ - γ`, by safeguarded Newton on `(0, γ+2)`.
pub fn lambda_plus(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let (mut lo, mut hi) = (0.0, gamma + 2.0);
    let mut x = gamma.min(1.0);
    for _ in 0..200 {
        let f = simplified_cubic(x, gamma);
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = 3.0 * (x - 1.0).powi(2) + (1.0 - gamma) * (2.0 * x - 1.0);
        let newton = x - f / d;
        x = if d != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(0.5 * (lo + hi));
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimplifiedBounds {
    pub lambda_plus_min: f64,
    pub lambda_plus_max: f64,
    pub half_gamma_min: f64,
    pub gamma_max_plus_one: f64,
    pub sharp: (f64, f64),
    pub synthetic: (f64, f64),
}

/// Real-eigenvalue intervals when `Â` is the only approximation.
pub fn simplified_bounds(gamma_a: (f64, f64)) -> Result<SimplifiedBounds> {
    let (g1, g2) = gamma_a;
    let lp1 = lambda_plus(g1)?;
    let lp2 = lambda_plus(g2)?;
    Ok(SimplifiedBounds {
        lambda_plus_min: lp1,
        lambda_plus_max: lp2,
        half_gamma_min: g1 / 2.0,
        gamma_max_plus_one: g2 + 1.0,
        sharp: (lp1.min(g1).min(1.0 / (g2 + 1.0)), lp2.max(g2 + 1.0)),
        synthetic: (g1 / 2.0, g2 + 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundVariant {
    General,
    SimplifiedSharp,
    SimplifiedSynthetic,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub variant: BoundVariant,
    /// Complex eigenvalues are checked against `|λ - 1| < complex_radius`.
    pub complex_radius: f64,
    /// `sqrt(1 - γ_min^A)`, reported, not checked.
    pub ky0_radius: f64,
    pub real_interval: (f64, f64),
    /// `λ⁺`, `γ_min/2` and `γ_max+1` for the simplified variants.
    pub simplified: Option<SimplifiedBounds>,
    pub gamma: GammaRanges,
    pub one_in_gamma_a: bool,
    pub n_real: usize,
    pub n_complex: usize,
    pub real_range: Option<(f64, f64)>,
    pub max_complex_distance: Option<f64>,
    /// One flag per eigenvalue, in spectrum order.
    pub eigenvalue_pass: Vec<bool>,
    pub real_violations: Vec<f64>,
    pub complex_violations: Vec<(f64, f64)>,
    pub complex_pass: bool,
    pub real_pass: bool,
    pub pass: bool,
}

/// Classifies every eigenvalue and checks it against the bounds of `variant`.
pub fn verify_bounds(spec: &Spectrum, g: &GammaRanges, variant: BoundVariant) -> Result<BoundReport> {
    let simplified = match variant {
        BoundVariant::General => None,
        _ => Some(simplified_bounds(g.gamma_a)?),
    };
    let interval = match (variant, &simplified) {
        (BoundVariant::SimplifiedSharp, Some(sb)) => sb.sharp,
        (BoundVariant::SimplifiedSynthetic, Some(sb)) => sb.synthetic,
        _ => real_interval_general(g),
    };
    let mut report = check_against(spec, g, variant, interval, 1.0);
    report.simplified = simplified;
    Ok(report)
}

fn check_against(spec: &Spectrum, g: &GammaRanges, variant: BoundVariant, interval: (f64, f64), radius: f64) -> BoundReport {
    let mut flags = Vec::with_capacity(spec.values.len());
    let mut real_violations = Vec::new();
    let mut complex_violations = Vec::new();
    let (mut n_real, mut n_complex) = (0, 0);
    let mut max_dist: Option<f64> = None;
    for &z in &spec.values {
        let ok = if is_real(z) {
            n_real += 1;
            let ok = z.re >= interval.0 && z.re <= interval.1;
            if !ok {
                real_violations.push(z.re);
            }
            ok
        } else {
            n_complex += 1;
            let d = (z - 1.0).norm();
            max_dist = Some(max_dist.map_or(d, |m| m.max(d)));
            let ok = d < radius;
            if !ok {
                complex_violations.push((z.re, z.im));
            }
            ok
        };
        flags.push(ok);
    }
    BoundReport {
        variant,
        complex_radius: radius,
        ky0_radius: complex_disc_bound(g.gamma_a.0),
        real_interval: interval,
        simplified: None,
        gamma: *g,
        one_in_gamma_a: g.one_in_gamma_a(),
        n_real,
        n_complex,
        real_range: spec.real_range(),
        max_complex_distance: max_dist,
        eigenvalue_pass: flags,
        complex_pass: complex_violations.is_empty(),
        real_pass: real_violations.is_empty(),
        pass: complex_violations.is_empty() && real_violations.is_empty(),
        real_violations,
        complex_violations,
    }
}

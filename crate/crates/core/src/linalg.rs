//! Dense complex linear algebra used by the frame engine.
//!
//! Matrices are small (a few hundred rows at most), so everything is a plain
//! row-major `Vec`. Hermitian eigenproblems are solved through the real
//! symmetric embedding `[[X, -Y], [Y, X]]` of `H = X + iY`, which doubles every
//! eigenvalue; the symmetric problem uses Householder tridiagonalisation
//! followed by implicit QL.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// `<a, b> = sum_i a_i conj(b_i)`, linear in the first argument.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<C64>]) -> Self {
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Adds `scale * v v^*` to a square matrix.
    pub fn add_outer(&mut self, v: &[C64], scale: f64) {
        debug_assert_eq!(self.rows, v.len());
        for i in 0..self.rows {
            let vi = v[i] * scale;
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (r, vj) in row.iter_mut().zip(v) {
                *r += vi * vj.conj();
            }
        }
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        debug_assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    /// Largest entry of `|M - M^*|`.
    pub fn hermitian_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `M <- (M + M^*) / 2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.rows {
            for j in i..self.cols {
                let avg = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl core::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular `L` with `L L^* = A` for Hermitian positive definite `A`.
pub fn cholesky(a: &CMatrix) -> Result<CMatrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.cols(),
        });
    }
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > 0.0) {
            return Err(Error::Singular);
        }
        let ljj = diag.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &CMatrix, b: &[C64]) -> Vec<C64> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `L^* x = b` for lower-triangular `L`.
pub fn solve_lower_adjoint(l: &CMatrix, b: &[C64]) -> Vec<C64> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)].conj() * x[k];
        }
        x[i] = s / l[(i, i)].conj();
    }
    x
}

/// Solves `A x = b` with `A = L L^*`.
pub fn cholesky_solve(l: &CMatrix, b: &[C64]) -> Vec<C64> {
    solve_lower_adjoint(l, &solve_lower(l, b))
}

/// Eigen-decomposition of a real symmetric matrix, ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column `j` (row-major `n x n`) is the eigenvector of `values[j]`.
    pub vectors: Option<Vec<f64>>,
}

/// `a` is row-major `n x n` and only read.
pub fn symmetric_eigen(a: &[f64], n: usize, want_vectors: bool) -> Result<SymmetricEigen> {
    if a.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: a.len(),
        });
    }
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: want_vectors.then(Vec::new),
        });
    }
    let mut v = a.to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e, n);
    tql2(&mut v, &mut d, &mut e, n, want_vectors)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = want_vectors.then(|| {
        let mut out = vec![0.0; n * n];
        for (new_j, &old_j) in order.iter().enumerate() {
            for i in 0..n {
                out[i * n + new_j] = v[i * n + old_j];
            }
        }
        out
    });
    Ok(SymmetricEigen { values, vectors })
}

// Householder reduction to tridiagonal form (Bowdler, Martin, Reinsch,
// Wilkinson; after the public-domain JAMA port).
fn tred2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..(n - 1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e).
fn tql2(
    v: &mut [f64],
    d: &mut [f64],
    e: &mut [f64],
    n: usize,
    want_vectors: bool,
) -> Result<()> {
    let at = |i: usize, j: usize| i * n + j;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iterations = 0;
            loop {
                iterations += 1;
                if iterations > 60 {
                    return Err(Error::EigenNonConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        for k in 0..n {
                            let hk = v[at(k, i + 1)];
                            v[at(k, i + 1)] = s * v[at(k, i)] + c * hk;
                            v[at(k, i)] = c * v[at(k, i)] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Eigen-decomposition of a complex Hermitian matrix, ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Unit eigenvectors, one per eigenvalue, mutually orthogonal.
    pub vectors: Option<Vec<Vec<C64>>>,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }
}

pub fn hermitian_eigen(h: &CMatrix, want_vectors: bool) -> Result<HermitianEigen> {
    let n = h.rows();
    if h.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.cols(),
        });
    }
    let m = 2 * n;
    let mut real = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            real[i * m + j] = z.re;
            real[(i + n) * m + (j + n)] = z.re;
            real[i * m + (j + n)] = -z.im;
            real[(i + n) * m + j] = z.im;
        }
    }
    let sym = symmetric_eigen(&real, m, want_vectors)?;
    // Every eigenvalue of the embedding appears twice.
    let values: Vec<f64> = sym.values.iter().step_by(2).copied().collect();
    let vectors = match sym.vectors {
        None => None,
        Some(rv) => Some(complex_vectors(&sym.values, &rv, n)),
    };
    Ok(HermitianEigen { values, vectors })
}

// Maps real eigenvectors [u; v] of the embedding to u + iv and picks an
// orthonormal family, cluster by cluster, so that repeated eigenvalues still
// yield independent complex eigenvectors.
fn complex_vectors(values: &[f64], rv: &[f64], n: usize) -> Vec<Vec<C64>> {
    let m = 2 * n;
    let scale = values
        .iter()
        .map(|x| x.abs())
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let tol = 1e-9 * scale;
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && (values[end] - values[start]).abs() <= tol {
            end += 1;
        }
        let want = (end - start) / 2;
        let mut cluster: Vec<Vec<C64>> = Vec::with_capacity(want);
        for j in start..end {
            if cluster.len() == want {
                break;
            }
            let mut z: Vec<C64> = (0..n)
                .map(|i| C64::new(rv[i * m + j], rv[(i + n) * m + j]))
                .collect();
            for q in &cluster {
                let c = inner(&z, q);
                for (zi, qi) in z.iter_mut().zip(q) {
                    *zi -= c * qi;
                }
            }
            let nz = norm(&z);
            if nz > 0.5 {
                for zi in z.iter_mut() {
                    *zi /= nz;
                }
                cluster.push(z);
            }
        }
        out.extend(cluster);
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn symmetric_two_by_two() {
        let a = [2.0, 1.0, 1.0, 2.0];
        let eig = symmetric_eigen(&a, 2, true).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn hermitian_pauli_y() {
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 1)] = c(0.0, -1.0);
        h[(1, 0)] = c(0.0, 1.0);
        let eig = hermitian_eigen(&h, true).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
        let vecs = eig.vectors.unwrap();
        for (lambda, v) in eig.values.iter().zip(&vecs) {
            let hv = h.mul_vec(v);
            for (a, b) in hv.iter().zip(v) {
                assert!((a - b * lambda).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn repeated_eigenvalues_give_independent_vectors() {
        let h = CMatrix::identity(3);
        let eig = hermitian_eigen(&h, true).unwrap();
        let vecs = eig.vectors.unwrap();
        assert_eq!(vecs.len(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let g = inner(&vecs[i], &vecs[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - c(want, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn cholesky_solves() {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 0)] = c(4.0, 0.0);
        a[(0, 1)] = c(1.0, 1.0);
        a[(1, 0)] = c(1.0, -1.0);
        a[(1, 1)] = c(3.0, 0.0);
        let l = cholesky(&a).unwrap();
        let b = [c(1.0, 0.0), c(0.0, 2.0)];
        let x = cholesky_solve(&l, &b);
        let ax = a.mul_vec(&x);
        for (u, w) in ax.iter().zip(&b) {
            assert!((u - w).norm() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = CMatrix::identity(2);
        a[(1, 1)] = c(-1.0, 0.0);
        assert_eq!(cholesky(&a), Err(Error::Singular));
    }
}

//! Dense column-major matrices, Gaussian sampling, Householder QR null-space
//! bases and Cholesky factors.

use std::ops::{Index, IndexMut};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::scalar::{axpy, dot, Real};
use crate::seed;

/// Dense matrix in column-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Builds from row-major data, which reads naturally in literals.
    pub fn from_rows(rows: usize, cols: usize, row_major: &[T]) -> Result<Self> {
        check_len(rows * cols, row_major.len())?;
        Ok(Self::from_fn(rows, cols, |i, j| row_major[i * cols + j]))
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_len(rows * cols, data.len())?;
        Ok(Mat { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `out = self * x`
    pub fn matvec_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        out.iter_mut().for_each(|v| *v = T::zero());
        for (j, &xj) in x.iter().enumerate() {
            if xj != T::zero() {
                axpy(xj, self.col(j), out);
            }
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    /// `out = self^T * y`
    pub fn tr_matvec_into(&self, y: &[T], out: &mut [T]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (j, o) in out.iter_mut().enumerate() {
            *o = dot(self.col(j), y);
        }
    }

    pub fn tr_matvec(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        self.tr_matvec_into(y, &mut out);
        out
    }

    pub fn matmul(&self, other: &Mat<T>) -> Result<Mat<T>> {
        check_len(self.cols, other.rows)?;
        let mut out = Mat::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let (src, dst) = (
                other.col(j),
                &mut out.data[j * self.rows..(j + 1) * self.rows],
            );
            for (k, &b) in src.iter().enumerate() {
                if b != T::zero() {
                    axpy(b, self.col(k), dst);
                }
            }
        }
        Ok(out)
    }

    /// `self * self^T`
    pub fn aat(&self) -> Mat<T> {
        let m = self.rows;
        let mut out = Mat::zeros(m, m);
        for k in 0..self.cols {
            let c = self.col(k);
            for j in 0..m {
                let cj = c[j];
                if cj == T::zero() {
                    continue;
                }
                let dst = &mut out.data[j * m..(j + 1) * m];
                axpy(cj, c, dst);
            }
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, v| a.max(v.abs()))
    }

    /// Columns `range` as a new matrix.
    pub fn columns(&self, range: std::ops::Range<usize>) -> Mat<T> {
        let data = self.data[range.start * self.rows..range.end * self.rows].to_vec();
        Mat {
            rows: self.rows,
            cols: range.len(),
            data,
        }
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[j * self.rows + i]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[j * self.rows + i]
    }
}

/// `m x n` matrix of i.i.d. standard normals together with its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMatrix<T> {
    pub matrix: Mat<T>,
    pub seed: u64,
}

/// Entries are drawn column by column from a single ChaCha stream.
pub fn sample_gaussian<T: Real>(m: usize, n: usize, seed: u64) -> Result<GaussianMatrix<T>> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput(format!(
            "matrix shape {m}x{n} must be nonempty"
        )));
    }
    let mut rng = seed::rng(seed);
    let data = (0..m * n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::of(z)
        })
        .collect();
    Ok(GaussianMatrix {
        matrix: Mat::from_col_major(m, n, data)?,
        seed,
    })
}

/// Householder QR of a tall matrix (`rows >= cols`).
///
/// Reflectors are kept as explicit vectors; `Q` is never formed unless asked.
#[derive(Debug, Clone)]
pub struct HouseholderQr<T> {
    rows: usize,
    cols: usize,
    /// reflector `j` acts on entries `j..rows`; stored with that offset
    vs: Vec<Vec<T>>,
    betas: Vec<T>,
    r: Mat<T>,
}

impl<T: Real> HouseholderQr<T> {
    pub fn factor(a: &Mat<T>) -> Result<Self> {
        let (rows, cols) = (a.rows(), a.cols());
        if rows < cols {
            return Err(Error::InvalidInput(format!(
                "QR needs rows >= cols, got {rows}x{cols}"
            )));
        }
        let mut w = a.clone();
        let mut vs = Vec::with_capacity(cols);
        let mut betas = Vec::with_capacity(cols);
        for j in 0..cols {
            let x = &w.col(j)[j..];
            let norm = dot(x, x).sqrt();
            let mut v = x.to_vec();
            if norm == T::zero() {
                vs.push(v);
                betas.push(T::zero());
                continue;
            }
            let alpha = if x[0] >= T::zero() { -norm } else { norm };
            v[0] -= alpha;
            let vtv = dot(&v, &v);
            let beta = T::of(2.0) / vtv;
            for c in j..cols {
                let col = &mut w.col_mut(c)[j..];
                let s = beta * dot(&v, col);
                axpy(-s, &v, col);
            }
            // exact values below the diagonal after reflection
            w[(j, j)] = alpha;
            for i in j + 1..rows {
                w[(i, j)] = T::zero();
            }
            vs.push(v);
            betas.push(beta);
        }
        let r = Mat::from_fn(
            rows,
            cols,
            |i, j| if i <= j { w[(i, j)] } else { T::zero() },
        );
        Ok(HouseholderQr {
            rows,
            cols,
            vs,
            betas,
            r,
        })
    }

    /// Upper-trapezoidal factor, `rows x cols`.
    pub fn r(&self) -> &Mat<T> {
        &self.r
    }

    /// `x <- Q x` with `Q = H_0 H_1 ... H_{cols-1}`.
    pub fn apply_q(&self, x: &mut [T]) {
        for j in (0..self.cols).rev() {
            self.reflect(j, x);
        }
    }

    /// `x <- Q^T x`
    pub fn apply_qt(&self, x: &mut [T]) {
        for j in 0..self.cols {
            self.reflect(j, x);
        }
    }

    fn reflect(&self, j: usize, x: &mut [T]) {
        let beta = self.betas[j];
        if beta == T::zero() {
            return;
        }
        let v = &self.vs[j];
        let tail = &mut x[j..];
        let s = beta * dot(v, tail);
        axpy(-s, v, tail);
    }

    /// Columns `range` of the full orthogonal factor.
    pub fn q_columns(&self, range: std::ops::Range<usize>) -> Mat<T> {
        let mut q = Mat::zeros(self.rows, range.len());
        for (c, j) in range.enumerate() {
            let col = q.col_mut(c);
            col[j] = T::one();
            self.apply_q(col);
        }
        q
    }

    /// Full `rows x rows` orthogonal factor.
    pub fn q(&self) -> Mat<T> {
        self.q_columns(0..self.rows)
    }

    /// Index of the first diagonal entry of `R` at or below `tol`.
    fn first_small_pivot(&self, tol: T) -> Option<usize> {
        (0..self.cols).find(|&j| self.r[(j, j)].abs() <= tol)
    }
}

/// Orthonormal basis of `{w : A w = 0}`, one basis vector per column.
#[derive(Debug, Clone, PartialEq)]
pub struct NullBasis<T> {
    pub basis: Mat<T>,
}

impl<T: Real> NullBasis<T> {
    /// Ambient dimension `n`.
    pub fn ambient_dim(&self) -> usize {
        self.basis.rows()
    }

    /// Subspace dimension `n - m`.
    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    /// Wraps a matrix whose columns are already orthonormal.
    pub fn from_orthonormal(basis: Mat<T>) -> Self {
        NullBasis { basis }
    }

    /// `B * U` for a square `U`, e.g. an orthogonal change of basis.
    pub fn rotated(&self, u: &Mat<T>) -> Result<Self> {
        Ok(NullBasis {
            basis: self.basis.matmul(u)?,
        })
    }
}

/// Null-space basis from the trailing columns of the Householder `Q` of `A^T`.
pub fn null_space_basis<T: Real>(a: &Mat<T>) -> Result<NullBasis<T>> {
    let (m, n) = (a.rows(), a.cols());
    if m >= n {
        return Err(Error::InvalidInput(format!(
            "null space needs m < n, got {m}x{n}"
        )));
    }
    let qr = HouseholderQr::factor(&a.transpose())?;
    let scale = (0..m).fold(T::zero(), |s, j| s.max(qr.r()[(j, j)].abs()));
    let tol = T::of_usize(n) * T::epsilon() * scale;
    if let Some(pivot) = qr.first_small_pivot(tol) {
        return Err(Error::Rank { pivot, size: m });
    }
    Ok(NullBasis {
        basis: qr.q_columns(m..n),
    })
}

/// Lower-triangular Cholesky factor `L` with `L L^T = M`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Mat<T>,
    /// `L^T`, so rows of `L` are contiguous for the forward sweep
    lt: Mat<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(m: &Mat<T>) -> Result<Self> {
        let n = m.rows();
        if m.cols() != n {
            return Err(Error::InvalidInput(format!(
                "cholesky needs a square matrix, got {}x{}",
                n,
                m.cols()
            )));
        }
        let sym_tol = T::of(1e3) * T::epsilon() * m.max_abs();
        for j in 0..n {
            for i in j + 1..n {
                if (m[(i, j)] - m[(j, i)]).abs() > sym_tol {
                    return Err(Error::InvalidInput(
                        "cholesky needs a symmetric matrix".into(),
                    ));
                }
            }
        }
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = m[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return Err(Error::Factor { pivot: j });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        let lt = l.transpose();
        Ok(Cholesky { l, lt })
    }

    pub fn l(&self) -> &Mat<T> {
        &self.l
    }

    /// Solves `M x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.l.rows();
        // forward: L y = b
        for i in 0..n {
            let row = &self.lt.col(i)[..i];
            let s = b[i] - dot(row, &b[..i]);
            b[i] = s / self.l[(i, i)];
        }
        // backward: L^T x = y; column i of L is row i of L^T
        for i in (0..n).rev() {
            let col = &self.l.col(i)[i + 1..];
            let s = b[i] - dot(col, &b[i + 1..]);
            b[i] = s / self.l[(i, i)];
        }
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        check_len(self.l.rows(), b.len())?;
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }
}

//! Dense real linear algebra for small matrices.
//!
//! Everything here is sized for desk-scale control problems (a few dozen rows
//! at most), so the algorithms are the plain O(n³) ones: cyclic Jacobi for the
//! symmetric eigenproblem, LU with partial pivoting for solves, and Cholesky
//! for positive definite factorizations.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative residual target for [`eig_sym`].
pub const TOL_EIG: f64 = 1e-10;
/// Default relative tolerance for the semidefinite tests.
pub const TOL_PSD: f64 = 1e-8;
/// Condition estimate above which a matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

const MAX_JACOBI_SWEEPS: usize = 100;

/// Dense row-major real matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Column vector.
    pub fn column(values: &[f64]) -> Self {
        Self { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    /// Row vector.
    pub fn row(values: &[f64]) -> Self {
        Self { rows: 1, cols: values.len(), data: values.to_vec() }
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { rows, cols, data: data.to_vec() })
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_row_slice(rows.len(), cols, &data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).take(self.rows).map(<[f64]>::to_vec).collect()
    }

    pub fn row_vec(&self, i: usize) -> Vec<f64> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col_vec(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Checked product, for call sites where shapes come from user input.
    pub fn try_mul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(self * rhs)
    }

    /// Copies the `nr`×`nc` sub-block starting at (`r0`, `c0`).
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "block out of range");
        let mut b = Self::zeros(nr, nc);
        for i in 0..nr {
            for j in 0..nc {
                b[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        b
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Matrix) {
        assert!(r0 + b.rows <= self.rows && c0 + b.cols <= self.cols, "block out of range");
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest singular value.
    pub fn norm_2(&self) -> f64 {
        singular_values(self).map(|s| s.first().copied().unwrap_or(0.0)).unwrap_or(f64::NAN)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in self.to_rows() {
            writeln!(f, "  {r:?}")?;
        }
        write!(f, "]")
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    /// Panics on incompatible shapes; use [`Matrix::try_mul`] for checked products.
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "cannot multiply {}x{} by {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "cannot add matrices of different shapes");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "cannot subtract matrices of different shapes");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

/// Symmetric matrix. Construction always symmetrizes, so `m[(i,j)] == m[(j,i)]`
/// holds bit-for-bit.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Matrix", try_from = "Matrix")]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Symmetrizes `(M + Mᵀ)/2`.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!("{}x{} matrix is not square", m.rows, m.cols)));
        }
        Ok(Self::symmetrize(m))
    }

    pub(crate) fn symmetrize(m: &Matrix) -> Self {
        let n = m.rows;
        let mut s = Matrix::zeros(n, n);
        for i in 0..n {
            s[(i, i)] = m[(i, i)];
            for j in (i + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        Self(s)
    }

    pub fn zeros(n: usize) -> Self {
        Self(Matrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    pub fn diag(values: &[f64]) -> Self {
        Self(Matrix::diag(values))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::from_matrix(&Matrix::from_rows(rows)?)
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        Self(&self.0 - &other.0)
    }

    /// Adds `s·I`.
    pub fn shift(&self, s: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.rows {
            m[(i, i)] += s;
        }
        Self(m)
    }

    /// `xᵀ M x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mx = self.0.mul_vec(x);
        mx.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(eig_sym(self)?.values)
    }

    pub fn lambda_max(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.last().copied().unwrap_or(0.0))
    }

    pub fn lambda_min(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, ij: (usize, usize)) -> &f64 {
        &self.0[ij]
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sym{:?}", self.0)
    }
}

impl From<SymMatrix> for Matrix {
    fn from(s: SymMatrix) -> Matrix {
        s.0
    }
}

impl TryFrom<Matrix> for SymMatrix {
    type Error = Error;
    fn try_from(m: Matrix) -> Result<Self> {
        SymMatrix::from_matrix(&m)
    }
}

/// Block layout for [`assemble`]. `None` blocks are zero.
#[derive(Debug, Clone)]
pub struct BlockSpec {
    pub row_sizes: Vec<usize>,
    pub col_sizes: Vec<usize>,
    pub blocks: Vec<Vec<Option<Matrix>>>,
}

impl BlockSpec {
    pub fn new(row_sizes: Vec<usize>, col_sizes: Vec<usize>) -> Self {
        let blocks = vec![vec![None; col_sizes.len()]; row_sizes.len()];
        Self { row_sizes, col_sizes, blocks }
    }

    /// Square grid with identical row and column partitions.
    pub fn square(sizes: Vec<usize>) -> Self {
        Self::new(sizes.clone(), sizes)
    }

    pub fn set(&mut self, i: usize, j: usize, m: Matrix) -> &mut Self {
        self.blocks[i][j] = Some(m);
        self
    }

    /// Places `m` at (i, j) and `mᵀ` at (j, i).
    pub fn set_sym(&mut self, i: usize, j: usize, m: Matrix) -> &mut Self {
        if i != j {
            self.blocks[j][i] = Some(m.transpose());
        }
        self.blocks[i][j] = Some(m);
        self
    }
}

/// Places every block at its cumulative offset.
pub fn assemble(spec: &BlockSpec) -> Result<Matrix> {
    if spec.blocks.len() != spec.row_sizes.len() {
        return Err(Error::Dimension("block grid row count does not match row sizes".into()));
    }
    let rows: usize = spec.row_sizes.iter().sum();
    let cols: usize = spec.col_sizes.iter().sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut r0 = 0;
    for (bi, row) in spec.blocks.iter().enumerate() {
        if row.len() != spec.col_sizes.len() {
            return Err(Error::Dimension(format!("block row {bi} has the wrong number of blocks")));
        }
        let mut c0 = 0;
        for (bj, block) in row.iter().enumerate() {
            if let Some(b) = block {
                if b.shape() != (spec.row_sizes[bi], spec.col_sizes[bj]) {
                    return Err(Error::Dimension(format!(
                        "block ({bi},{bj}) is {}x{}, expected {}x{}",
                        b.rows(),
                        b.cols(),
                        spec.row_sizes[bi],
                        spec.col_sizes[bj]
                    )));
                }
                out.set_block(r0, c0, b);
            }
            c0 += spec.col_sizes[bj];
        }
        r0 += spec.row_sizes[bi];
    }
    Ok(out)
}

/// `M + Mᵀ`.
pub fn brack(m: &Matrix) -> Result<SymMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", m.rows, m.cols)));
    }
    Ok(SymMatrix::symmetrize(&(m + &m.transpose())))
}

/// Ascending eigenvalues with orthonormal eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigendecomposition.
pub fn eig_sym(m: &SymMatrix) -> Result<SymEigen> {
    let n = m.dim();
    if !m.as_matrix().is_finite() {
        return Err(Error::NonFinite("eigenvalue input"));
    }
    let mut a = m.as_matrix().clone();
    let mut v = Matrix::identity(n);
    let scale = a.norm_fro();
    let mut converged = scale == 0.0;
    for _ in 0..MAX_JACOBI_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_JACOBI_SWEEPS });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Outcome of a semidefinite sign test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignCheck {
    pub holds: bool,
    /// λ_max for NSD tests, λ_min for PD/PSD tests.
    pub extreme: f64,
}

fn tol_scale(m: &SymMatrix, tol: f64) -> f64 {
    tol * m.as_matrix().norm_inf().max(1.0)
}

/// `M ⪯ 0` up to `tol·max(1, ‖M‖∞)`.
pub fn is_nsd(m: &SymMatrix, tol: f64) -> Result<SignCheck> {
    let lmax = m.lambda_max()?;
    Ok(SignCheck { holds: lmax <= tol_scale(m, tol), extreme: lmax })
}

/// `M ⪰ 0` up to `tol·max(1, ‖M‖∞)`.
pub fn is_psd(m: &SymMatrix, tol: f64) -> Result<SignCheck> {
    let lmin = m.lambda_min()?;
    Ok(SignCheck { holds: lmin >= -tol_scale(m, tol), extreme: lmin })
}

/// `M ≻ 0`: λ_min strictly above `tol·max(1, ‖M‖∞)`.
pub fn is_pd(m: &SymMatrix, tol: f64) -> Result<SignCheck> {
    let lmin = m.lambda_min()?;
    Ok(SignCheck { holds: lmin > tol_scale(m, tol), extreme: lmin })
}

/// `A − B D⁻¹ Bᵀ` for `M = [[A, B], [Bᵀ, D]]` split at `split`.
pub fn schur_complement(m: &SymMatrix, split: usize) -> Result<SymMatrix> {
    let n = m.dim();
    if split == 0 || split >= n {
        return Err(Error::Dimension(format!("split {split} out of range for dimension {n}")));
    }
    let mm = m.as_matrix();
    let a = mm.block(0, 0, split, split);
    let b = mm.block(0, split, split, n - split);
    let d = mm.block(split, split, n - split, n - split);
    let dinv_bt = solve(&d, &b.transpose())?;
    Ok(SymMatrix::symmetrize(&(&a - &(&b * &dinv_bt))))
}

/// `Tᵀ M T`. Full column rank of `T` is the caller's responsibility.
pub fn congruence(m: &SymMatrix, t: &Matrix) -> Result<SymMatrix> {
    if t.rows() != m.dim() {
        return Err(Error::Dimension(format!(
            "congruence factor has {} rows, matrix has dimension {}",
            t.rows(),
            m.dim()
        )));
    }
    Ok(SymMatrix::symmetrize(&(&(&t.transpose() * m.as_matrix()) * t)))
}

struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(m: &Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!("{}x{} matrix is not square", m.rows, m.cols)));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("linear solve input"));
        }
        let n = m.rows;
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty pivot range");
            if pivot == 0.0 {
                return Err(Error::Singular { condition: f64::INFINITY });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            for i in (k + 1)..n {
                let f = lu[(i, k)] / lu[(k, k)];
                lu[(i, k)] = f;
                for j in (k + 1)..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        Ok(Self { lu, perm })
    }

    fn solve_cols(&self, rhs: &Matrix) -> Matrix {
        let n = self.lu.rows;
        let mut x = Matrix::zeros(n, rhs.cols);
        for c in 0..rhs.cols {
            let mut y: Vec<f64> = self.perm.iter().map(|&p| rhs[(p, c)]).collect();
            for i in 0..n {
                for k in 0..i {
                    y[i] -= self.lu[(i, k)] * y[k];
                }
            }
            for i in (0..n).rev() {
                for k in (i + 1)..n {
                    y[i] -= self.lu[(i, k)] * y[k];
                }
                y[i] /= self.lu[(i, i)];
            }
            for i in 0..n {
                x[(i, c)] = y[i];
            }
        }
        x
    }
}

fn checked_inverse(m: &Matrix) -> Result<(Lu, Matrix)> {
    let lu = Lu::factor(m)?;
    let inv = lu.solve_cols(&Matrix::identity(m.rows));
    let condition = m.norm_one() * inv.norm_one();
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Singular { condition });
    }
    Ok((lu, inv))
}

/// Inverse with a 1-norm condition check against [`MAX_CONDITION`].
pub fn inverse(m: &Matrix) -> Result<Matrix> {
    Ok(checked_inverse(m)?.1)
}

/// Solves `M X = rhs`.
pub fn solve(m: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    if rhs.rows() != m.rows() {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, system has {}",
            rhs.rows(),
            m.rows()
        )));
    }
    let (lu, _) = checked_inverse(m)?;
    Ok(lu.solve_cols(rhs))
}

/// Lower Cholesky factor, or `None` when the matrix is not numerically PD.
pub fn cholesky(m: &SymMatrix) -> Option<Matrix> {
    let n = m.dim();
    let a = m.as_matrix();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Inverse of an SPD matrix from its lower Cholesky factor.
pub fn cholesky_inverse(l: &Matrix) -> SymMatrix {
    let n = l.rows();
    // L⁻¹ by forward substitution, then (L⁻¹)ᵀ L⁻¹.
    let mut linv = Matrix::zeros(n, n);
    for c in 0..n {
        for i in c..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in c..i {
                s -= l[(i, k)] * linv[(k, c)];
            }
            linv[(i, c)] = s / l[(i, i)];
        }
    }
    SymMatrix::symmetrize(&(&linv.transpose() * &linv))
}

/// Singular values in descending order, via the symmetric embedding
/// `[[0, M], [Mᵀ, 0]]` whose positive eigenvalues are the singular values.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut spec = BlockSpec::square(vec![r, c]);
    spec.set_sym(0, 1, m.clone());
    let embed = SymMatrix::symmetrize(&assemble(&spec)?);
    let mut values = eig_sym(&embed)?.values;
    values.reverse();
    values.truncate(k);
    Ok(values.into_iter().map(|v| v.max(0.0)).collect())
}

/// `sqrt(vᵀ P v)`.
pub fn weighted_norm(v: &[f64], p: &SymMatrix) -> f64 {
    p.quad_form(v).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn brack_examples() {
        assert_eq!(brack(&Matrix::identity(2)).unwrap(), SymMatrix::diag(&[2.0, 2.0]));
        let n = Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        assert_eq!(brack(&n).unwrap(), sym(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let a = Matrix::from_rows(&[[1.2, 0.0, 0.0], [0.1, 0.8, 0.0], [0.0, 0.1, 0.6]]).unwrap();
        let expected = [[2.4, 0.1, 0.0], [0.1, 1.6, 0.1], [0.0, 0.1, 1.2]];
        let got = brack(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(got[(i, j)], expected[i][j], epsilon = 1e-15);
            }
        }
        assert!(matches!(brack(&Matrix::zeros(2, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn assemble_examples() {
        let mut spec = BlockSpec::square(vec![1, 1]);
        spec.set(0, 0, Matrix::diag(&[1.0])).set(1, 1, Matrix::diag(&[2.0]));
        assert_eq!(assemble(&spec).unwrap(), Matrix::diag(&[1.0, 2.0]));

        let empty = BlockSpec::square(vec![3, 1, 2, 3]);
        let m = assemble(&empty).unwrap();
        assert_eq!(m.shape(), (9, 9));
        assert!(m.is_zero());

        let mut bad = BlockSpec::square(vec![2, 1]);
        bad.set(0, 1, Matrix::zeros(1, 1));
        assert!(matches!(assemble(&bad), Err(Error::Dimension(_))));
    }

    #[test]
    fn eig_examples() {
        let e = eig_sym(&SymMatrix::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        let e = eig_sym(&SymMatrix::diag(&[10.0, 20.0, 5.0])).unwrap();
        assert_eq!(e.values, vec![5.0, 10.0, 20.0]);
        let e = eig_sym(&sym(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_rejects_nan() {
        let mut m = Matrix::identity(2);
        m[(0, 1)] = f64::NAN;
        assert!(eig_sym(&SymMatrix(m)).is_err());
    }

    #[test]
    fn sign_tests() {
        assert!(is_nsd(&SymMatrix::identity(3).scale(-1.0), TOL_PSD).unwrap().holds);
        assert!(!is_nsd(&SymMatrix::diag(&[-1.0, 1e-3]), 0.0).unwrap().holds);
        assert!(is_pd(&SymMatrix::identity(2), TOL_PSD).unwrap().holds);
        assert!(!is_pd(&SymMatrix::zeros(2), TOL_PSD).unwrap().holds);
        assert!(is_pd(&SymMatrix::diag(&[0.1, 0.05, 0.2]), TOL_PSD).unwrap().holds);
    }

    #[test]
    fn schur_examples() {
        // [[A, B], [Bᵀ, I]] → A − BBᵀ
        let m = sym(&[&[5.0, 1.0, 2.0], &[1.0, 4.0, 0.5], &[2.0, 0.5, 1.0]]);
        let s = schur_complement(&m, 2).unwrap();
        let expected = sym(&[&[1.0, 0.0], &[0.0, 3.75]]);
        assert_abs_diff_eq!((&s.into_matrix() - expected.as_matrix()).max_abs(), 0.0, epsilon = 1e-14);

        let mut spec = BlockSpec::square(vec![2, 2]);
        spec.set(0, 0, Matrix::identity(2))
            .set(0, 1, Matrix::identity(2))
            .set(1, 0, Matrix::identity(2))
            .set(1, 1, Matrix::identity(2));
        let hat = SymMatrix::from_matrix(&assemble(&spec).unwrap()).unwrap();
        assert!(schur_complement(&hat, 2).unwrap().as_matrix().is_zero());

        let singular = sym(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert!(matches!(schur_complement(&singular, 1), Err(Error::Singular { .. })));
    }

    #[test]
    fn congruence_examples() {
        let m = SymMatrix::identity(3).scale(-1.0);
        assert_eq!(congruence(&m, &Matrix::identity(3)).unwrap(), m);
        let c = congruence(&m, &Matrix::identity(3).scale(2.0)).unwrap();
        assert_eq!(c, SymMatrix::identity(3).scale(-4.0));
        assert!(congruence(&m, &Matrix::identity(2)).is_err());
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inverse(&Matrix::diag(&[2.0, 4.0])).unwrap(), Matrix::diag(&[0.5, 0.25]));
        let p = inverse(&Matrix::diag(&[0.1, 0.05, 0.2])).unwrap();
        for (i, v) in [10.0, 20.0, 5.0].iter().enumerate() {
            assert_abs_diff_eq!(p[(i, i)], *v, epsilon = 1e-12);
        }
        let near = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0 + 1e-14]]).unwrap();
        assert!(matches!(inverse(&near), Err(Error::Singular { .. })));
        assert!(matches!(inverse(&Matrix::zeros(2, 2)), Err(Error::Singular { .. })));
    }

    #[test]
    fn from_rows_validates() {
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(matches!(Matrix::from_rows(&[[f64::INFINITY]]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn singular_values_of_selector() {
        let c = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let s = singular_values(&c).unwrap();
        assert_eq!(s.len(), 2);
        assert_abs_diff_eq!(s[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn cholesky_round_trip() {
        let m = sym(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let l = cholesky(&m).unwrap();
        let inv = cholesky_inverse(&l);
        let prod = m.as_matrix() * inv.as_matrix();
        assert_abs_diff_eq!((&prod - &Matrix::identity(2)).max_abs(), 0.0, epsilon = 1e-14);
        assert!(cholesky(&sym(&[&[1.0, 2.0], &[2.0, 1.0]])).is_none());
    }
}

//! Dense vectors and row-major matrices, a Cholesky solver, and the rank-1
//! inverse downdate that drives the recursive least-squares head.
//!
//! Sizes here are small (the head dimension is tens to a few hundred), so
//! everything is plain `Vec<f64>` storage with straightforward loops.

use std::fmt;
use std::ops::{Deref, DerefMut, Index, IndexMut};

use crate::error::{Error, Result};

/// Symmetry tolerance used when wrapping a matrix as [`SpdMatrix`].
pub const SYMMETRY_TOL: f64 = 1e-12;

fn first_non_finite(data: &[f64]) -> Option<usize> {
    data.iter().position(|v| !v.is_finite())
}

/// A nonempty vector of finite `f64`.
#[derive(Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("Vector::new"));
        }
        if let Some(index) = first_non_finite(&data) {
            return Err(Error::NonFinite {
                context: "Vector::new".into(),
                index,
            });
        }
        Ok(Vector(data))
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "Vector::zeros with len 0");
        Vector(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        self.dot(&self.0).sqrt()
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim("Matrix::from_vec", rows * cols, data.len()));
        }
        if let Some(index) = first_non_finite(&data) {
            return Err(Error::NonFinite {
                context: "Matrix::from_vec".into(),
                index,
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds from nested rows; panics on ragged input (test and fixture helper).
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dim("matmul", self.cols, other.rows));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest elementwise absolute difference; panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        first_non_finite(&self.data)
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
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Matrix-vector product `m · v`.
pub fn matvec(m: &Matrix, v: &[f64]) -> Result<Vector> {
    if m.cols != v.len() {
        return Err(Error::dim("matvec", m.cols, v.len()));
    }
    let mut out = Vec::with_capacity(m.rows);
    matvec_into(m, v, &mut out);
    Vector::new(out)
}

pub(crate) fn matvec_into(m: &Matrix, v: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..m.rows).map(|i| dot(m.row(i), v)));
}

/// Outer product `u vᵀ`.
pub fn outer(u: &[f64], v: &[f64]) -> Matrix {
    Matrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
}

/// A symmetric positive definite matrix.
#[derive(Clone, PartialEq)]
pub struct SpdMatrix(Matrix);

impl SpdMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim("SpdMatrix::new", m.rows, m.cols));
        }
        if let Some(index) = m.first_non_finite() {
            return Err(Error::NonFinite {
                context: "SpdMatrix::new".into(),
                index,
            });
        }
        Cholesky::factor(&m)?;
        if !is_symmetric(&m, SYMMETRY_TOL) {
            return Err(Error::NotPositiveDefinite {
                pivot: 0,
                value: f64::NAN,
            });
        }
        Ok(SpdMatrix(m))
    }

    /// `delta · I`; `delta` must be positive.
    pub fn scaled_identity(n: usize, delta: f64) -> Self {
        assert!(delta > 0.0 && delta.is_finite(), "scaled_identity: bad delta {delta}");
        let mut m = Matrix::identity(n);
        m.scale(delta);
        SpdMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn inverse(&self) -> Result<SpdMatrix> {
        Ok(SpdMatrix(Cholesky::factor(&self.0)?.inverse()))
    }

    /// In-place form of [`sherman_morrison_downdate`]:
    /// `B ← B − (B h hᵀ B) / (1 + hᵀ B h)`.
    ///
    /// Returns the gain `B_new h = B h / (1 + hᵀ B h)`. Only the upper
    /// triangle is computed and then mirrored, so the result is exactly
    /// symmetric.
    pub fn downdate_in_place(&mut self, h: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if h.len() != n {
            return Err(Error::dim("sherman_morrison_downdate", n, h.len()));
        }
        let b = &mut self.0;
        let u: Vec<f64> = (0..n).map(|i| dot(b.row(i), h)).collect();
        let denom = 1.0 + dot(&u, h);
        if !denom.is_finite() {
            return Err(Error::NonFinite {
                context: "sherman_morrison_downdate: 1 + hᵀBh".into(),
                index: 0,
            });
        }
        for i in 0..n {
            let ui = u[i] / denom;
            for j in i..n {
                let v = b[(i, j)] - ui * u[j];
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("sherman_morrison_downdate: B[{i},{j}]"),
                        index: i * n + j,
                    });
                }
                b[(i, j)] = v;
                b[(j, i)] = v;
            }
        }
        Ok(u.into_iter().map(|v| v / denom).collect())
    }
}

impl fmt::Debug for SpdMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Spd{:?}", self.0)
    }
}

/// Rank-1 inverse downdate from the matrix inversion lemma:
/// returns `(B⁻¹ + h hᵀ)⁻¹` computed without any inversion.
pub fn sherman_morrison_downdate(b: &SpdMatrix, h: &[f64]) -> Result<SpdMatrix> {
    let mut out = b.clone();
    out.downdate_in_place(h)?;
    Ok(out)
}

/// Solves `a x = rhs` through a Cholesky factorization.
pub fn solve_spd(a: &SpdMatrix, rhs: &[f64]) -> Result<Vector> {
    if rhs.len() != a.dim() {
        return Err(Error::dim("solve_spd", a.dim(), rhs.len()));
    }
    Vector::new(Cholesky::factor(&a.0)?.solve(rhs))
}

fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    let scale = m.max_abs().max(1.0);
    (0..m.rows).all(|i| (i + 1..m.cols).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}

/// True iff `m` is square, symmetric to within `tol` (relative to its largest
/// entry, floored at 1) and every Cholesky pivot of its symmetric part is positive.
pub fn assert_spd(m: &Matrix, tol: f64) -> bool {
    if !m.is_square() || m.first_non_finite().is_some() || !is_symmetric(m, tol) {
        return false;
    }
    let sym = Matrix::from_fn(m.rows, m.cols, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    Cholesky::factor(&sym).is_ok()
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`. Reads only the
/// lower triangle of the input.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn factor(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim("cholesky", a.rows, a.cols));
        }
        let n = a.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d.is_nan() || d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.l.rows;
        let l = &self.l;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        y
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.l.rows;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        // symmetrize away solve round-off
        for i in 0..n {
            for j in i + 1..n {
                let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = v;
                inv[(j, i)] = v;
            }
        }
        inv
    }
}

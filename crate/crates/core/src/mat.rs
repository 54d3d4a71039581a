//! Dense row-major matrices and the few vector primitives the kernels need.
//!
//! Everything here is deliberately plain `Vec<f64>` storage: the update
//! kernels count every floating-point operation they perform, so the loop
//! structure has to be owned by this crate rather than delegated to an
//! external linear-algebra library.

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::ShapeMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
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

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Plain matrix product, cache-blocked over the inner dimension.
    /// Used by oracles, residual checks, and fitting; never by the
    /// flop-counted kernels.
    pub fn mul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let (m, n, p) = (self.rows, self.cols, rhs.cols);
        let mut out = Mat::zeros(m, p);
        const BLOCK: usize = 64;
        for l0 in (0..n).step_by(BLOCK) {
            let l1 = (l0 + BLOCK).min(n);
            for i in 0..m {
                let a_row = self.row(i);
                let out_row = out.row_mut(i);
                for l in l0..l1 {
                    axpy(out_row, a_row[l], rhs.row(l));
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matrix-vector shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Relative asymmetry ‖A − Aᵀ‖_F / ‖A‖_F (0 for the zero matrix).
    pub fn symmetry_gap(&self) -> f64 {
        assert!(self.is_square());
        let mut gap = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let d = self.data[i * self.cols + j] - self.data[j * self.cols + i];
                gap += 2.0 * d * d;
            }
        }
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            0.0
        } else {
            gap.sqrt() / norm
        }
    }

    /// Replace A by (A + Aᵀ)/2.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let a = self.data[i * self.cols + j];
                let b = self.data[j * self.cols + i];
                let m = 0.5 * (a + b);
                self.data[i * self.cols + j] = m;
                self.data[j * self.cols + i] = m;
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.data {
            *v *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> Mat {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn add_diagonal(&mut self, a: f64) {
        assert!(self.is_square());
        for i in 0..self.rows {
            self.data[i * self.cols + i] += a;
        }
    }

    /// ‖self − other‖_F / max(‖other‖_F, 1) — relative Frobenius distance.
    pub fn rel_frobenius_distance(&self, other: &Mat) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        let mut diff = 0.0;
        for (a, b) in self.data.iter().zip(&other.data) {
            let d = a - b;
            diff += d * d;
        }
        diff.sqrt() / other.frobenius_norm().max(1.0)
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Inner product with four independent accumulators so the compiler can
/// vectorize the reduction.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    let (mut s0, mut s1, mut s2, mut s3) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (x, y) in (&mut ca).zip(&mut cb) {
        s0 += x[0] * y[0];
        s1 += x[1] * y[1];
        s2 += x[2] * y[2];
        s3 += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (s0 + s1) + (s2 + s3) + tail
}

/// out[j] += a * x[j]
#[inline]
pub fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(out.len(), x.len());
    for (o, &v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

/// out[j] = a * x[j]
#[inline]
pub fn assign_scaled(out: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(out.len(), x.len());
    for (o, &v) in out.iter_mut().zip(x) {
        *o = a * v;
    }
}

/// ‖I − a·b‖_F, the residual used to judge the quality of a computed inverse.
pub fn identity_residual(a: &Mat, b: &Mat) -> f64 {
    assert!(a.is_square() && b.is_square());
    assert_eq!(a.rows(), b.rows());
    let p = a.mul(b);
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        let row = p.row(i);
        for (j, &v) in row.iter().enumerate() {
            let d = if i == j { 1.0 - v } else { -v };
            acc += d * d;
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mul_matches_hand_product() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Mat::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let c = a.mul(&b);
        assert_eq!(c.row(0), &[19.0, 22.0]);
        assert_eq!(c.row(1), &[43.0, 50.0]);
    }

    #[test]
    fn dot_handles_remainders() {
        let a: Vec<f64> = (1..=7).map(|v| v as f64).collect();
        let b = vec![1.0; 7];
        assert_relative_eq!(dot(&a, &b), 28.0);
        assert_relative_eq!(dot(&a[..1], &b[..1]), 1.0);
        assert_relative_eq!(dot(&[], &[]), 0.0);
    }

    #[test]
    fn identity_residual_of_inverse_pair() {
        let a = Mat::identity(4).scaled(2.0);
        let b = Mat::identity(4).scaled(0.5);
        assert!(identity_residual(&a, &b) < 1e-15);
        let c = Mat::identity(4);
        assert_relative_eq!(identity_residual(&a, &c), 2.0); // ‖I − 2I‖ = √4
    }

    #[test]
    fn symmetry_gap_and_symmetrize() {
        let mut m = Mat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(m.symmetry_gap() > 0.5);
        m.symmetrize();
        assert_eq!(m[(0, 1)], m[(1, 0)]);
        assert_eq!(m.symmetry_gap(), 0.0);
    }

    #[test]
    fn from_rows_rejects_ragged_input() {
        let err = Mat::from_rows(&[vec![1.0, 2.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }
}

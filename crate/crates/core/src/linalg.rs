//! Small dense linear algebra: a row-major matrix, Householder least squares
//! and Cholesky factorisation. Sizes here are tens to a few hundred columns.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
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

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact(0) panics, so guard the degenerate shape
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Solves `min ||A x - b||_2` for a tall matrix by Householder QR.
///
/// A column whose reflected diagonal falls below a relative tolerance of the
/// largest column norm marks the system rank-deficient.
pub fn least_squares<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    let (m, n) = (a.rows(), a.cols());
    if b.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: b.len(),
        });
    }
    if m < n {
        return Err(Error::RankDeficient { rows: m, cols: n });
    }
    // column-major working copy
    let mut q: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut rhs = b.to_vec();
    let max_norm = q
        .iter()
        .map(|c| norm2(c))
        .fold(T::zero(), |acc, x| acc.max(x));
    if max_norm == T::zero() {
        return Err(Error::RankDeficient { rows: m, cols: n });
    }
    let tol = max_norm * T::epsilon() * T::lit(1e3) * T::from_usize_lossy(m.max(n)).sqrt();
    let mut diag = vec![T::zero(); n];

    for k in 0..n {
        let col_norm = norm2(&q[k][k..]);
        if col_norm <= tol {
            return Err(Error::RankDeficient { rows: m, cols: n });
        }
        let alpha = if q[k][k] > T::zero() { -col_norm } else { col_norm };
        let mut v: Vec<T> = q[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        diag[k] = alpha;
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        for col in q.iter_mut().skip(k + 1) {
            let dot: T = v.iter().zip(&col[k..]).map(|(&vi, &ci)| vi * ci).sum();
            let f = two * dot / vnorm2;
            for (ci, &vi) in col[k..].iter_mut().zip(&v) {
                *ci -= f * vi;
            }
        }
        let dot: T = v.iter().zip(&rhs[k..]).map(|(&vi, &ri)| vi * ri).sum();
        let f = two * dot / vnorm2;
        for (ri, &vi) in rhs[k..].iter_mut().zip(&v) {
            *ri -= f * vi;
        }
    }

    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for j in i + 1..n {
            acc -= q[j][i] * x[j];
        }
        x[i] = acc / diag[i];
    }
    Ok(x)
}

/// Lower Cholesky factor of a symmetric positive-definite `n x n` matrix
/// stored row-major. Returns `None` when the matrix is not positive definite.
pub fn cholesky<T: Scalar>(a: &[T], n: usize) -> Option<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > T::zero()) || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// `out = L z` for a row-major lower-triangular `L`.
pub fn lower_mul<T: Scalar>(l: &[T], z: &[T], out: &mut [T]) {
    let n = z.len();
    for i in 0..n {
        let mut acc = T::zero();
        for k in 0..=i {
            acc += l[i * n + k] * z[k];
        }
        out[i] = acc;
    }
}

pub fn norm2<T: Scalar>(v: &[T]) -> T {
    // scaled to avoid overflow on large entries
    let scale = v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let ss: T = v.iter().map(|&x| (x / scale) * (x / scale)).sum();
    scale * ss.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_recovers_exact_solution() {
        let a = Matrix::from_rows(&[
            [1.0, 0.0],
            [1.0, 1.0],
            [1.0, 2.0],
            [1.0, 3.0],
        ])
        .unwrap();
        let b = [1.0f64, 3.0, 5.0, 7.0];
        let x: Vec<f64> = least_squares(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let a = Matrix::from_rows(&[[1.0, 0.5], [1.0, -1.0], [1.0, 2.0]]).unwrap();
        let b = [0.3f64, -1.2, 2.5];
        let x: Vec<f64> = least_squares(&a, &b).unwrap();
        // normal equations solved by hand
        let (s11, s12, s22) = (3.0, 1.5, 0.25 + 1.0 + 4.0);
        let (t1, t2) = (0.3 - 1.2 + 2.5, 0.15 + 1.2 + 5.0);
        let det = s11 * s22 - s12 * s12;
        assert!((x[0] - (s22 * t1 - s12 * t2) / det).abs() < 1e-12);
        assert!((x[1] - (s11 * t2 - s12 * t1) / det).abs() < 1e-12);
    }

    #[test]
    fn duplicate_columns_are_rank_deficient() {
        let a = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        assert!(matches!(
            least_squares(&a, &[1.0, 2.0, 3.0]),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn wide_system_is_rejected() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        assert!(least_squares(&a, &[1.0]).is_err());
    }

    #[test]
    fn cholesky_roundtrip() {
        let a = [4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let l = cholesky(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((v - a[i * 3 + j]).abs() < 1e-12);
            }
        }
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }
}

//! Dense row-major matrices and the handful of decompositions the crate needs.
//!
//! Problem sizes here are small (a few dozen rows/columns), so the
//! decompositions are plain Jacobi sweeps: simple, robust and accurate to
//! working precision.

use std::ops::{Index, IndexMut};

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
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

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows, "dimension mismatch");
        let mut out = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..o.cols {
                    out[(i, j)] += a * o[(k, j)];
                }
            }
        }
        out
    }

    /// `AᵀA`, exploiting symmetry.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                if row[i] == T::zero() {
                    continue;
                }
                for j in i..n {
                    g[(i, j)] += row[i] * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g[(i, j)] = g[(j, i)];
            }
        }
        g
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    /// Ascending.
    pub values: Vec<T>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Matrix<T>,
}

const MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigenvalue algorithm. Only the upper triangle is read.
pub fn symmetric_eigen<T: Real>(a: &Matrix<T>) -> SymmetricEigen<T> {
    assert_eq!(a.rows, a.cols, "eigen-decomposition needs a square matrix");
    let n = a.rows;
    let mut m = a.clone();
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    let mut v = Matrix::identity(n);
    let scale = m.max_abs();
    if scale > T::zero() {
        for _ in 0..MAX_SWEEPS {
            let mut off = T::zero();
            for p in 0..n {
                for q in p + 1..n {
                    off += m[(p, q)] * m[(p, q)];
                }
            }
            if off.sqrt() <= T::epsilon() * T::lit(1e-3) * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = m[(p, q)];
                    if apq.abs() <= T::min_positive_value() {
                        continue;
                    }
                    let app = m[(p, p)];
                    let aqq = m[(q, q)];
                    let theta = (aqq - app) / (apq + apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[(k, p)];
                        let mkq = m[(k, q)];
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[(p, k)];
                        let mqk = m[(q, k)];
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
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
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    SymmetricEigen { values, vectors }
}

/// Singular values in descending order (one-sided Jacobi / Hestenes).
pub fn singular_values<T: Real>(a: &Matrix<T>) -> Vec<T> {
    // Orthogonalise the columns of the taller orientation.
    let work = if a.rows >= a.cols { a.clone() } else { a.transpose() };
    let (m, n) = work.shape();
    // Column-major copy for cache-friendly column rotations.
    let mut cols: Vec<Vec<T>> = (0..n).map(|c| (0..m).map(|r| work[(r, c)]).collect()).collect();
    let tol = T::epsilon() * T::lit(4.0);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for (&x, &y) in cols[p].iter().zip(&cols[q]) {
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (zeta * zeta + T::one()).sqrt());
                let t = if zeta == T::zero() { T::one() } else { t };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                let (cp, cq) = (&mut lo[p], &mut hi[0]);
                for k in 0..m {
                    let x = cp[k];
                    let y = cq[k];
                    cp[k] = c * x - s * y;
                    cq[k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = cols.iter().map(|c| c.iter().map(|&x| x * x).sum::<T>().sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Numerical rank: singular values strictly above `rel_tol * sigma_max`.
pub fn numerical_rank<T: Real>(a: &Matrix<T>, rel_tol: T) -> usize {
    let sv = singular_values(a);
    let Some(&max) = sv.first() else { return 0 };
    if max <= T::zero() {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when `A` is numerically singular.
pub fn solve<T: Real>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    let n = a.rows;
    assert_eq!(n, a.cols);
    assert_eq!(n, b.len());
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.max_abs().max(T::min_positive_value());
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[(i, col)].abs().partial_cmp(&m[(j, col)].abs()).unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[(pivot, col)].abs() <= T::epsilon() * scale {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                let tmp = m[(col, k)];
                m[(col, k)] = m[(pivot, k)];
                m[(pivot, k)] = tmp;
            }
            x.swap(col, pivot);
        }
        let d = m[(col, col)];
        for r in col + 1..n {
            let f = m[(r, col)] / d;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = m[(col, k)];
                m[(r, k)] -= f * v;
            }
            let xc = x[col];
            x[r] -= f * xc;
        }
    }
    for r in (0..n).rev() {
        let mut acc = x[r];
        for k in r + 1..n {
            acc -= m[(r, k)] * x[k];
        }
        x[r] = acc / m[(r, r)];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_known_matrix() {
        let a = Matrix::from_rows(&[vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]]);
        let e = symmetric_eigen(&a);
        let s2 = 2f64.sqrt();
        let expect = [2.0 - s2, 2.0, 2.0 + s2];
        for (v, x) in e.values.iter().zip(expect) {
            assert!((v - x).abs() < 1e-12, "{v} vs {x}");
        }
        // A v = lambda v
        for k in 0..3 {
            let col: Vec<f64> = (0..3).map(|r| e.vectors[(r, k)]).collect();
            let av = a.mul_vec(&col);
            for r in 0..3 {
                assert!((av[r] - e.values[k] * col[r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_values_of_rectangular() {
        // diag(3, 2) padded with a zero row, then a wide version.
        let a = Matrix::<f64>::from_rows(&[vec![3.0, 0.0], vec![0.0, 2.0], vec![0.0, 0.0]]);
        assert_eq!(singular_values(&a), vec![3.0, 2.0]);
        let sv = singular_values(&a.transpose());
        assert!((sv[0] - 3.0).abs() < 1e-15 && (sv[1] - 2.0).abs() < 1e-15);
        let rank1 = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert_eq!(numerical_rank(&rank1, 1e-9), 1);
        assert_eq!(numerical_rank(&Matrix::<f64>::zeros(2, 3), 1e-9), 0);
    }

    #[test]
    fn solve_small_system() {
        let a = Matrix::<f64>::from_rows(&[vec![0.0, 2.0], vec![1.0, 1.0]]);
        let x = solve(&a, &[4.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        let singular = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(solve(&singular, &[1.0, 1.0]).is_none());
    }

    #[test]
    fn works_in_single_precision() {
        let a = Matrix::from_rows(&[vec![4.0f32, 1.0], vec![1.0, 3.0]]);
        let e = symmetric_eigen(&a);
        let tr: f32 = e.values.iter().sum();
        assert!((tr - 7.0).abs() < 1e-5);
    }
}

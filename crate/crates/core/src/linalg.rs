//! Minimal dense linear algebra: row-major matrices, LU with partial
//! pivoting, and a blocked Cholesky. Sized for desk-scale problems (a few
//! thousand rows), where dense factorizations beat the bookkeeping of sparse
//! ones.

use rayon::prelude::*;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| dot(self.row(r), x))
            .collect()
    }

    /// Maximum absolute entry difference against another matrix.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// LU factorization with partial pivoting of a square matrix.
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("matrix is singular to working precision at pivot {pivot}")]
pub struct SingularMatrix {
    pub pivot: usize,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Lu, SingularMatrix> {
        assert_eq!(a.rows, a.cols);
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let mut max_val = 0.0;
            let mut max_row = k;
            for i in k..n {
                let v = lu[i * n + k].abs();
                if v > max_val {
                    max_val = v;
                    max_row = i;
                }
            }
            if max_val < 1e-12 {
                return Err(SingularMatrix { pivot: k });
            }
            if max_row != k {
                for j in 0..n {
                    lu.swap(k * n + j, max_row * n + j);
                }
                perm.swap(k, max_row);
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                if factor != 0.0 {
                    let (head, tail) = lu.split_at_mut(i * n);
                    let krow = &head[k * n + k + 1..k * n + n];
                    let irow = &mut tail[k + 1..n];
                    for (iv, kv) in irow.iter_mut().zip(krow) {
                        *iv -= factor * kv;
                    }
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    /// Solve `Aᵀ y = c`. With `PA = LU`: solve `Uᵀz = c`, `Lᵀv = z`, then
    /// `y = Pᵀv`.
    pub fn solve_transposed(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(c.len(), n);
        let mut z = c.to_vec();
        for i in 0..n {
            let mut acc = z[i];
            for j in 0..i {
                acc -= self.lu[j * n + i] * z[j];
            }
            z[i] = acc / self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for j in (i + 1)..n {
                acc -= self.lu[j * n + i] * z[j];
            }
            z[i] = acc;
        }
        let mut y = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            y[p] = z[i];
        }
        y
    }

    /// Solve `A x = b` in place of a fresh vector.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        x
    }
}

/// In-place lower Cholesky factorization with a parallel trailing update.
/// `a` holds a symmetric positive definite matrix (only the lower triangle is
/// read); on success it holds L with `a = L Lᵀ`.
pub fn cholesky_in_place(a: &mut Matrix) -> Result<(), SingularMatrix> {
    let n = a.rows;
    assert_eq!(n, a.cols);
    const BLOCK: usize = 64;
    let data = &mut a.data;

    let mut k0 = 0;
    while k0 < n {
        let kb = (k0 + BLOCK).min(n);
        // Factor the diagonal panel [k0..kb) serially.
        for k in k0..kb {
            let mut diag = data[k * n + k];
            for j in k0..k {
                let v = data[k * n + j];
                diag -= v * v;
            }
            if diag <= 0.0 || !diag.is_finite() {
                return Err(SingularMatrix { pivot: k });
            }
            let diag = diag.sqrt();
            data[k * n + k] = diag;
            let inv = 1.0 / diag;
            for i in (k + 1)..n {
                let mut v = data[i * n + k];
                let (krow, irow) = (&data[k * n + k0..k * n + k], &data[i * n + k0..i * n + k]);
                for (kv, iv) in krow.iter().zip(irow) {
                    v -= kv * iv;
                }
                data[i * n + k] = v * inv;
            }
        }
        // Trailing update: A[i][j] -= sum_p L[i][p] L[j][p] for p in the
        // panel columns. Copy those columns once so the parallel per-row
        // update only reads the scratch buffer.
        if kb < n {
            let width = kb - k0;
            let below = n - kb;
            let mut w = vec![0.0; below * width];
            for i in 0..below {
                let src = &data[(kb + i) * n + k0..(kb + i) * n + kb];
                w[i * width..(i + 1) * width].copy_from_slice(src);
            }
            data[kb * n..]
                .par_chunks_mut(n)
                .enumerate()
                .for_each(|(i, row)| {
                    let wi = &w[i * width..(i + 1) * width];
                    for j in 0..=i {
                        let wj = &w[j * width..(j + 1) * width];
                        let mut acc = 0.0;
                        for (a, b) in wi.iter().zip(wj) {
                            acc += a * b;
                        }
                        row[kb + j] -= acc;
                    }
                });
        }
        k0 = kb;
    }
    Ok(())
}

/// Solve `L Lᵀ x = b` given the Cholesky factor produced by
/// [`cholesky_in_place`].
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let data = &l.data;
    let mut x = b.to_vec();
    for i in 0..n {
        let mut acc = x[i];
        for j in 0..i {
            acc -= data[i * n + j] * x[j];
        }
        x[i] = acc / data[i * n + i];
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in (i + 1)..n {
            acc -= data[j * n + i] * x[j];
        }
        x[i] = acc / data[i * n + i];
    }
    x
}

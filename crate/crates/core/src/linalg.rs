//! Dense matrix primitives: residual makers, Cholesky solves and the block
//! embedding used by the split-based statistics.
//!
//! [`Matrix`] is stored column-major. All operations here are pure and the
//! types are `Send + Sync`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Relative Cholesky pivot threshold (against the largest Gram diagonal)
/// below which a Gram matrix is reported as singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-12;

/// Dense real matrix in column-major order.
#[derive(Debug, Clone, PartialEq)]
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
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from column-major data, rejecting non-finite entries.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix data length",
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos % rows.max(1),
                col: pos / rows.max(1),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix data length",
                expected: rows * cols,
                found: data.len(),
            });
        }
        let mut out = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                out.push(data[i * cols + j]);
            }
        }
        Matrix::from_col_major(rows, cols, out)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Column-major backing storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    /// Sub-matrix with the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &j in cols {
            let col = self.column(j);
            data.extend(rows.iter().map(|&i| col[i]));
        }
        Matrix {
            rows: rows.len(),
            cols: cols.len(),
            data,
        }
    }

    /// Copy of the matrix without column `j`.
    pub fn without_column(&self, j: usize) -> Matrix {
        let cols: Vec<usize> = (0..self.cols).filter(|&c| c != j).collect();
        let rows: Vec<usize> = (0..self.rows).collect();
        self.select(&rows, &cols)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, &w) in other.column(j).iter().enumerate() {
                if w != 0.0 {
                    axpy(w, self.column(k), dst);
                }
            }
        }
        out
    }

    /// `self * v`.
    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mat_vec dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for (j, &w) in v.iter().enumerate() {
            if w != 0.0 {
                axpy(w, self.column(j), &mut out);
            }
        }
        out
    }

    /// `selfᵀ * v`.
    pub fn tr_mat_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "tr_mat_vec dimension mismatch");
        (0..self.cols).map(|j| dot(self.column(j), v)).collect()
    }

    /// `selfᵀ * self`.
    pub fn gram(&self) -> Matrix {
        let k = self.cols;
        let mut g = Matrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let v = dot(self.column(a), self.column(b));
                g.set(a, b, v);
                g.set(b, a, v);
            }
        }
        g
    }

    /// In-place `self += other`.
    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factors `g`, failing with [`Error::SingularGram`] when a pivot drops
    /// below [`SINGULAR_PIVOT_TOL`] times the largest diagonal entry.
    pub fn new(g: &Matrix) -> Result<Self> {
        let k = g.rows();
        assert_eq!(k, g.cols(), "Cholesky of a non-square matrix");
        let max_diag = (0..k).map(|i| g.get(i, i)).fold(0.0, f64::max);
        let tol = SINGULAR_PIVOT_TOL * max_diag;
        let mut l = Matrix::zeros(k, k);
        for j in 0..k {
            let mut d = g.get(j, j);
            for p in 0..j {
                d -= l.get(j, p) * l.get(j, p);
            }
            if d.is_nan() || d <= tol {
                return Err(Error::SingularGram { column: j, pivot: d });
            }
            let d = libm::sqrt(d);
            l.set(j, j, d);
            for i in j + 1..k {
                let mut s = g.get(i, j);
                for p in 0..j {
                    s -= l.get(i, p) * l.get(j, p);
                }
                l.set(i, j, s / d);
            }
        }
        Ok(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `L x = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        let k = self.dim();
        for i in 0..k {
            let mut s = b[i];
            for p in 0..i {
                s -= self.l.get(i, p) * b[p];
            }
            b[i] = s / self.l.get(i, i);
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn backward(&self, b: &mut [f64]) {
        let k = self.dim();
        for i in (0..k).rev() {
            let mut s = b[i];
            for p in i + 1..k {
                s -= self.l.get(p, i) * b[p];
            }
            b[i] = s / self.l.get(i, i);
        }
    }

    /// Solves `G x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    /// Diagonal of `G⁻¹`.
    pub fn inverse_diag(&self) -> Vec<f64> {
        let k = self.dim();
        (0..k)
            .map(|i| {
                let mut e = vec![0.0; k];
                e[i] = 1.0;
                self.forward(&mut e);
                dot(&e, &e)
            })
            .collect()
    }
}

/// Residual maker `R = I − Z(ZᵀZ)⁻¹Zᵀ` of an `n × k` matrix.
///
/// An `n × 0` input yields the identity. The result is exactly symmetric.
pub fn residual_maker(z: &Matrix) -> Result<Matrix> {
    let n = z.rows();
    let k = z.cols();
    if k > n {
        return Err(Error::DimensionMismatch {
            what: "residual maker columns (at most rows)",
            expected: n,
            found: k,
        });
    }
    let mut r = Matrix::identity(n);
    if k == 0 {
        return Ok(r);
    }
    let chol = Cholesky::new(&z.gram())?;
    // W = L⁻¹Zᵀ, k × n, stored as n columns of length k.
    let mut w = Matrix::zeros(k, n);
    for i in 0..n {
        let col = w.column_mut(i);
        for (p, c) in col.iter_mut().enumerate() {
            *c = z.get(i, p);
        }
        chol.forward(col);
    }
    for a in 0..n {
        for b in a..n {
            let v = dot(w.column(a), w.column(b));
            let ab = r.get(a, b) - v;
            r.set(a, b, ab);
            r.set(b, a, ab);
        }
    }
    Ok(r)
}

/// Hat matrix `H = I − R`.
pub fn hat_matrix(z: &Matrix) -> Result<Matrix> {
    let r = residual_maker(z)?;
    let n = r.rows();
    Ok(Matrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 - r.get(i, j)
        } else {
            -r.get(i, j)
        }
    }))
}

/// Embeds `block` into a `full_size × full_size` zero matrix at the rows and
/// columns listed in `rows`.
pub fn embed_block(full_size: usize, rows: &[usize], block: &Matrix) -> Result<Matrix> {
    if block.rows() != rows.len() || block.cols() != rows.len() {
        return Err(Error::DimensionMismatch {
            what: "block size",
            expected: rows.len(),
            found: block.rows().max(block.cols()),
        });
    }
    check_index_set(rows, full_size)?;
    let mut out = Matrix::zeros(full_size, full_size);
    for (bj, &j) in rows.iter().enumerate() {
        for (bi, &i) in rows.iter().enumerate() {
            out.set(i, j, block.get(bi, bj));
        }
    }
    Ok(out)
}

/// Checks that `idx` holds distinct indices below `size`.
pub(crate) fn check_index_set(idx: &[usize], size: usize) -> Result<()> {
    let mut seen = vec![false; size];
    for &i in idx {
        if i >= size {
            return Err(Error::IndexOutOfRange { index: i, size });
        }
        if seen[i] {
            return Err(Error::DuplicateIndex(i));
        }
        seen[i] = true;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        // Small LCG, enough for fixed test inputs.
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        Matrix::from_fn(rows, cols, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    // Residuals of `v` regressed on the columns of `z`, via normal equations
    // solved by Gaussian elimination with partial pivoting.
    fn ols_residual(z: &Matrix, v: &[f64]) -> Vec<f64> {
        let k = z.cols();
        let mut a: Vec<Vec<f64>> = (0..k)
            .map(|p| {
                let mut row: Vec<f64> = (0..k).map(|q| dot(z.column(p), z.column(q))).collect();
                row.push(dot(z.column(p), v));
                row
            })
            .collect();
        for c in 0..k {
            let piv = (c..k)
                .max_by(|&x, &y| a[x][c].abs().partial_cmp(&a[y][c].abs()).unwrap())
                .unwrap();
            a.swap(c, piv);
            for r in 0..k {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for q in c..=k {
                        a[r][q] -= f * a[c][q];
                    }
                }
            }
        }
        let coef: Vec<f64> = (0..k).map(|c| a[c][k] / a[c][c]).collect();
        let fit = z.mat_vec(&coef);
        v.iter().zip(fit).map(|(a, b)| a - b).collect()
    }

    #[test]
    fn empty_design_gives_identity() {
        let z = Matrix::zeros(4, 0);
        assert_eq!(residual_maker(&z).unwrap(), Matrix::identity(4));
    }

    #[test]
    fn ones_column_gives_centering_matrix() {
        let z = Matrix::from_fn(4, 1, |_, _| 1.0);
        let r = residual_maker(&z).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 0.75 } else { -0.25 };
                assert!((r.get(i, j) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn full_rank_matches_least_squares_residuals() {
        let z = sample_matrix(5, 2, 7);
        let r = residual_maker(&z).unwrap();
        for c in 0..5 {
            let mut e = vec![0.0; 5];
            e[c] = 1.0;
            let expected = ols_residual(&z, &e);
            for i in 0..5 {
                assert!((r.get(i, c) - expected[i]).abs() < 1e-10);
            }
        }
        let rz = r.matmul(&z);
        assert!(rz.max_abs() < 1e-8 * z.norm());
        let rr = r.matmul(&r);
        for i in 0..5 {
            for j in 0..5 {
                assert!((rr.get(i, j) - r.get(i, j)).abs() < 1e-8 * r.norm());
            }
        }
    }

    #[test]
    fn collinear_columns_are_singular() {
        let z = Matrix::from_fn(6, 2, |i, j| (i + 1) as f64 * (j + 1) as f64);
        assert!(matches!(residual_maker(&z), Err(Error::SingularGram { column: 1, .. })));
        let zero = Matrix::zeros(6, 1);
        assert!(matches!(residual_maker(&zero), Err(Error::SingularGram { .. })));
    }

    #[test]
    fn too_many_columns_is_rejected() {
        let z = sample_matrix(2, 3, 1);
        assert!(matches!(residual_maker(&z), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn embed_single_entry() {
        let block = Matrix::from_fn(1, 1, |_, _| 5.0);
        let e = embed_block(3, &[1], &block).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if (i, j) == (1, 1) { 5.0 } else { 0.0 };
                assert_eq!(e.get(i, j), expected);
            }
        }
    }

    #[test]
    fn embed_full_index_set_is_identity_map() {
        let m = sample_matrix(3, 3, 3);
        assert_eq!(embed_block(3, &[0, 1, 2], &m).unwrap(), m);
    }

    #[test]
    fn embed_matches_naive_scatter() {
        let block = sample_matrix(2, 2, 11);
        let rows = [0usize, 2];
        let e = embed_block(4, &rows, &block).unwrap();
        let mut naive = [[0.0f64; 4]; 4];
        for a in 0..2 {
            for b in 0..2 {
                naive[rows[a]][rows[b]] = block.get(a, b);
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(e.get(i, j), naive[i][j]);
            }
        }
    }

    #[test]
    fn embed_rejects_bad_indices() {
        let block = Matrix::identity(2);
        assert_eq!(
            embed_block(3, &[0, 3], &block),
            Err(Error::IndexOutOfRange { index: 3, size: 3 })
        );
        assert_eq!(embed_block(3, &[1, 1], &block), Err(Error::DuplicateIndex(1)));
    }

    #[test]
    fn cholesky_solve_and_inverse_diag() {
        let z = sample_matrix(8, 3, 5);
        let g = z.gram();
        let chol = Cholesky::new(&g).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = chol.solve(&b);
        let gx = g.mat_vec(&x);
        for i in 0..3 {
            assert!((gx[i] - b[i]).abs() < 1e-10);
        }
        let d = chol.inverse_diag();
        for i in 0..3 {
            let mut e = [0.0; 3];
            e[i] = 1.0;
            assert!((chol.solve(&e)[i] - d[i]).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn residual_maker_is_a_projection(n in 3usize..12, seed in any::<u64>(), kfrac in 0.0f64..1.0) {
            let k = ((n - 1) as f64 * kfrac) as usize;
            let z = sample_matrix(n, k, seed);
            let r = residual_maker(&z).unwrap();
            let rn = r.norm();
            prop_assert!(r.matmul(&r).as_slice().iter().zip(r.as_slice()).all(|(a, b)| (a - b).abs() <= 1e-8 * rn));
            prop_assert!(r.transpose().as_slice().iter().zip(r.as_slice()).all(|(a, b)| (a - b).abs() <= 1e-10 * rn));
            if k > 0 {
                prop_assert!(r.matmul(&z).max_abs() <= 1e-8 * z.norm());
            }
            let v = sample_matrix(n, 1, seed ^ 0x5555);
            let quad = dot(v.column(0), &r.mat_vec(v.column(0)));
            prop_assert!(quad >= -1e-10 * dot(v.column(0), v.column(0)));
            let h = hat_matrix(&z).unwrap();
            for i in 0..n {
                prop_assert!(h.get(i, i) >= -1e-12 && h.get(i, i) <= 1.0 + 1e-12);
            }
        }
    }
}

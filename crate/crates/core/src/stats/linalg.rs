//! Minimal dense linear algebra for the regression fits. Matrices here are
//! small (a few dozen columns), so Gauss-Jordan with partial pivoting is
//! plenty.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub nrows: usize,
    pub ncols: usize,
    data: Vec<f64>,
}

/// A pivot collapsed during elimination; the index identifies the offending
/// column so callers can name it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularAt(pub usize);

impl Mat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Mat { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            assert_eq!(row.len(), ncols, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { nrows, ncols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.ncols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.ncols + c] = v;
    }

    /// self' * diag(w) * self, for per-row weights.
    pub fn xtwx(&self, weights: &[f64]) -> Mat {
        assert_eq!(weights.len(), self.nrows);
        let p = self.ncols;
        let mut out = Mat::zeros(p, p);
        for (r, &w) in weights.iter().enumerate() {
            let row = &self.data[r * p..(r + 1) * p];
            for i in 0..p {
                let wi = w * row[i];
                for j in i..p {
                    let v = out.get(i, j) + wi * row[j];
                    out.set(i, j, v);
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                out.set(i, j, out.get(j, i));
            }
        }
        out
    }

    /// self' * v, weighting each row of self by the matching entry of v.
    pub fn xtv(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.nrows);
        let p = self.ncols;
        let mut out = vec![0.0; p];
        for (r, &vr) in v.iter().enumerate() {
            let row = &self.data[r * p..(r + 1) * p];
            for (o, &x) in out.iter_mut().zip(row) {
                *o += x * vr;
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mv(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let row = &self.data[r * self.ncols..(r + 1) * self.ncols];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Inverse via Gauss-Jordan with partial pivoting.
    pub fn inverse(&self) -> Result<Mat, SingularAt> {
        assert_eq!(self.nrows, self.ncols, "inverse of a non-square matrix");
        let n = self.nrows;
        let mut a = self.clone();
        let mut inv = Mat::zeros(n, n);
        for i in 0..n {
            inv.set(i, i, 1.0);
        }
        let scale = self.data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * scale;
        for col in 0..n {
            // Partial pivot.
            let mut pivot_row = col;
            let mut pivot_val = a.get(col, col).abs();
            for r in (col + 1)..n {
                let v = a.get(r, col).abs();
                if v > pivot_val {
                    pivot_row = r;
                    pivot_val = v;
                }
            }
            if pivot_val <= tol {
                return Err(SingularAt(col));
            }
            if pivot_row != col {
                for c in 0..n {
                    let tmp = a.get(col, c);
                    a.set(col, c, a.get(pivot_row, c));
                    a.set(pivot_row, c, tmp);
                    let tmp = inv.get(col, c);
                    inv.set(col, c, inv.get(pivot_row, c));
                    inv.set(pivot_row, c, tmp);
                }
            }
            let pivot = a.get(col, col);
            for c in 0..n {
                a.set(col, c, a.get(col, c) / pivot);
                inv.set(col, c, inv.get(col, c) / pivot);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a.get(r, col);
                if factor == 0.0 {
                    continue;
                }
                for c in 0..n {
                    a.set(r, c, a.get(r, c) - factor * a.get(col, c));
                    inv.set(r, c, inv.get(r, c) - factor * inv.get(col, c));
                }
            }
        }
        Ok(inv)
    }

    /// Solve self * x = b.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SingularAt> {
        Ok(self.inverse()?.mv(b))
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_known_matrix() {
        let a = Mat::from_rows(&[vec![4.0, 7.0], vec![2.0, 6.0]]);
        let inv = a.inverse().unwrap();
        let expected = [[0.6, -0.7], [-0.2, 0.4]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((inv.get(i, j) - expected[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_reports_column() {
        let a = Mat::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![1.0, 0.0, 1.0],
        ]);
        // Row 2 is a multiple of row 1; elimination collapses at some pivot.
        assert!(a.inverse().is_err());
    }

    #[test]
    fn solve_matches_manual() {
        let a = Mat::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]);
        let x = a.solve(&[9.0, 8.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn xtwx_and_xtv() {
        let x = Mat::from_rows(&[vec![1.0, 2.0], vec![1.0, -1.0], vec![1.0, 0.5]]);
        let w = vec![1.0, 2.0, 4.0];
        let xtwx = x.xtwx(&w);
        // Manual: sum w_i * x_i x_i'.
        assert!((xtwx.get(0, 0) - 7.0).abs() < 1e-12);
        assert!((xtwx.get(0, 1) - (2.0 - 2.0 + 2.0)).abs() < 1e-12);
        assert!((xtwx.get(1, 1) - (4.0 + 2.0 + 1.0)).abs() < 1e-12);
        let xtv = x.xtv(&[1.0, 1.0, 1.0]);
        assert!((xtv[0] - 3.0).abs() < 1e-12);
        assert!((xtv[1] - 1.5).abs() < 1e-12);
    }
}

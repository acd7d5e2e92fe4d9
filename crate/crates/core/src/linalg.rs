//! Dense matrices and the least-squares solver used by the spline fitter.
//!
//! The solver is a column-pivoted Householder QR. Pivoting always selects the
//! remaining column with the largest residual norm, so when the design is
//! rank-deficient the dependent columns are exactly the smallest-pivot ones;
//! they are dropped (coefficient zero) and reported instead of failing.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
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

    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "flat data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Shape("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {} has length {}, expected {}",
                    i,
                    r.len(),
                    cols
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
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

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    /// `out = self * x`.
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *o = acc;
        }
    }

    /// `out += self^T * x`.
    pub fn mul_t_vec_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            let row = self.row(i);
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * xi;
            }
        }
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.iter_rows().map(|r| r.to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = String;

    fn try_from(rows: Vec<Vec<f64>>) -> std::result::Result<Self, String> {
        Matrix::from_rows(&rows).map_err(|e| e.to_string())
    }
}

/// Result of a least-squares solve.
#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquaresFit {
    /// One coefficient per design column, in the original column order.
    /// Dropped columns get coefficient zero.
    pub coefficients: Vec<f64>,
    /// Mean squared residual, `sum((y - X beta)^2) / n`.
    pub mse: f64,
    /// Original indices of columns dropped as linearly dependent, ascending.
    pub dropped: Vec<usize>,
}

/// Minimizes `sum((y - X beta)^2) / n` for a design matrix that already
/// contains whatever intercept column the caller wants.
///
/// Collinear designs never fail: dependent columns (smallest pivots first)
/// are dropped deterministically and reported in `dropped`.
pub fn least_squares_fit(design: &Matrix, target: &[f64]) -> Result<LeastSquaresFit> {
    if design.rows() != target.len() {
        return Err(Error::Shape(format!(
            "design has {} rows but target has {} entries",
            design.rows(),
            target.len()
        )));
    }
    if design.rows() == 0 || design.cols() == 0 {
        return Err(Error::Shape("design matrix must be non-empty".into()));
    }
    if design.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix entry".into()));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target entry".into()));
    }

    let n = design.rows();
    let p = design.cols();
    let mut ws = LstsqWorkspace::new();
    ws.reset(n, p);
    for j in 0..p {
        let col = ws.column_mut(j);
        for (i, c) in col.iter_mut().enumerate() {
            *c = design.get(i, j);
        }
    }
    ws.target_mut().copy_from_slice(target);
    let out = ws.solve();
    Ok(LeastSquaresFit {
        coefficients: ws.coefficients().to_vec(),
        mse: out.mse,
        dropped: ws.dropped().to_vec(),
    })
}

pub(crate) struct LstsqOutput {
    pub mse: f64,
    pub rank: usize,
}

/// Reusable buffers for repeated least-squares solves of varying size.
///
/// Callers fill the column-major design via [`column_mut`](Self::column_mut)
/// and the target via [`target_mut`](Self::target_mut) after
/// [`reset`](Self::reset), then call [`solve`](Self::solve).
pub(crate) struct LstsqWorkspace {
    n: usize,
    p: usize,
    a: Vec<f64>,      // col-major working copy, clobbered by solve
    a0: Vec<f64>,     // pristine design for the residual pass
    y: Vec<f64>,      // transformed target
    y0: Vec<f64>,     // pristine target
    norms2: Vec<f64>, // downdated squared column norms
    ref2: Vec<f64>,   // squared norms at last exact recompute
    perm: Vec<usize>,
    coef: Vec<f64>,
    z: Vec<f64>,
    dropped: Vec<usize>,
}

impl LstsqWorkspace {
    pub fn new() -> Self {
        LstsqWorkspace {
            n: 0,
            p: 0,
            a: Vec::new(),
            a0: Vec::new(),
            y: Vec::new(),
            y0: Vec::new(),
            norms2: Vec::new(),
            ref2: Vec::new(),
            perm: Vec::new(),
            coef: Vec::new(),
            z: Vec::new(),
            dropped: Vec::new(),
        }
    }

    pub fn reset(&mut self, n: usize, p: usize) {
        self.n = n;
        self.p = p;
        self.a.clear();
        self.a.resize(n * p, 0.0);
        self.y.clear();
        self.y.resize(n, 0.0);
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        debug_assert!(j < self.p);
        &mut self.a[j * self.n..(j + 1) * self.n]
    }

    pub fn target_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    /// Solve the currently loaded system. Clobbers the loaded design/target.
    pub fn solve(&mut self) -> LstsqOutput {
        let n = self.n;
        let p = self.p;
        self.a0.clear();
        self.a0.extend_from_slice(&self.a);
        self.y0.clear();
        self.y0.extend_from_slice(&self.y);

        self.perm.clear();
        self.perm.extend(0..p);
        self.norms2.clear();
        self.ref2.clear();
        for j in 0..p {
            let s = norm2_sq(&self.a[j * n..j * n + n]);
            self.norms2.push(s);
            self.ref2.push(s);
        }
        let max_norm = self
            .norms2
            .iter()
            .fold(0.0_f64, |m, &v| m.max(v))
            .sqrt();
        let tol = f64::EPSILON * (n.max(p) as f64) * max_norm;

        let mut rank = 0;
        for k in 0..n.min(p) {
            // Largest remaining column norm; ties take the lowest index so the
            // outcome is independent of evaluation order.
            let mut jmax = k;
            for j in k + 1..p {
                if self.norms2[j] > self.norms2[jmax] {
                    jmax = j;
                }
            }
            if self.norms2[jmax].max(0.0).sqrt() <= tol {
                break;
            }
            if jmax != k {
                for i in 0..n {
                    self.a.swap(k * n + i, jmax * n + i);
                }
                self.perm.swap(k, jmax);
                self.norms2.swap(k, jmax);
                self.ref2.swap(k, jmax);
            }

            // Householder reflector for rows k.. of column k.
            let (alpha, vtv) = {
                let x = &mut self.a[k * n + k..k * n + n];
                let normx = norm2_sq(x).sqrt();
                let alpha = if x[0] >= 0.0 { -normx } else { normx };
                x[0] -= alpha;
                let vtv = norm2_sq(x);
                (alpha, vtv)
            };
            if vtv > 0.0 {
                let scale = 2.0 / vtv;
                // Apply to remaining columns and to the target.
                for j in k + 1..p {
                    let (va, ca) = split_cols(&mut self.a, n, k, j);
                    let v = &va[k..];
                    let c = &mut ca[k..];
                    let mut w = 0.0;
                    for (vi, ci) in v.iter().zip(c.iter()) {
                        w += vi * ci;
                    }
                    let w = w * scale;
                    for (vi, ci) in v.iter().zip(c.iter_mut()) {
                        *ci -= w * vi;
                    }
                    // Downdate the residual norm by the new R[k, j] entry.
                    let r = c[0];
                    let nn = self.norms2[j] - r * r;
                    if nn <= 1e-8 * self.ref2[j] {
                        let exact = norm2_sq(&ca[k + 1..]);
                        self.norms2[j] = exact;
                        self.ref2[j] = exact;
                    } else {
                        self.norms2[j] = nn;
                    }
                }
                {
                    let v = &self.a[k * n + k..k * n + n];
                    let yk = &mut self.y[k..n];
                    let mut w = 0.0;
                    for (vi, yi) in v.iter().zip(yk.iter()) {
                        w += vi * yi;
                    }
                    let w = w * scale;
                    for (vi, yi) in v.iter().zip(yk.iter_mut()) {
                        *yi -= w * vi;
                    }
                }
            }
            // Store the R diagonal; rows below the diagonal hold the
            // reflector, which back-substitution skips.
            self.a[k * n + k] = alpha;
            rank = k + 1;
        }

        // Back-substitution on the rank x rank leading block of R.
        self.z.clear();
        self.z.resize(rank, 0.0);
        for j in (0..rank).rev() {
            let mut acc = self.y[j];
            for l in j + 1..rank {
                acc -= self.a[l * n + j] * self.z[l];
            }
            self.z[j] = acc / self.a[j * n + j];
        }
        self.coef.clear();
        self.coef.resize(p, 0.0);
        for l in 0..rank {
            self.coef[self.perm[l]] = self.z[l];
        }
        self.dropped.clear();
        self.dropped.extend_from_slice(&self.perm[rank..]);
        self.dropped.sort_unstable();

        // Residual against the pristine system.
        let mut rss = 0.0;
        for i in 0..n {
            let mut pred = 0.0;
            for j in 0..p {
                let c = self.coef[j];
                if c != 0.0 {
                    pred += c * self.a0[j * n + i];
                }
            }
            let r = self.y0[i] - pred;
            rss += r * r;
        }
        LstsqOutput {
            mse: rss / n as f64,
            rank,
        }
    }
}

fn norm2_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Disjoint mutable views of columns `j1 < j2` in a col-major buffer.
fn split_cols(a: &mut [f64], n: usize, j1: usize, j2: usize) -> (&[f64], &mut [f64]) {
    debug_assert!(j1 < j2);
    let (left, right) = a.split_at_mut(j2 * n);
    (&left[j1 * n..j1 * n + n], &mut right[..n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: solve the normal equations (X^T X) b = X^T y by
    /// Gaussian elimination with partial pivoting.
    fn normal_equations(design: &Matrix, y: &[f64]) -> Vec<f64> {
        let p = design.cols();
        let n = design.rows();
        let mut g = vec![0.0; p * p];
        let mut b = vec![0.0; p];
        for i in 0..n {
            let row = design.row(i);
            for j in 0..p {
                b[j] += row[j] * y[i];
                for l in 0..p {
                    g[j * p + l] += row[j] * row[l];
                }
            }
        }
        // Gaussian elimination.
        let mut idx: Vec<usize> = (0..p).collect();
        for k in 0..p {
            let piv = (k..p)
                .max_by(|&a, &c| {
                    g[idx[a] * p + k]
                        .abs()
                        .partial_cmp(&g[idx[c] * p + k].abs())
                        .unwrap()
                })
                .unwrap();
            idx.swap(k, piv);
            let d = g[idx[k] * p + k];
            assert!(d.abs() > 1e-12, "oracle needs a full-rank system");
            for r in k + 1..p {
                let f = g[idx[r] * p + k] / d;
                for c in k..p {
                    g[idx[r] * p + c] -= f * g[idx[k] * p + c];
                }
                b[idx[r]] -= f * b[idx[k]];
            }
        }
        let mut x = vec![0.0; p];
        for k in (0..p).rev() {
            let mut acc = b[idx[k]];
            for c in k + 1..p {
                acc -= g[idx[k] * p + c] * x[c];
            }
            x[k] = acc / g[idx[k] * p + k];
        }
        x
    }

    #[test]
    fn intercept_only_fits_the_mean() {
        let design = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let fit = least_squares_fit(&design, &[2.0, 4.0, 6.0]).unwrap();
        assert!((fit.coefficients[0] - 4.0).abs() < 1e-14);
        assert!((fit.mse - 8.0 / 3.0).abs() < 1e-14);
        assert!(fit.dropped.is_empty());
    }

    #[test]
    fn exactly_determined_system_has_zero_residual() {
        let design = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 5.0]]).unwrap();
        let fit = least_squares_fit(&design, &[7.0, 18.0]).unwrap();
        assert!(fit.mse < 1e-20, "mse = {}", fit.mse);
        assert!(fit.dropped.is_empty());
    }

    #[test]
    fn random_system_matches_normal_equations_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let rows: Vec<Vec<f64>> = (0..50)
                .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let design = Matrix::from_rows(&rows).unwrap();
            let y: Vec<f64> = (0..50).map(|_| rng.random_range(-3.0..3.0)).collect();

            let fit = least_squares_fit(&design, &y).unwrap();
            let oracle = normal_equations(&design, &y);
            for (a, b) in fit.coefficients.iter().zip(&oracle) {
                let rel = (a - b).abs() / b.abs().max(1e-12);
                assert!(rel < 1e-8, "qr {} vs oracle {}", a, b);
            }
        }
    }

    #[test]
    fn duplicate_column_is_dropped_not_fatal() {
        // Column 2 duplicates column 1; the later one carries the smaller
        // pivot after the first is eliminated.
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                let x = i as f64;
                vec![1.0, x, x]
            })
            .collect();
        let design = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..6).map(|i| 2.0 * i as f64 + 1.0).collect();
        let fit = least_squares_fit(&design, &y).unwrap();
        assert_eq!(fit.dropped, vec![2]);
        assert!(fit.mse < 1e-20);
        assert_eq!(fit.coefficients[2], 0.0);
    }

    #[test]
    fn all_zero_column_is_dropped() {
        let design =
            Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let fit = least_squares_fit(&design, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(fit.dropped, vec![1]);
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-14);
        assert_eq!(fit.coefficients[1], 0.0);
    }

    #[test]
    fn residual_is_orthogonal_to_design_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let design = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fit = least_squares_fit(&design, &y).unwrap();

        for j in 0..design.cols() {
            let mut dot = 0.0;
            for i in 0..design.rows() {
                let mut pred = 0.0;
                for l in 0..design.cols() {
                    pred += design.get(i, l) * fit.coefficients[l];
                }
                dot += design.get(i, j) * (y[i] - pred);
            }
            assert!(dot.abs() < 1e-10, "column {} dot {}", j, dot);
        }
    }

    #[test]
    fn shape_and_finiteness_are_validated() {
        let design = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert!(least_squares_fit(&design, &[1.0]).is_err());
        let bad = Matrix::from_rows(&[vec![f64::NAN], vec![1.0]]).unwrap();
        assert!(least_squares_fit(&bad, &[1.0, 2.0]).is_err());
    }
}

//! Dense row-major matrices, Cholesky factorization and the matrix norms
//! used throughout the estimators.

use std::fmt;
use std::io::{Read, Write};
use std::ops::{Index, IndexMut};
use std::path::Path;

use crate::error::{Error, Result};

/// Relative pivot threshold below which a matrix is reported as not positive definite.
pub const PD_PIVOT_TOL: f64 = 1e-12;
/// Relative asymmetry accepted by [`cholesky`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Dense real matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting bad lengths and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: pos / cols, col: pos % cols });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {n_cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(n_rows, n_cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Column vector with the given entries.
    pub fn column(values: &[f64]) -> Self {
        Self { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
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

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col_vec(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch(format!(
                "shapes {:?} and {:?} differ",
                self.shape(),
                rhs.shape()
            )));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    /// Largest |a_ij - a_ji|; infinite for non-square input.
    pub fn max_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.is_square() && self.max_asymmetry() <= rel_tol * self.norm_max()
    }

    /// (A + Aᵀ) / 2.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square(), "symmetrize needs a square matrix");
        for i in 0..self.rows {
            for j in 0..i {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    pub fn norm_max(&self) -> f64 {
        norm_max(self)
    }

    pub fn norm_frobenius(&self) -> f64 {
        norm_frobenius(self)
    }

    pub fn norm_rowsum(&self) -> f64 {
        norm_rowsum(self)
    }

    /// Parses plain comma-separated rows without a header.
    pub fn read_csv<R: Read>(reader: R, label: &Path) -> Result<Matrix> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse { file: label.into(), detail: e.to_string() })?;
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            let row = rec
                .iter()
                .enumerate()
                .map(|(j, f)| {
                    f.parse::<f64>().map_err(|e| Error::Parse {
                        file: label.into(),
                        detail: format!("row {}, column {}: {f:?}: {e}", i + 1, j + 1),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::ShapeMismatch {
                        file: label.into(),
                        detail: format!(
                            "row {} has {} columns, expected {}",
                            i + 1,
                            row.len(),
                            first.len()
                        ),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::ShapeMismatch { file: label.into(), detail: "no data rows".into() });
        }
        Matrix::from_rows(&rows).map_err(|e| match e {
            Error::NonFinite { row, col } => Error::Parse {
                file: label.into(),
                detail: format!("non-finite value at row {}, column {}", row + 1, col + 1),
            },
            other => other,
        })
    }

    pub fn read_csv_file(path: &Path) -> Result<Matrix> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Matrix::read_csv(std::fs::File::open(path)?, path)
    }

    /// Writes one comma-separated line per row using round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.rows {
            let line = self.row(i).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for v in self.row(i) {
                write!(f, "{v:>11.5} ")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Element-wise maximum norm max |a_ij|.
pub fn norm_max(a: &Matrix) -> f64 {
    a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn norm_frobenius(a: &Matrix) -> f64 {
    a.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Maximum absolute row sum.
pub fn norm_rowsum(a: &Matrix) -> f64 {
    (0..a.rows)
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
}

/// Lower-triangular Cholesky factor L with A = L·Lᵀ.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    lower: Matrix,
}

impl CholeskyFactor {
    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn size(&self) -> usize {
        self.lower.rows
    }

    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.size();
        if b.rows != n {
            return Err(Error::DimensionMismatch(format!(
                "factor has size {n}, right-hand side has {} rows",
                b.rows
            )));
        }
        let mut x = b.clone();
        let mut col = vec![0.0; n];
        for j in 0..b.cols {
            for (i, c) in col.iter_mut().enumerate() {
                *c = b[(i, j)];
            }
            self.solve_in_place(&mut col);
            for (i, c) in col.iter().enumerate() {
                x[(i, j)] = *c;
            }
        }
        Ok(x)
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.size() {
            return Err(Error::DimensionMismatch(format!(
                "factor has size {}, right-hand side has length {}",
                self.size(),
                b.len()
            )));
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let l = &self.lower;
        let n = self.size();
        for i in 0..n {
            let s = x[i] - dot(&l.row(i)[..i], &x[..i]);
            x[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= l[(k, i)] * x[k];
            }
            x[i] = s / l[(i, i)];
        }
    }

    /// A⁻¹ = L⁻ᵀL⁻¹, symmetrized.
    pub fn inverse(&self) -> Matrix {
        let n = self.size();
        let l = &self.lower;
        // rows of `linv` hold L⁻¹
        let mut linv = Matrix::zeros(n, n);
        for j in 0..n {
            linv[(j, j)] = 1.0 / l[(j, j)];
            for i in j + 1..n {
                let mut s = 0.0;
                for k in j..i {
                    s += l[(i, k)] * linv[(k, j)];
                }
                linv[(i, j)] = -s / l[(i, i)];
            }
        }
        let mut inv = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for k in i..n {
                    s += linv[(k, i)] * linv[(k, j)];
                }
                inv[(i, j)] = s;
                inv[(j, i)] = s;
            }
        }
        inv
    }

    /// Diagonal of A⁻¹ without forming the full inverse.
    pub fn inverse_diag(&self) -> Vec<f64> {
        let n = self.size();
        let mut out = vec![0.0; n];
        let mut e = vec![0.0; n];
        for (j, o) in out.iter_mut().enumerate() {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            // forward solve L y = e_j; then A⁻¹_jj = ‖y‖²
            for i in j..n {
                let s = e[i] - dot(&self.lower.row(i)[j..i], &e[j..i]);
                e[i] = s / self.lower[(i, i)];
            }
            *o = e[j..].iter().map(|v| v * v).sum();
        }
        out
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diag().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Cholesky factorization with the default pivot threshold.
pub fn cholesky(a: &Matrix) -> Result<CholeskyFactor> {
    cholesky_with_threshold(a, PD_PIVOT_TOL)
}

/// Cholesky factorization rejecting any pivot ≤ `rel_pivot` × max diagonal.
pub fn cholesky_with_threshold(a: &Matrix, rel_pivot: f64) -> Result<CholeskyFactor> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let asym = a.max_asymmetry();
    if asym > SYMMETRY_TOL * a.norm_max() {
        return Err(Error::NotSymmetric { max_asymmetry: asym });
    }
    let n = a.rows;
    let max_diag = a.diag().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max_diag <= 0.0 {
        return Err(Error::NotPositiveDefinite { index: 0, pivot: max_diag });
    }
    let threshold = rel_pivot * max_diag;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let pivot = a[(j, j)] - l.row(j)[..j].iter().map(|v| v * v).sum::<f64>();
        if pivot <= threshold || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
            l[(i, j)] = s / d;
        }
    }
    Ok(CholeskyFactor { lower: l })
}

pub fn solve(chol: &CholeskyFactor, b: &Matrix) -> Result<Matrix> {
    chol.solve(b)
}

pub fn inverse(chol: &CholeskyFactor) -> Matrix {
    chol.inverse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn assert_close(a: &Matrix, b: &Matrix, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        let d = a.sub(b).unwrap().norm_max();
        assert!(d <= tol, "difference {d:e} > {tol:e}\n{a:?}\n{b:?}");
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(Matrix::new(2, 2, vec![1.0; 3]), Err(Error::DimensionMismatch(_))));
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn cholesky_examples() {
        let c = cholesky(&Matrix::identity(3)).unwrap();
        assert_close(c.lower(), &Matrix::identity(3), 0.0);

        let c = cholesky(&m(&[&[4.0, 2.0], &[2.0, 3.0]])).unwrap();
        assert_close(c.lower(), &m(&[&[2.0, 0.0], &[1.0, 2f64.sqrt()]]), 1e-15);

        assert!(matches!(
            cholesky(&m(&[&[1.0, 2.0], &[2.0, 1.0]])),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(matches!(
            cholesky(&m(&[&[1.0, 0.5], &[0.4, 1.0]])),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(matches!(cholesky(&Matrix::zeros(2, 2)), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn solve_examples() {
        let c = cholesky(&Matrix::identity(2)).unwrap();
        let x = solve(&c, &Matrix::column(&[3.0, 4.0])).unwrap();
        assert_close(&x, &Matrix::column(&[3.0, 4.0]), 0.0);

        let c = cholesky(&m(&[&[4.0, 2.0], &[2.0, 3.0]])).unwrap();
        let x = solve(&c, &Matrix::column(&[6.0, 5.0])).unwrap();
        assert_close(&x, &Matrix::column(&[1.0, 1.0]), 1e-14);

        assert!(matches!(
            solve(&c, &Matrix::column(&[1.0, 2.0, 3.0])),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn inverse_examples() {
        let inv = inverse(&cholesky(&Matrix::identity(4)).unwrap());
        assert_close(&inv, &Matrix::identity(4), 0.0);

        let inv = inverse(&cholesky(&Matrix::from_diag(&[2.0, 4.0])).unwrap());
        assert_close(&inv, &Matrix::from_diag(&[0.5, 0.25]), 1e-15);

        let inv = inverse(&cholesky(&m(&[&[4.0, 2.0], &[2.0, 3.0]])).unwrap());
        let expected = m(&[&[3.0, -2.0], &[-2.0, 4.0]]).scaled(1.0 / 8.0);
        assert_close(&inv, &expected, 1e-15);
        assert_eq!(inv.max_asymmetry(), 0.0);

        let c = cholesky(&m(&[&[4.0, 2.0], &[2.0, 3.0]])).unwrap();
        let d = c.inverse_diag();
        assert!((d[0] - 3.0 / 8.0).abs() < 1e-15 && (d[1] - 0.5).abs() < 1e-15);
        assert!((c.log_det() - 8f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm_max(&m(&[&[1.0, -3.0], &[2.0, 0.0]])), 3.0);
        assert_eq!(norm_max(&Matrix::zeros(2, 3)), 0.0);
        assert_eq!(norm_max(&m(&[&[0.25, -0.6]])), 0.6);

        assert_eq!(norm_frobenius(&m(&[&[3.0, 4.0]])), 5.0);
        assert_eq!(norm_frobenius(&Matrix::identity(4)), 2.0);
        assert_eq!(norm_frobenius(&Matrix::zeros(3, 3)), 0.0);

        assert_eq!(norm_rowsum(&m(&[&[1.0, -2.0], &[0.0, 1.0]])), 3.0);
        assert_eq!(norm_rowsum(&Matrix::identity(5)), 1.0);
        assert!((norm_rowsum(&m(&[&[0.6, 1.0, 0.6]])) - 2.2).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let a = m(&[&[0.1, -1.0 / 3.0], &[1e-300, 12345.678]]);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let b = Matrix::read_csv(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(a, b);

        let ragged = "1,2\n3\n";
        assert!(matches!(
            Matrix::read_csv(ragged.as_bytes(), Path::new("r.csv")),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            Matrix::read_csv("1,x\n".as_bytes(), Path::new("p.csv")),
            Err(Error::Parse { .. })
        ));
    }

    fn random_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-5.0f64..5.0, rows * cols)
            .prop_map(move |d| Matrix::new(rows, cols, d).unwrap())
    }

    fn random_spd(n: usize) -> impl Strategy<Value = Matrix> {
        random_matrix(n, n).prop_map(move |b| {
            let bt = b.transpose();
            b.matmul(&bt).unwrap().add(&Matrix::identity(n)).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn inverse_reproduces_identity(a in (1usize..=50).prop_flat_map(random_spd)) {
            let chol = cholesky(&a).unwrap();
            let l = chol.lower();
            let recon = l.matmul(&l.transpose()).unwrap();
            let rel = recon.sub(&a).unwrap().norm_max() / a.norm_max();
            prop_assert!(rel <= 1e-10);
            let prod = a.matmul(&inverse(&chol)).unwrap();
            let err = prod.sub(&Matrix::identity(a.rows())).unwrap().norm_max();
            prop_assert!(err <= 1e-8, "err {}", err);
        }

        #[test]
        fn solve_residual_is_small(a in (1usize..=20).prop_flat_map(random_spd), seed in 0u64..1000) {
            let n = a.rows();
            let b = Matrix::from_fn(n, 2, |i, j| ((i * 7 + j * 3 + seed as usize) % 11) as f64 - 5.0);
            let x = solve(&cholesky(&a).unwrap(), &b).unwrap();
            let r = a.matmul(&x).unwrap().sub(&b).unwrap().norm_max();
            prop_assert!(r <= 1e-8 * (1.0 + b.norm_max()));
        }

        #[test]
        fn max_norm_bounded_by_rowsum(a in (1usize..8, 1usize..8).prop_flat_map(|(r, c)| random_matrix(r, c))) {
            prop_assert!(norm_max(&a) <= norm_rowsum(&a));
        }

        #[test]
        fn norms_are_absolutely_homogeneous(
            a in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| random_matrix(r, c)),
            c in -10.0f64..10.0,
        ) {
            let ca = a.scaled(c);
            for (f, name) in [(norm_max as fn(&Matrix) -> f64, "max"), (norm_frobenius, "fro"), (norm_rowsum, "rowsum")] {
                let lhs = f(&ca);
                let rhs = c.abs() * f(&a);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs), "{} {} {}", name, lhs, rhs);
            }
        }
    }
}

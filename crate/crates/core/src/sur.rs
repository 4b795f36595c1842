//! Seemingly unrelated regression systems and the OLS, GLS, FGLS and
//! FGLasso estimators of the stacked coefficient vector.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glasso::{glasso_solve, GlassoConfig, GlassoResult};
use crate::linalg::{cholesky, cholesky_with_threshold, Matrix};

/// Relative Gram pivot below which an equation's regressors count as rank deficient.
pub const GRAM_RANK_TOL: f64 = 1e-10;

/// N equations observed over T periods with K regressors each.
#[derive(Clone, Debug, PartialEq)]
pub struct SurDataset {
    x_blocks: Vec<Matrix>,
    y: Matrix,
}

impl SurDataset {
    /// `x_blocks[i]` is the T×K design of equation i; `y` is N×T.
    pub fn new(x_blocks: Vec<Matrix>, y: Matrix) -> Result<Self> {
        let n = y.rows();
        let t = y.cols();
        if x_blocks.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "y has {n} equations but {} regressor blocks were given",
                x_blocks.len()
            )));
        }
        let k = x_blocks[0].cols();
        for (i, x) in x_blocks.iter().enumerate() {
            if x.shape() != (t, k) {
                return Err(Error::DimensionMismatch(format!(
                    "regressor block {i} is {:?}, expected ({t}, {k})",
                    x.shape()
                )));
            }
        }
        Ok(Self { x_blocks, y })
    }

    pub fn n_equations(&self) -> usize {
        self.y.rows()
    }

    pub fn n_periods(&self) -> usize {
        self.y.cols()
    }

    pub fn k_per_equation(&self) -> usize {
        self.x_blocks[0].cols()
    }

    pub fn x_block(&self, i: usize) -> &Matrix {
        &self.x_blocks[i]
    }

    pub fn x_blocks(&self) -> &[Matrix] {
        &self.x_blocks
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    /// Sub-dataset keeping the given periods in the given order.
    pub fn select_periods(&self, periods: &[usize]) -> Result<SurDataset> {
        let t = self.n_periods();
        if periods.is_empty() || periods.iter().any(|&p| p >= t) {
            return Err(Error::InvalidArgument(format!("period selection out of range 0..{t}")));
        }
        let k = self.k_per_equation();
        let x_blocks = self
            .x_blocks
            .iter()
            .map(|x| Matrix::from_fn(periods.len(), k, |r, c| x[(periods[r], c)]))
            .collect();
        let y = Matrix::from_fn(self.n_equations(), periods.len(), |i, r| self.y[(i, periods[r])]);
        SurDataset::new(x_blocks, y)
    }

    /// Fails with the first equation whose regressors are rank deficient.
    pub fn check_rank(&self) -> Result<()> {
        for (i, x) in self.x_blocks.iter().enumerate() {
            let gram = x.transpose().matmul(x)?;
            cholesky_with_threshold(&gram, GRAM_RANK_TOL)
                .map_err(|_| Error::RankDeficientRegressors { equation: i })?;
        }
        Ok(())
    }

    /// Fitted residuals Y_it − β_iᵀX_it for a stacked coefficient vector.
    pub fn residuals(&self, beta: &[f64]) -> Matrix {
        let (n, t, k) = (self.n_equations(), self.n_periods(), self.k_per_equation());
        assert_eq!(beta.len(), n * k, "beta has the wrong length");
        let mut u = self.y.clone();
        for i in 0..n {
            let b = &beta[i * k..(i + 1) * k];
            let x = &self.x_blocks[i];
            for s in 0..t {
                let fitted: f64 = x.row(s).iter().zip(b).map(|(a, c)| a * c).sum();
                u[(i, s)] -= fitted;
            }
        }
        u
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Ols,
    Gls,
    Fgls,
    Fglasso,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Estimator::Ols, Estimator::Gls, Estimator::Fgls, Estimator::Fglasso];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::Ols => "OLS",
            Estimator::Gls => "GLS",
            Estimator::Fgls => "FGLS",
            Estimator::Fglasso => "FGLasso",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Estimator::Ols => "ols",
            Estimator::Gls => "gls",
            Estimator::Fgls => "fgls",
            Estimator::Fglasso => "fglasso",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(Estimator::Ols),
            "gls" => Ok(Estimator::Gls),
            "fgls" => Ok(Estimator::Fgls),
            "fglasso" => Ok(Estimator::Fglasso),
            other => Err(Error::InvalidArgument(format!(
                "unknown estimator {other:?} (expected ols, gls, fgls or fglasso)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub lambda: f64,
    pub sweeps_used: usize,
    pub converged: bool,
    pub objective: f64,
}

impl From<&GlassoResult> for SolverMeta {
    fn from(r: &GlassoResult) -> Self {
        Self { lambda: r.lambda, sweeps_used: r.sweeps_used, converged: r.converged, objective: r.objective }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub estimator: Estimator,
    /// Stacked (β₁', …, β_N')'.
    pub beta_hat: Vec<f64>,
    /// N×T residual matrix.
    pub residuals: Matrix,
    pub k_per_equation: usize,
    pub omega_used: Option<Matrix>,
    pub solver_meta: Option<SolverMeta>,
}

impl FitResult {
    pub fn beta_block(&self, i: usize) -> &[f64] {
        let k = self.k_per_equation;
        &self.beta_hat[i * k..(i + 1) * k]
    }
}

/// Cross moments X_iᵀX_j and X_iᵀY_j for all equation pairs.
#[derive(Clone, Debug)]
pub struct SurMoments {
    n: usize,
    k: usize,
    gram: Vec<f64>,
    cross: Vec<f64>,
}

impl SurMoments {
    pub fn new(data: &SurDataset) -> Self {
        let (n, t, k) = (data.n_equations(), data.n_periods(), data.k_per_equation());
        let mut gram = vec![0.0; n * n * k * k];
        let mut cross = vec![0.0; n * n * k];
        // column-major copies of each X_i so the inner loops run over contiguous periods
        let xcols: Vec<Vec<f64>> = data
            .x_blocks()
            .iter()
            .map(|x| (0..k).flat_map(|a| (0..t).map(move |s| x[(s, a)])).collect())
            .collect();
        let col = |i: usize, a: usize| &xcols[i][a * t..(a + 1) * t];
        for i in 0..n {
            for j in i..n {
                for a in 0..k {
                    for b in 0..k {
                        let v = crate::linalg::dot(col(i, a), col(j, b));
                        gram[((i * n + j) * k + a) * k + b] = v;
                        gram[((j * n + i) * k + b) * k + a] = v;
                    }
                }
            }
            for j in 0..n {
                for a in 0..k {
                    cross[(i * n + j) * k + a] = crate::linalg::dot(col(i, a), data.y().row(j));
                }
            }
        }
        Self { n, k, gram, cross }
    }

    #[inline]
    fn gram(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.gram[((i * self.n + j) * self.k + a) * self.k + b]
    }

    #[inline]
    fn cross(&self, i: usize, j: usize, a: usize) -> f64 {
        self.cross[(i * self.n + j) * self.k + a]
    }

    /// Σ_t X_tΩX_t' assembled blockwise as Ω_ij·X_iᵀX_j.
    pub fn normal_matrix(&self, omega: &Matrix) -> Matrix {
        let (n, k) = (self.n, self.k);
        let mut a = Matrix::zeros(n * k, n * k);
        for i in 0..n {
            for j in 0..=i {
                let w = omega[(i, j)];
                for p in 0..k {
                    for q in 0..k {
                        let v = w * self.gram(i, j, p, q);
                        a[(i * k + p, j * k + q)] = v;
                        a[(j * k + q, i * k + p)] = v;
                    }
                }
            }
        }
        a
    }

    /// Σ_t X_tΩY_t with block i equal to Σ_j Ω_ij·X_iᵀY_j.
    pub fn normal_rhs(&self, omega: &Matrix) -> Vec<f64> {
        let (n, k) = (self.n, self.k);
        let mut rhs = vec![0.0; n * k];
        for i in 0..n {
            for j in 0..n {
                let w = omega[(i, j)];
                if w != 0.0 {
                    for a in 0..k {
                        rhs[i * k + a] += w * self.cross(i, j, a);
                    }
                }
            }
        }
        rhs
    }
}

fn check_omega(data: &SurDataset, omega: &Matrix) -> Result<()> {
    let n = data.n_equations();
    if omega.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "omega is {:?}, system has {n} equations",
            omega.shape()
        )));
    }
    let asym = omega.max_asymmetry();
    if asym > 1e-10 * omega.norm_max() {
        return Err(Error::NotSymmetric { max_asymmetry: asym });
    }
    Ok(())
}

/// Equation-by-equation least squares.
pub fn fit_ols(data: &SurDataset) -> Result<FitResult> {
    let (n, k) = (data.n_equations(), data.k_per_equation());
    let mut beta = Vec::with_capacity(n * k);
    for i in 0..n {
        let x = data.x_block(i);
        let xt = x.transpose();
        let gram = xt.matmul(x)?;
        let chol = cholesky_with_threshold(&gram, GRAM_RANK_TOL)
            .map_err(|_| Error::RankDeficientRegressors { equation: i })?;
        let xty = xt.mul_vec(data.y().row(i))?;
        beta.extend(chol.solve_vec(&xty)?);
    }
    let residuals = data.residuals(&beta);
    Ok(FitResult {
        estimator: Estimator::Ols,
        beta_hat: beta,
        residuals,
        k_per_equation: k,
        omega_used: None,
        solver_meta: None,
    })
}

/// GLS with a known precision matrix.
pub fn fit_gls(data: &SurDataset, omega: &Matrix) -> Result<FitResult> {
    check_omega(data, omega)?;
    let moments = SurMoments::new(data);
    gls_with_moments(data, &moments, omega, Estimator::Gls)
}

/// GLS reusing precomputed moments; `estimator` only tags the result.
pub fn gls_with_moments(
    data: &SurDataset,
    moments: &SurMoments,
    omega: &Matrix,
    estimator: Estimator,
) -> Result<FitResult> {
    check_omega(data, omega)?;
    let beta = gls_beta(moments, omega)?;
    let residuals = data.residuals(&beta);
    Ok(FitResult {
        estimator,
        beta_hat: beta,
        residuals,
        k_per_equation: data.k_per_equation(),
        omega_used: Some(omega.clone()),
        solver_meta: None,
    })
}

pub(crate) fn gls_beta(moments: &SurMoments, omega: &Matrix) -> Result<Vec<f64>> {
    let a = moments.normal_matrix(omega);
    let chol = cholesky(&a).map_err(|_| Error::SingularNormalMatrix)?;
    chol.solve_vec(&moments.normal_rhs(omega))
}

/// Σ̂ = (1/T) Σ_t Û_tÛ_t'.
pub fn residual_covariance(fit: &FitResult) -> Matrix {
    let u = &fit.residuals;
    let (n, t) = u.shape();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = crate::linalg::dot(u.row(i), u.row(j)) / t as f64;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Zellner's feasible GLS with Σ̂⁻¹ from OLS residuals.
pub fn fit_fgls(data: &SurDataset) -> Result<FitResult> {
    let ols = fit_ols(data)?;
    let sigma_hat = residual_covariance(&ols);
    let omega = cholesky(&sigma_hat).map_err(|_| Error::SingularSigmaHat)?.inverse();
    let moments = SurMoments::new(data);
    gls_with_moments(data, &moments, &omega, Estimator::Fgls)
}

/// Feasible GLS with the graphical-lasso precision estimate.
pub fn fit_fglasso(data: &SurDataset, config: &GlassoConfig) -> Result<FitResult> {
    let ols = fit_ols(data)?;
    let sigma_hat = residual_covariance(&ols);
    let moments = SurMoments::new(data);
    fglasso_from_parts(data, &moments, &sigma_hat, config).map(|(fit, _)| fit)
}

pub(crate) fn fglasso_from_parts(
    data: &SurDataset,
    moments: &SurMoments,
    sigma_hat: &Matrix,
    config: &GlassoConfig,
) -> Result<(FitResult, GlassoResult)> {
    let gl = glasso_solve(sigma_hat, config)?;
    let mut fit = gls_with_moments(data, moments, &gl.omega_hat, Estimator::Fglasso)?;
    fit.solver_meta = Some(SolverMeta::from(&gl));
    Ok((fit, gl))
}

/// Plug-in asymptotic standard errors sqrt([(Σ_t X_tΩX_t'/T)⁻¹]_ii / T).
pub fn gls_standard_errors(data: &SurDataset, omega: &Matrix) -> Result<Vec<f64>> {
    check_omega(data, omega)?;
    let moments = SurMoments::new(data);
    standard_errors_with_moments(&moments, omega)
}

pub(crate) fn standard_errors_with_moments(moments: &SurMoments, omega: &Matrix) -> Result<Vec<f64>> {
    let a = moments.normal_matrix(omega);
    let chol = cholesky(&a).map_err(|_| Error::SingularNormalMatrix)?;
    Ok(chol.inverse_diag().into_iter().map(f64::sqrt).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::column(v)
    }

    fn row(v: &[f64]) -> Matrix {
        Matrix::from_rows(&[v]).unwrap()
    }

    #[test]
    fn ols_examples() {
        let d = SurDataset::new(vec![col(&[1.0, 2.0])], row(&[2.0, 4.0])).unwrap();
        assert!((fit_ols(&d).unwrap().beta_hat[0] - 2.0).abs() < 1e-14);

        let x1 = col(&[1.0, -2.0, 0.5]);
        let x2 = col(&[0.3, 1.0, 2.0]);
        let y = Matrix::from_rows(&[x1.col_vec(0), x2.col_vec(0)]).unwrap();
        let fit = fit_ols(&SurDataset::new(vec![x1, x2], y).unwrap()).unwrap();
        assert!((fit.beta_hat[0] - 1.0).abs() < 1e-14 && (fit.beta_hat[1] - 1.0).abs() < 1e-14);

        let d = SurDataset::new(vec![col(&[1.0, 1.0])], row(&[1.0, 3.0])).unwrap();
        let fit = fit_ols(&d).unwrap();
        assert!((fit.beta_hat[0] - 2.0).abs() < 1e-14);
        assert!(fit.residuals.sub(&row(&[-1.0, 1.0])).unwrap().norm_max() < 1e-14);
    }

    #[test]
    fn ols_reports_rank_deficient_equation() {
        let good = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let bad = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        let y = Matrix::zeros(2, 3);
        let d = SurDataset::new(vec![good, bad], y).unwrap();
        assert!(matches!(fit_ols(&d), Err(Error::RankDeficientRegressors { equation: 1 })));
        assert!(matches!(d.check_rank(), Err(Error::RankDeficientRegressors { equation: 1 })));
    }

    #[test]
    fn dataset_shape_checks() {
        assert!(SurDataset::new(vec![col(&[1.0, 2.0])], Matrix::zeros(2, 2)).is_err());
        assert!(SurDataset::new(vec![col(&[1.0]), col(&[1.0, 2.0])], Matrix::zeros(2, 2)).is_err());
    }

    fn two_eq_unit() -> SurDataset {
        SurDataset::new(vec![col(&[1.0]), col(&[1.0])], col(&[1.0, 2.0])).unwrap()
    }

    #[test]
    fn gls_hand_example() {
        let omega = Matrix::from_rows(&[[2.0, -1.0], [-1.0, 2.0]]).unwrap();
        let fit = fit_gls(&two_eq_unit(), &omega).unwrap();
        assert!((fit.beta_hat[0] - 1.0).abs() < 1e-14);
        assert!((fit.beta_hat[1] - 2.0).abs() < 1e-14);
        assert!(fit.residuals.norm_max() < 1e-14);

        // A = Ω, so the SEs are sqrt(diag Ω⁻¹) = sqrt(2/3)
        let se = gls_standard_errors(&two_eq_unit(), &omega).unwrap();
        for s in se {
            assert!((s - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn gls_checks_omega_shape() {
        assert!(matches!(
            fit_gls(&two_eq_unit(), &Matrix::identity(3)),
            Err(Error::DimensionMismatch(_))
        ));
        let singular = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(fit_gls(&two_eq_unit(), &singular), Err(Error::SingularNormalMatrix)));
    }

    #[test]
    fn residual_covariance_examples() {
        let mk = |u: Matrix| FitResult {
            estimator: Estimator::Ols,
            beta_hat: vec![],
            residuals: u,
            k_per_equation: 1,
            omega_used: None,
            solver_meta: None,
        };
        assert_eq!(residual_covariance(&mk(Matrix::zeros(3, 4))), Matrix::zeros(3, 3));
        assert_eq!(residual_covariance(&mk(row(&[1.0, -1.0]))), Matrix::identity(1));
        let u = Matrix::from_rows(&[[1.0, 1.0], [1.0, -1.0]]).unwrap();
        assert_eq!(residual_covariance(&mk(u)), Matrix::identity(2));
    }

    #[test]
    fn fgls_singular_cases() {
        // N = 3, T = 2
        let xs = vec![col(&[1.0, 0.3]), col(&[0.2, 1.0]), col(&[1.0, -1.0])];
        let y = Matrix::from_rows(&[[0.5, 0.1], [1.0, 2.0], [0.3, 0.4]]).unwrap();
        let d = SurDataset::new(xs, y).unwrap();
        assert!(matches!(fit_fgls(&d), Err(Error::SingularSigmaHat)));

        // exact fit
        let xs = vec![col(&[1.0, 2.0, 3.0]), col(&[1.0, -1.0, 0.5])];
        let y = Matrix::from_rows(&[[2.0, 4.0, 6.0], [-1.0, 1.0, -0.5]]).unwrap();
        let d = SurDataset::new(xs, y).unwrap();
        assert!(matches!(fit_fgls(&d), Err(Error::SingularSigmaHat)));
    }

    #[test]
    fn standard_error_examples() {
        // (1/T) Σ x² = 1 with T = 4
        let d = SurDataset::new(vec![col(&[1.0, -1.0, 1.0, -1.0])], row(&[0.3, 0.1, -0.2, 0.5])).unwrap();
        let se = gls_standard_errors(&d, &Matrix::identity(1)).unwrap();
        assert!((se[0] - 0.5).abs() < 1e-15);

        // orthonormal columns scaled so that XᵢᵀXᵢ = T·I
        let x = Matrix::from_rows(&[[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]).unwrap();
        let d = SurDataset::new(vec![x.clone(), x], Matrix::zeros(2, 4)).unwrap();
        let se = gls_standard_errors(&d, &Matrix::identity(2)).unwrap();
        assert!(se.iter().all(|s| (s - 0.5).abs() < 1e-15));
    }

    #[test]
    fn estimator_names_round_trip() {
        for e in Estimator::ALL {
            assert_eq!(e.key().parse::<Estimator>().unwrap(), e);
        }
        assert!("gmm".parse::<Estimator>().is_err());
    }
}

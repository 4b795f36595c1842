//! K-fold cross-validation of the graphical-lasso penalty by out-of-fold
//! prediction error of the FGLasso coefficients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glasso::{regularization_path, GlassoConfig, GlassoResult};
use crate::linalg::Matrix;
use crate::rng::StreamRng;
use crate::sur::{fglasso_from_parts, fit_ols, gls_beta, residual_covariance, FitResult, SurDataset, SurMoments};

/// Smallest grid value used when Σ̂ has no off-diagonal mass.
pub const DEGENERATE_LAMBDA: f64 = 1e-8;
/// Mean MSEs this close to the minimum are ties.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldScheme {
    /// Seeded random permutation of the periods, cut into contiguous chunks.
    #[default]
    Random,
    /// Consecutive time blocks.
    Contiguous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSpec {
    pub n_folds: usize,
    /// Strictly descending, positive.
    pub lambda_grid: Vec<f64>,
    pub seed: u64,
    pub scheme: FoldScheme,
}

impl CvSpec {
    pub fn new(lambda_grid: Vec<f64>, seed: u64) -> Self {
        Self { n_folds: 5, lambda_grid, seed, scheme: FoldScheme::Random }
    }

    fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 folds, got {}", self.n_folds)));
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::InvalidArgument("lambda grid is empty".into()));
        }
        if self.lambda_grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument("lambda grid values must be positive".into()));
        }
        if self.lambda_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument("lambda grid must be strictly descending".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcludedLambda {
    pub lambda: f64,
    pub fold: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_lambda: f64,
    /// (λ, mean validation MSE) for every λ that succeeded on all folds, in grid order.
    pub mse_by_lambda: Vec<(f64, f64)>,
    pub excluded: Vec<ExcludedLambda>,
    /// Fold index of each period.
    pub fold_assignment: Vec<usize>,
}

/// Assigns each of `t` periods to one of `n_folds` folds whose sizes differ by at most one.
pub fn fold_assignment(t: usize, n_folds: usize, scheme: FoldScheme, seed: u64) -> Vec<usize> {
    let order: Vec<usize> = match scheme {
        FoldScheme::Random => StreamRng::new(seed).permutation(t),
        FoldScheme::Contiguous => (0..t).collect(),
    };
    let mut folds = vec![0; t];
    for f in 0..n_folds {
        for &p in &order[f * t / n_folds..(f + 1) * t / n_folds] {
            folds[p] = f;
        }
    }
    folds
}

/// `n_points` log-spaced values from max_{i≠j}|Σ̂_ij| down to 1% of it.
pub fn default_lambda_grid(sigma_hat: &Matrix, n_points: usize) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument(format!("grid needs at least 2 points, got {n_points}")));
    }
    let n = sigma_hat.rows();
    let mut lambda_max = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                lambda_max = lambda_max.max(sigma_hat[(i, j)].abs());
            }
        }
    }
    if lambda_max == 0.0 {
        return Ok(vec![DEGENERATE_LAMBDA]);
    }
    let last = (n_points - 1) as f64;
    Ok((0..n_points).map(|k| lambda_max * 0.01f64.powf(k as f64 / last)).collect())
}

struct FoldOutcome {
    /// One entry per grid point: validation MSE or failure reason.
    mse: Vec<std::result::Result<f64, String>>,
}

fn run_fold(
    data: &SurDataset,
    folds: &[usize],
    fold: usize,
    grid: &[f64],
    config: &GlassoConfig,
) -> Result<FoldOutcome> {
    let train_idx: Vec<usize> = (0..folds.len()).filter(|&p| folds[p] != fold).collect();
    let valid_idx: Vec<usize> = (0..folds.len()).filter(|&p| folds[p] == fold).collect();
    let train = data.select_periods(&train_idx)?;
    let ols = fit_ols(&train).map_err(|e| match e {
        Error::RankDeficientRegressors { equation } => Error::RankDeficientTrainingSplit { fold, equation },
        other => other,
    })?;
    let sigma_hat = residual_covariance(&ols);
    let moments = SurMoments::new(&train);

    let path = match regularization_path(&sigma_hat, grid, config) {
        Ok(p) => p,
        Err(e) => {
            let reason = e.to_string();
            return Ok(FoldOutcome { mse: grid.iter().map(|_| Err(reason.clone())).collect() });
        }
    };
    let (n, k) = (data.n_equations(), data.k_per_equation());
    let denom = (n * valid_idx.len()) as f64;
    let mse = path
        .into_iter()
        .map(|res| {
            let gl = res.map_err(|e| e.to_string())?;
            let beta = gls_beta(&moments, &gl.omega_hat).map_err(|e| e.to_string())?;
            let mut sse = 0.0;
            for i in 0..n {
                let x = data.x_block(i);
                let b = &beta[i * k..(i + 1) * k];
                for &p in &valid_idx {
                    let fitted: f64 = x.row(p).iter().zip(b).map(|(a, c)| a * c).sum();
                    let r = data.y()[(i, p)] - fitted;
                    sse += r * r;
                }
            }
            Ok(sse / denom)
        })
        .collect();
    Ok(FoldOutcome { mse })
}

/// Picks the λ with the smallest mean MSE, preferring the largest λ among ties.
fn select(mse_by_lambda: &[(f64, f64)]) -> Option<f64> {
    let min = mse_by_lambda.iter().map(|&(_, m)| m).fold(f64::INFINITY, f64::min);
    mse_by_lambda
        .iter()
        .filter(|&&(_, m)| m <= min + TIE_TOL)
        .map(|&(l, _)| l)
        .fold(None, |best: Option<f64>, l| Some(best.map_or(l, |b| b.max(l))))
}

pub fn cross_validate(data: &SurDataset, spec: &CvSpec, glasso_config: &GlassoConfig) -> Result<CvResult> {
    spec.validate()?;
    let t = data.n_periods();
    if t < spec.n_folds {
        return Err(Error::InvalidArgument(format!("T = {t} is smaller than the fold count {}", spec.n_folds)));
    }
    let folds = fold_assignment(t, spec.n_folds, spec.scheme, spec.seed);
    let grid = &spec.lambda_grid;

    let outcomes: Vec<FoldOutcome> = (0..spec.n_folds)
        .into_par_iter()
        .map(|f| run_fold(data, &folds, f, grid, glasso_config))
        .collect::<Result<Vec<_>>>()?;

    let mut mse_by_lambda = Vec::with_capacity(grid.len());
    let mut excluded = Vec::new();
    for (li, &lambda) in grid.iter().enumerate() {
        let mut total = 0.0;
        let mut ok = true;
        for (f, out) in outcomes.iter().enumerate() {
            match &out.mse[li] {
                Ok(m) => total += m,
                Err(reason) => {
                    ok = false;
                    excluded.push(ExcludedLambda { lambda, fold: f, reason: reason.clone() });
                }
            }
        }
        if ok {
            mse_by_lambda.push((lambda, total / spec.n_folds as f64));
        }
    }
    for e in &excluded {
        log::warn!("lambda {} excluded on fold {}: {}", e.lambda, e.fold, e.reason);
    }
    let best_lambda = select(&mse_by_lambda).ok_or(Error::NoValidLambda)?;
    Ok(CvResult { best_lambda, mse_by_lambda, excluded, fold_assignment: folds })
}

/// How to build a `CvSpec` for a dataset: the grid comes from that
/// dataset's OLS residual covariance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvPlan {
    pub n_folds: usize,
    pub n_lambdas: usize,
    pub scheme: FoldScheme,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self { n_folds: 5, n_lambdas: 20, scheme: FoldScheme::Random }
    }
}

/// FGLasso at the cross-validated penalty.
#[derive(Clone, Debug)]
pub struct CvFit {
    pub fit: FitResult,
    pub glasso: GlassoResult,
    pub cv: CvResult,
}

/// Fold-assignment seed of a replication, kept apart from its data stream.
pub fn cv_seed(replication_seed: u64) -> u64 {
    crate::rng::derive_seed(replication_seed, &[CV_STREAM])
}

const CV_STREAM: u64 = 0xc5;

/// Selects λ by cross-validation, then refits on all periods.
pub fn fit_fglasso_cv(data: &SurDataset, plan: &CvPlan, seed: u64, config: &GlassoConfig) -> Result<CvFit> {
    let sigma_hat = residual_covariance(&fit_ols(data)?);
    fglasso_cv_from_parts(data, &SurMoments::new(data), &sigma_hat, plan, seed, config)
}

pub(crate) fn fglasso_cv_from_parts(
    data: &SurDataset,
    moments: &SurMoments,
    sigma_hat: &Matrix,
    plan: &CvPlan,
    seed: u64,
    config: &GlassoConfig,
) -> Result<CvFit> {
    let grid = default_lambda_grid(sigma_hat, plan.n_lambdas)?;
    let spec = CvSpec { n_folds: plan.n_folds, lambda_grid: grid, seed, scheme: plan.scheme };
    let cv = cross_validate(data, &spec, config)?;
    let cfg = GlassoConfig { lambda: cv.best_lambda, ..config.clone() };
    let (fit, glasso) = fglasso_from_parts(data, moments, sigma_hat, &cfg)?;
    Ok(CvFit { fit, glasso, cv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{simulate, DesignKind, PrecisionDesign, SimSpec};

    #[test]
    fn grid_examples() {
        let s = Matrix::from_rows(&[[1.0, 0.5, -0.1], [0.5, 2.0, 0.2], [-0.1, 0.2, 1.0]]).unwrap();
        let g = default_lambda_grid(&s, 3).unwrap();
        let want = [0.5, 0.5 * 0.1, 0.005];
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }

        assert_eq!(default_lambda_grid(&Matrix::from_diag(&[1.0, 2.0]), 5).unwrap(), vec![1e-8]);
        let g = default_lambda_grid(&s, 2).unwrap();
        assert_eq!(g.len(), 2);
        assert!((g[0] - 0.5).abs() < 1e-15 && (g[1] - 0.005).abs() < 1e-15);
        assert!(default_lambda_grid(&s, 1).is_err());
    }

    #[test]
    fn folds_partition_the_periods() {
        for t in [5, 7, 23, 200] {
            for scheme in [FoldScheme::Random, FoldScheme::Contiguous] {
                let f = fold_assignment(t, 5, scheme, 42);
                assert_eq!(f.len(), t);
                let sizes: Vec<usize> = (0..5).map(|k| f.iter().filter(|&&x| x == k).count()).collect();
                assert_eq!(sizes.iter().sum::<usize>(), t);
                let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
                assert!(hi - lo <= 1, "{sizes:?}");
                assert_eq!(f, fold_assignment(t, 5, scheme, 42));
            }
        }
        assert_ne!(fold_assignment(50, 5, FoldScheme::Random, 1), fold_assignment(50, 5, FoldScheme::Random, 2));
    }

    #[test]
    fn tie_break_prefers_larger_lambda() {
        assert_eq!(select(&[(1.0, 0.5), (0.5, 0.5), (0.1, 0.6)]), Some(1.0));
        assert_eq!(select(&[(1.0, 0.7), (0.5, 0.5), (0.1, 0.6)]), Some(0.5));
        assert_eq!(select(&[]), None);
    }

    fn small_sim(seed: u64) -> crate::dgp::Simulation {
        simulate(&SimSpec::new(PrecisionDesign::new(DesignKind::Band, 6), 40, seed)).unwrap()
    }

    #[test]
    fn single_lambda_grid() {
        let sim = small_sim(1);
        let r = cross_validate(&sim.data, &CvSpec::new(vec![0.3], 7), &GlassoConfig::default()).unwrap();
        assert_eq!(r.best_lambda, 0.3);
        assert_eq!(r.mse_by_lambda.len(), 1);
        assert!(r.mse_by_lambda[0].1.is_finite() && r.mse_by_lambda[0].1 >= 0.0);
    }

    #[test]
    fn cross_validation_is_deterministic() {
        let sim = small_sim(2);
        let ols = fit_ols(&sim.data).unwrap();
        let grid = default_lambda_grid(&residual_covariance(&ols), 8).unwrap();
        let spec = CvSpec::new(grid, 9);
        let a = cross_validate(&sim.data, &spec, &GlassoConfig::default()).unwrap();
        let b = cross_validate(&sim.data, &spec, &GlassoConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mse_by_lambda.len(), 8);
        assert!(a.mse_by_lambda.iter().all(|&(_, m)| m.is_finite() && m >= 0.0));
        let min = a.mse_by_lambda.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let chosen = a.mse_by_lambda.iter().find(|p| p.0 == a.best_lambda).unwrap();
        assert!(chosen.1 <= min + TIE_TOL);
    }

    fn scaled_noise(sim: &crate::dgp::Simulation, eps: f64) -> SurDataset {
        let (n, t) = (sim.data.n_equations(), sim.data.n_periods());
        let y = Matrix::from_fn(n, t, |i, s| {
            let mean = sim.data.x_block(i)[(s, 0)] * sim.true_beta[i];
            mean + eps * (sim.data.y()[(i, s)] - mean)
        });
        SurDataset::new(sim.data.x_blocks().to_vec(), y).unwrap()
    }

    #[test]
    fn exactly_noiseless_data_has_no_valid_lambda() {
        // K = 1 fits leave zero residual variance, so no Σ̂ is invertible
        let data = scaled_noise(&small_sim(4), 0.0);
        let err = cross_validate(&data, &CvSpec::new(vec![0.5, 1e-4], 5), &GlassoConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NoValidLambda));
    }

    #[test]
    fn near_noiseless_data_prefers_small_penalty() {
        let sim = simulate(&SimSpec::new(PrecisionDesign::new(DesignKind::DenseFromBandedSigma, 6), 60, 4)).unwrap();
        let data = scaled_noise(&sim, 1e-3);
        let sigma = residual_covariance(&fit_ols(&data).unwrap());
        let lmax = default_lambda_grid(&sigma, 2).unwrap()[0];
        let r = cross_validate(&data, &CvSpec::new(vec![lmax, 1e-4 * lmax], 5), &GlassoConfig::default()).unwrap();
        assert_eq!(r.best_lambda, 1e-4 * lmax, "{:?}", r.mse_by_lambda);
        assert!(r.mse_by_lambda.iter().all(|&(_, m)| m < 1e-5));
    }

    #[test]
    fn cv_fit_uses_selected_lambda() {
        let sim = small_sim(5);
        let r = fit_fglasso_cv(&sim.data, &CvPlan { n_lambdas: 6, ..CvPlan::default() }, 3, &GlassoConfig::default())
            .unwrap();
        assert_eq!(r.glasso.lambda, r.cv.best_lambda);
        assert_eq!(r.cv.mse_by_lambda.len(), 6);
        let direct = crate::sur::fit_fglasso(&sim.data, &GlassoConfig::with_lambda(r.cv.best_lambda)).unwrap();
        assert_eq!(direct.beta_hat, r.fit.beta_hat);
    }

    #[test]
    fn rejects_bad_specs() {
        let sim = small_sim(3);
        let cfg = GlassoConfig::default();
        assert!(cross_validate(&sim.data, &CvSpec { n_folds: 1, ..CvSpec::new(vec![0.1], 0) }, &cfg).is_err());
        assert!(cross_validate(&sim.data, &CvSpec::new(vec![0.1, 0.2], 0), &cfg).is_err());
        assert!(cross_validate(&sim.data, &CvSpec::new(vec![], 0), &cfg).is_err());
        assert!(cross_validate(&sim.data, &CvSpec { n_folds: 41, ..CvSpec::new(vec![0.1], 0) }, &cfg).is_err());
    }

    #[test]
    fn rank_deficient_training_split_is_named() {
        // equation 1 has a single nonzero regressor value; whichever fold holds it
        // leaves the training split with an all-zero column
        let t = 10;
        let x0 = Matrix::from_fn(t, 1, |s, _| (s as f64 * 0.7).sin() + 1.5);
        let x1 = Matrix::from_fn(t, 1, |s, _| if s == 3 { 1.0 } else { 0.0 });
        let y = Matrix::from_fn(2, t, |i, s| (i + s) as f64 * 0.1);
        let data = SurDataset::new(vec![x0, x1], y).unwrap();
        let spec = CvSpec { scheme: FoldScheme::Contiguous, ..CvSpec::new(vec![0.1], 0) };
        let err = cross_validate(&data, &spec, &GlassoConfig::default()).unwrap_err();
        assert!(matches!(err, Error::RankDeficientTrainingSplit { fold: 1, equation: 1 }), "{err:?}");
    }
}

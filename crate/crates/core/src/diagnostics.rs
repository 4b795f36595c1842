//! Empirical checks of the estimator's theory: incoherence of a precision
//! matrix, support recovery, convergence rates and confidence-interval coverage.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dgp::{replication_seed, simulate, DesignKind, PrecisionDesign, SimSpec};
use crate::error::{Error, Result};
use crate::glasso::{GlassoConfig, ZERO_TOL};
use crate::linalg::{cholesky, Matrix};
use crate::modelselect::{cv_seed, fglasso_cv_from_parts, CvPlan};
use crate::stats::{mean_sd, ols_slope};
use crate::sur::{fit_ols, gls_with_moments, residual_covariance, standard_errors_with_moments, Estimator, SurMoments};

/// Largest N accepted by [`incoherence`]; Γ* has N² rows.
pub const INCOHERENCE_MAX_N: usize = 60;
/// Smallest nonzero magnitude across the simulation designs.
pub const DEFAULT_STRONG_THRESHOLD: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Incoherence {
    /// max over e ∉ S of ‖Γ*_eS (Γ*_SS)⁻¹‖₁; the condition holds iff this is < 1.
    pub incoherence: f64,
    /// 1 − incoherence.
    pub alpha: f64,
    /// ⦀(Γ*_SS)⁻¹⦀_∞
    pub kappa_gamma: f64,
    /// ⦀Ω⁻¹⦀_∞
    pub kappa_sigma: f64,
    /// |S|, self-links included.
    pub support_size: usize,
}

/// Incoherence quantities of Γ* = Ω⊗Ω over the support S = {(i,j): Ω_ij ≠ 0}.
/// Pair (i,j) is Γ* index i·N + j, so Γ*[(i,j),(k,l)] = Ω_ik Ω_jl.
pub fn incoherence(omega: &Matrix) -> Result<Incoherence> {
    let n = omega.rows();
    if !omega.is_square() {
        return Err(Error::DimensionMismatch(format!("omega must be square, got {:?}", omega.shape())));
    }
    if n > INCOHERENCE_MAX_N {
        return Err(Error::TooLarge { n, max: INCOHERENCE_MAX_N });
    }
    let kappa_sigma = cholesky(omega)?.inverse().norm_rowsum();

    let (support, off): (Vec<(usize, usize)>, Vec<(usize, usize)>) = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .partition(|&(i, j)| omega[(i, j)].abs() >= ZERO_TOL);
    let gamma = |(i, j): (usize, usize), (k, l): (usize, usize)| omega[(i, k)] * omega[(j, l)];

    let s = support.len();
    let g_ss = Matrix::from_fn(s, s, |p, q| gamma(support[p], support[q]));
    let m = cholesky(&g_ss).map_err(|_| Error::SingularGammaSS)?.inverse();
    let kappa_gamma = m.norm_rowsum();

    let mut worst = 0.0f64;
    let mut row = vec![0.0; s];
    for &e in &off {
        row.iter_mut().for_each(|v| *v = 0.0);
        for (p, &sp) in support.iter().enumerate() {
            let g = gamma(e, sp);
            if g != 0.0 {
                for (r, &mpq) in row.iter_mut().zip(m.row(p)) {
                    *r += g * mpq;
                }
            }
        }
        worst = worst.max(row.iter().map(|v| v.abs()).sum());
    }
    Ok(Incoherence { incoherence: worst, alpha: 1.0 - worst, kappa_gamma, kappa_sigma, support_size: s })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryCounts {
    /// Unordered pairs estimated nonzero where the truth is zero.
    pub false_positives: usize,
    /// Unordered pairs with |Ω_ij| ≥ threshold estimated as zero.
    pub missed_strong_edges: usize,
    pub true_zero_pairs: usize,
    pub strong_edges: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    #[serde(flatten)]
    pub counts: RecoveryCounts,
    /// ‖Ω̂ − Ω‖_max
    pub max_error: f64,
}

/// Compares estimated and true edge sets over unordered off-diagonal pairs.
pub fn recovery_check(
    omega_true: &Matrix,
    omega_hat: &Matrix,
    zero_tol: f64,
    strong_threshold: f64,
) -> Result<RecoveryReport> {
    if omega_true.shape() != omega_hat.shape() || !omega_true.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "true omega {:?} vs estimate {:?}",
            omega_true.shape(),
            omega_hat.shape()
        )));
    }
    let n = omega_true.rows();
    let mut counts = RecoveryCounts { false_positives: 0, missed_strong_edges: 0, true_zero_pairs: 0, strong_edges: 0 };
    for i in 0..n {
        for j in 0..i {
            let truth = omega_true[(i, j)].abs();
            let est = omega_hat[(i, j)].abs().max(omega_hat[(j, i)].abs());
            if truth == 0.0 {
                counts.true_zero_pairs += 1;
                if est > zero_tol {
                    counts.false_positives += 1;
                }
            } else if truth >= strong_threshold {
                counts.strong_edges += 1;
                if est <= zero_tol {
                    counts.missed_strong_edges += 1;
                }
            }
        }
    }
    let max_error = omega_hat.sub(omega_true)?.norm_max();
    Ok(RecoveryReport { counts, max_error })
}

/// Shared settings of the replication-based experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSettings {
    pub n_reps: usize,
    pub seed: u64,
    pub cv: CvPlan,
    pub glasso: GlassoConfig,
}

/// What one replication measures.
struct ReplicationFit {
    sim: crate::dgp::Simulation,
    moments: SurMoments,
    fglasso_beta: Vec<f64>,
    omega_hat: Matrix,
    lambda: f64,
}

fn replicate(design: PrecisionDesign, t: usize, rep: usize, settings: &ReplicationSettings) -> Result<ReplicationFit> {
    let seed = replication_seed(settings.seed, design.kind, design.n, t, rep);
    let sim = simulate(&SimSpec::new(design, t, seed))?;
    let moments = SurMoments::new(&sim.data);
    let sigma_hat = residual_covariance(&fit_ols(&sim.data)?);
    let fit = fglasso_cv_from_parts(&sim.data, &moments, &sigma_hat, &settings.cv, cv_seed(seed), &settings.glasso)?;
    Ok(ReplicationFit {
        fglasso_beta: fit.fit.beta_hat,
        omega_hat: fit.glasso.omega_hat,
        lambda: fit.glasso.lambda,
        sim,
        moments,
    })
}

fn run_reps<R: Send>(n_reps: usize, f: impl Fn(usize) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    (0..n_reps).into_par_iter().map(f).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateExperimentSpec {
    pub design: DesignKind,
    pub sizes: Vec<usize>,
    /// Strictly increasing, at least three values.
    pub t_grid: Vec<usize>,
    #[serde(flatten)]
    pub settings: ReplicationSettings,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCell {
    pub design: DesignKind,
    pub n: usize,
    pub t: usize,
    pub n_reps: usize,
    pub omega_error_mean: f64,
    pub omega_error_sd: f64,
    /// ‖β̂_FGLasso − β̂_GLS‖_∞ with GLS at the true Ω.
    pub beta_gap_mean: f64,
    pub beta_gap_sd: f64,
    pub lambda_mean: f64,
}

/// Mean ‖Ω̂ − Ω‖_max and FGLasso–GLS gap per (N, T) cell, with CV-selected λ.
pub fn rate_experiment(spec: &RateExperimentSpec) -> Result<Vec<RateCell>> {
    if spec.t_grid.len() < 3 || spec.t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("t_grid must be strictly increasing with at least 3 values".into()));
    }
    if spec.sizes.is_empty() || spec.settings.n_reps == 0 {
        return Err(Error::InvalidArgument("need at least one size and one replication".into()));
    }
    let mut cells = Vec::new();
    for &n in &spec.sizes {
        let design = PrecisionDesign::new(spec.design, n);
        for &t in &spec.t_grid {
            let reps = run_reps(spec.settings.n_reps, |rep| {
                let r = replicate(design, t, rep, &spec.settings)?;
                let gls = gls_with_moments(&r.sim.data, &r.moments, &r.sim.true_omega, Estimator::Gls)?;
                let omega_err = r.omega_hat.sub(&r.sim.true_omega)?.norm_max();
                Ok((omega_err, max_abs_diff(&r.fglasso_beta, &gls.beta_hat), r.lambda))
            })?;
            let (om, osd) = mean_sd(&reps.iter().map(|r| r.0).collect::<Vec<_>>());
            let (gm, gsd) = mean_sd(&reps.iter().map(|r| r.1).collect::<Vec<_>>());
            let (lm, _) = mean_sd(&reps.iter().map(|r| r.2).collect::<Vec<_>>());
            cells.push(RateCell {
                design: spec.design,
                n,
                t,
                n_reps: reps.len(),
                omega_error_mean: om,
                omega_error_sd: osd,
                beta_gap_mean: gm,
                beta_gap_sd: gsd,
                lambda_mean: lm,
            });
        }
    }
    Ok(cells)
}

/// Slope of log(mean ‖Ω̂ − Ω‖_max) on log T over the cells with the given N.
pub fn rate_slope(cells: &[RateCell], n: usize) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = cells
        .iter()
        .filter(|c| c.n == n)
        .map(|c| ((c.t as f64).ln(), c.omega_error_mean.ln()))
        .unzip();
    (x.len() >= 2).then(|| ols_slope(&x, &y))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageExperimentSpec {
    pub design: PrecisionDesign,
    pub n_periods: usize,
    pub nominal_level: f64,
    #[serde(flatten)]
    pub settings: ReplicationSettings,
}

pub const MIN_COVERAGE_REPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub design: DesignKind,
    pub n: usize,
    pub t: usize,
    pub n_reps: usize,
    pub nominal_level: f64,
    /// Fraction of (replication, coefficient) pairs covered using true-Ω standard errors.
    pub coverage_true_omega: f64,
    /// Same with standard errors at the estimated Ω̂.
    pub coverage_plugin: f64,
}

/// Pooled coverage of β̂_FGLasso ± z·SE intervals.
pub fn coverage_experiment(spec: &CoverageExperimentSpec) -> Result<CoverageResult> {
    let level = spec.nominal_level;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("nominal level must be in (0, 1), got {level}")));
    }
    if spec.settings.n_reps < MIN_COVERAGE_REPS {
        return Err(Error::InvalidArgument(format!(
            "coverage needs at least {MIN_COVERAGE_REPS} replications, got {}",
            spec.settings.n_reps
        )));
    }
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 + level / 2.0);
    let t = spec.n_periods;
    let reps = run_reps(spec.settings.n_reps, |rep| {
        let r = replicate(spec.design, t, rep, &spec.settings)?;
        let se_true = standard_errors_with_moments(&r.moments, &r.sim.true_omega)?;
        let se_plug = standard_errors_with_moments(&r.moments, &r.omega_hat)?;
        let covered = |se: &[f64]| {
            r.fglasso_beta
                .iter()
                .zip(&r.sim.true_beta)
                .zip(se)
                .filter(|((b, truth), s)| (*b - *truth).abs() <= z * *s)
                .count()
        };
        Ok((covered(&se_true), covered(&se_plug), r.fglasso_beta.len()))
    })?;
    let total: usize = reps.iter().map(|r| r.2).sum();
    Ok(CoverageResult {
        design: spec.design.kind,
        n: spec.design.n,
        t,
        n_reps: reps.len(),
        nominal_level: level,
        coverage_true_omega: reps.iter().map(|r| r.0).sum::<usize>() as f64 / total as f64,
        coverage_plugin: reps.iter().map(|r| r.1).sum::<usize>() as f64 / total as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryExperimentSpec {
    pub design: PrecisionDesign,
    pub n_periods: usize,
    pub strong_threshold: f64,
    #[serde(flatten)]
    pub settings: ReplicationSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverySummary {
    pub design: DesignKind,
    pub n: usize,
    pub t: usize,
    pub n_reps: usize,
    /// Mean over replications of false positives / true-zero pairs.
    pub false_positive_rate_mean: f64,
    /// Fraction of replications that kept every strong edge.
    pub all_strong_retained_fraction: f64,
    pub max_error_mean: f64,
    pub per_replication: Vec<RecoveryReport>,
}

/// Support recovery of Ω̂ at the CV-selected λ across replications.
pub fn recovery_experiment(spec: &RecoveryExperimentSpec) -> Result<RecoverySummary> {
    if spec.settings.n_reps == 0 {
        return Err(Error::InvalidArgument("need at least one replication".into()));
    }
    let reports = run_reps(spec.settings.n_reps, |rep| {
        let r = replicate(spec.design, spec.n_periods, rep, &spec.settings)?;
        recovery_check(&r.sim.true_omega, &r.omega_hat, ZERO_TOL, spec.strong_threshold)
    })?;
    let k = reports.len() as f64;
    let fp_rate = |c: &RecoveryCounts| {
        if c.true_zero_pairs == 0 {
            0.0
        } else {
            c.false_positives as f64 / c.true_zero_pairs as f64
        }
    };
    Ok(RecoverySummary {
        design: spec.design.kind,
        n: spec.design.n,
        t: spec.n_periods,
        n_reps: reports.len(),
        false_positive_rate_mean: reports.iter().map(|r| fp_rate(&r.counts)).sum::<f64>() / k,
        all_strong_retained_fraction: reports.iter().filter(|r| r.counts.missed_strong_edges == 0).count() as f64 / k,
        max_error_mean: reports.iter().map(|r| r.max_error).sum::<f64>() / k,
        per_replication: reports,
    })
}

/// One line of the long-format diagnostics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub design: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub n_reps: usize,
}

fn row(design: DesignKind, n: usize, t: usize, metric: &str, mean: f64, sd: f64, n_reps: usize) -> ExperimentRow {
    ExperimentRow { design: design.key().to_string(), n, t, metric: metric.to_string(), mean, sd, n_reps }
}

pub fn rate_rows(cells: &[RateCell]) -> Vec<ExperimentRow> {
    cells
        .iter()
        .flat_map(|c| {
            [
                row(c.design, c.n, c.t, "omega_max_error", c.omega_error_mean, c.omega_error_sd, c.n_reps),
                row(c.design, c.n, c.t, "beta_gap_vs_gls", c.beta_gap_mean, c.beta_gap_sd, c.n_reps),
            ]
        })
        .collect()
}

/// Coverage rows carry the binomial standard error of the pooled fraction as `sd`.
pub fn coverage_rows(c: &CoverageResult) -> Vec<ExperimentRow> {
    let pooled = (c.n * c.n_reps) as f64;
    let se = |p: f64| (p * (1.0 - p) / pooled).sqrt();
    vec![
        row(c.design, c.n, c.t, "coverage_true_omega", c.coverage_true_omega, se(c.coverage_true_omega), c.n_reps),
        row(c.design, c.n, c.t, "coverage_plugin", c.coverage_plugin, se(c.coverage_plugin), c.n_reps),
    ]
}

pub fn recovery_rows(s: &RecoverySummary) -> Vec<ExperimentRow> {
    let sd_of = |f: &dyn Fn(&RecoveryReport) -> f64| mean_sd(&s.per_replication.iter().map(f).collect::<Vec<_>>());
    let (fp, fp_sd) = sd_of(&|r| r.counts.false_positives as f64);
    let (miss, miss_sd) = sd_of(&|r| r.counts.missed_strong_edges as f64);
    let (err, err_sd) = sd_of(&|r| r.max_error);
    vec![
        row(s.design, s.n, s.t, "false_positives", fp, fp_sd, s.n_reps),
        row(s.design, s.n, s.t, "missed_strong_edges", miss, miss_sd, s.n_reps),
        row(s.design, s.n, s.t, "omega_max_error", err, err_sd, s.n_reps),
    ]
}

pub fn incoherence_rows(design: DesignKind, n: usize, inc: &Incoherence) -> Vec<ExperimentRow> {
    [
        ("incoherence", inc.incoherence),
        ("alpha", inc.alpha),
        ("kappa_gamma", inc.kappa_gamma),
        ("kappa_sigma", inc.kappa_sigma),
    ]
    .into_iter()
    .map(|(m, v)| row(design, n, 0, m, v, 0.0, 1))
    .collect()
}

/// Writes rows with the header design,N,T,metric,mean,sd,n_reps.
pub fn write_rows_csv<W: Write>(rows: &[ExperimentRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["design", "N", "T", "metric", "mean", "sd", "n_reps"]).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
